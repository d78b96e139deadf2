#include "critter/motion/skeleton.hpp"

#include <array>
#include <cmath>
#include <unordered_set>

#include "critter/util/error.hpp"

namespace critter::motion {

namespace {

constexpr std::array<std::string_view, 6> kChannelNames = {
    "Xposition", "Yposition", "Zposition", "Xrotation", "Yrotation", "Zrotation"};

}  // namespace

std::string_view channel_name(Channel c) { return kChannelNames[static_cast<std::size_t>(c)]; }

std::optional<Channel> channel_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kChannelNames.size(); ++i) {
    if (kChannelNames[i] == name) return static_cast<Channel>(i);
  }
  return std::nullopt;
}

Skeleton::Skeleton(std::vector<Joint> joints) : joints_(std::move(joints)) {
  if (joints_.empty()) throw InvalidArgument("skeleton has no joints");
  std::unordered_set<std::string> names;
  channel_offsets_.reserve(joints_.size());
  for (std::size_t i = 0; i < joints_.size(); ++i) {
    const Joint& j = joints_[i];
    if (i == 0) {
      if (j.parent != -1) throw InvalidArgument("first joint must be the root");
    } else if (j.parent < 0 || j.parent >= static_cast<int>(i)) {
      throw InvalidArgument("joint '" + j.name + "' does not follow its parent (or is a second root)");
    }
    if (j.name.empty()) throw InvalidArgument("joint name is empty");
    if (!names.insert(j.name).second) throw InvalidArgument("duplicate joint name '" + j.name + "'");
    if (!j.offset.allFinite() || (j.end_site && !j.end_site->allFinite())) {
      throw InvalidArgument("non-finite offset on joint '" + j.name + "'");
    }
    unsigned seen = 0;
    for (Channel c : j.channels) {
      const unsigned bit = 1u << static_cast<unsigned>(c);
      if (seen & bit) throw InvalidArgument("repeated channel on joint '" + j.name + "'");
      seen |= bit;
    }
    channel_offsets_.push_back(num_channels_);
    num_channels_ += static_cast<int>(j.channels.size());
  }
}

int Skeleton::find(std::string_view name) const {
  for (std::size_t i = 0; i < joints_.size(); ++i) {
    if (joints_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

std::vector<int> Skeleton::children(int joint) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < joints_.size(); ++i) {
    if (joints_[i].parent == joint) out.push_back(static_cast<int>(i));
  }
  return out;
}

std::vector<int> Skeleton::depth_first_order() const {
  std::vector<int> order;
  order.reserve(joints_.size());
  std::vector<int> stack = {0};
  while (!stack.empty()) {
    const int j = stack.back();
    stack.pop_back();
    order.push_back(j);
    const auto kids = children(j);
    for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back(*it);
  }
  return order;
}

Skeleton Skeleton::scaled(double s) const {
  std::vector<Joint> joints = joints_;
  for (Joint& j : joints) {
    j.offset *= s;
    if (j.end_site) *j.end_site *= s;
  }
  return Skeleton(std::move(joints));
}

bool operator==(const Skeleton& a, const Skeleton& b) {
  if (a.joints_.size() != b.joints_.size()) return false;
  for (std::size_t i = 0; i < a.joints_.size(); ++i) {
    const Joint& x = a.joints_[i];
    const Joint& y = b.joints_[i];
    if (x.name != y.name || x.parent != y.parent || x.offset != y.offset || x.channels != y.channels) {
      return false;
    }
    if (x.end_site.has_value() != y.end_site.has_value()) return false;
    if (x.end_site && *x.end_site != *y.end_site) return false;
  }
  return true;
}

MotionClip::MotionClip(Skeleton skeleton, double frame_time, Eigen::MatrixXd frames)
    : skeleton_(std::move(skeleton)), frame_time_(frame_time), frames_(std::move(frames)) {
  if (skeleton_.num_joints() == 0) throw InvalidArgument("clip skeleton is empty");
  if (!(frame_time_ > 0.0) || !std::isfinite(frame_time_)) throw InvalidArgument("frame time must be positive");
  if (frames_.rows() < 1) throw InvalidArgument("clip needs at least one frame");
  if (frames_.cols() != skeleton_.num_channels()) {
    throw InvalidArgument("clip has " + std::to_string(frames_.cols()) + " channels, skeleton declares " +
                          std::to_string(skeleton_.num_channels()));
  }
  if (!frames_.allFinite()) throw InvalidArgument("clip contains non-finite values");
}

bool operator==(const MotionClip& a, const MotionClip& b) {
  return a.frame_time_ == b.frame_time_ && a.skeleton_ == b.skeleton_ &&
         a.frames_.rows() == b.frames_.rows() && a.frames_ == b.frames_;
}

}  // namespace critter::motion
