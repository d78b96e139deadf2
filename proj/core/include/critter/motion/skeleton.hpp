#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace critter::motion {

enum class Channel : std::uint8_t {
  kXposition,
  kYposition,
  kZposition,
  kXrotation,
  kYrotation,
  kZrotation,
};

std::string_view channel_name(Channel c);
std::optional<Channel> channel_from_name(std::string_view name);

inline bool is_rotation(Channel c) { return c >= Channel::kXrotation; }
inline bool is_position(Channel c) { return c <= Channel::kZposition; }
/// 0, 1, 2 for X, Y, Z.
inline int channel_axis(Channel c) { return static_cast<int>(c) % 3; }

struct Joint {
  std::string name;
  int parent = -1;  // -1 for the root
  Eigen::Vector3d offset = Eigen::Vector3d::Zero();
  std::vector<Channel> channels;
  std::optional<Eigen::Vector3d> end_site;
};

/// Joint tree in topological order (every parent precedes its children).
///
/// Invariants, checked on construction: exactly one root at index 0, unique
/// joint names, finite offsets, no channel repeated within a joint.
class Skeleton {
 public:
  Skeleton() = default;
  explicit Skeleton(std::vector<Joint> joints);

  const std::vector<Joint>& joints() const { return joints_; }
  const Joint& joint(int index) const { return joints_[static_cast<std::size_t>(index)]; }
  int num_joints() const { return static_cast<int>(joints_.size()); }
  int num_channels() const { return num_channels_; }

  /// Column of the first channel of `joint` in a frame row.
  int channel_offset(int joint) const { return channel_offsets_[static_cast<std::size_t>(joint)]; }

  /// Index of the joint called `name`, or -1.
  int find(std::string_view name) const;

  std::vector<int> children(int joint) const;

  /// Joints in depth-first pre-order starting at the root.
  std::vector<int> depth_first_order() const;

  /// Same skeleton with every offset (including end sites) multiplied by s.
  Skeleton scaled(double s) const;

  friend bool operator==(const Skeleton& a, const Skeleton& b);

 private:
  std::vector<Joint> joints_;
  std::vector<int> channel_offsets_;
  int num_channels_ = 0;
};

/// Channel values over time for one skeleton.
///
/// Rotations are in degrees; translations are in the skeleton's length units.
/// Immutable after construction; the constructor enforces N >= 1, matching
/// channel count, positive frame time and finite values.
class MotionClip {
 public:
  MotionClip(Skeleton skeleton, double frame_time, Eigen::MatrixXd frames);

  const Skeleton& skeleton() const { return skeleton_; }
  double frame_time() const { return frame_time_; }
  const Eigen::MatrixXd& frames() const { return frames_; }
  int num_frames() const { return static_cast<int>(frames_.rows()); }
  Eigen::VectorXd frame(int i) const { return frames_.row(i).transpose(); }
  double duration() const { return frame_time_ * num_frames(); }

  /// Exact equality of skeleton, frame time and every channel value.
  friend bool operator==(const MotionClip& a, const MotionClip& b);

 private:
  Skeleton skeleton_;
  double frame_time_;
  Eigen::MatrixXd frames_;
};

}  // namespace critter::motion
