#include "critter/zoogen/caption.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "critter/motion/kinematics.hpp"
#include "critter/util/error.hpp"

namespace critter::zoogen {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

}  // namespace

MotionStats compute_motion_stats(const motion::MotionClip& clip, motion::UpAxis up) {
  const int n = clip.num_frames();
  // Ground axes ordered so that (a, b, up) is right-handed.
  const bool y_up = up == motion::UpAxis::kY;
  const int ia = y_up ? 2 : 0, ib = y_up ? 0 : 1, iu = y_up ? 1 : 2;
  std::vector<Eigen::Vector2d> ground(static_cast<std::size_t>(n));
  MotionStats s;
  s.duration = clip.duration();
  double lo = 1e300, hi = -1e300;
  for (int f = 0; f < n; ++f) {
    const Eigen::VectorXd row = clip.frame(f);
    const Eigen::Vector3d p = motion::forward_kinematics(clip.skeleton(), {row.data(), static_cast<std::size_t>(row.size())})[0];
    ground[static_cast<std::size_t>(f)] = {p[ia], p[ib]};
    lo = std::min(lo, p[iu]);
    hi = std::max(hi, p[iu]);
  }
  s.height_range = hi - lo;
  std::vector<double> speed(static_cast<std::size_t>(std::max(n - 1, 0)));
  for (int f = 1; f < n; ++f) {
    const double d = (ground[static_cast<std::size_t>(f)] - ground[static_cast<std::size_t>(f - 1)]).norm();
    s.path_length += d;
    speed[static_cast<std::size_t>(f - 1)] = d / clip.frame_time();
    s.max_speed = std::max(s.max_speed, speed[static_cast<std::size_t>(f - 1)]);
  }
  s.net_displacement = (ground.back() - ground.front()).norm();
  s.mean_speed = s.path_length / s.duration;
  for (int k = 0; k < 4; ++k) {
    const std::size_t b = speed.size() * static_cast<std::size_t>(k) / 4, e = speed.size() * static_cast<std::size_t>(k + 1) / 4;
    double sum = 0.0;
    for (std::size_t i = b; i < e; ++i) sum += speed[i];
    s.speed_profile.push_back(e > b ? sum / static_cast<double>(e - b) : 0.0);
  }
  // Net turn of the travel direction, from the first to the last moving step.
  const double eps = 1e-9;
  int first = -1, last = -1;
  for (int f = 1; f < n; ++f) {
    if ((ground[static_cast<std::size_t>(f)] - ground[static_cast<std::size_t>(f - 1)]).norm() > eps) {
      if (first < 0) first = f;
      last = f;
    }
  }
  if (first >= 0) {
    double total = 0.0;
    Eigen::Vector2d prev = ground[static_cast<std::size_t>(first)] - ground[static_cast<std::size_t>(first - 1)];
    for (int f = first + 1; f <= last; ++f) {
      const Eigen::Vector2d d = ground[static_cast<std::size_t>(f)] - ground[static_cast<std::size_t>(f - 1)];
      if (d.norm() <= eps) continue;
      total += std::atan2(prev.x() * d.y() - prev.y() * d.x(), prev.dot(d));
      prev = d;
    }
    s.heading_change = total * 180.0 / std::numbers::pi;
  }
  return s;
}

std::string MockCaptionBackend::caption(const CaptionRequest& r) const {
  return "a " + r.animal + " performs " + r.motion + " for " + fixed(r.stats.duration, 1) + "s";
}

std::vector<net::ChatMessage> caption_messages(const CaptionRequest& r) {
  const auto& s = r.stats;
  std::string profile;
  for (const double v : s.speed_profile) profile += (profile.empty() ? "" : ", ") + fixed(v, 3);
  std::string user = "Animal: " + r.animal + "\nMotion: " + r.motion + "\nDuration: " + fixed(s.duration, 2) +
                     " s\nPath length: " + fixed(s.path_length, 3) + "\nNet displacement: " +
                     fixed(s.net_displacement, 3) + "\nMean speed: " + fixed(s.mean_speed, 3) +
                     " per s\nSpeed over four quarters: " + profile + "\nHeading change: " +
                     fixed(s.heading_change, 1) + " degrees\nRoot height range: " + fixed(s.height_range, 3) + "\n";
  return {{"system",
           "You write a one-paragraph description of an animal motion clip for a text-to-motion dataset. You are "
           "given category labels and statistics of the root trajectory rather than video. Describe what the "
           "animal does, how fast and in which direction it moves. Reply with the paragraph only."},
          {"user", user}};
}

std::string ChatCaptionBackend::caption(const CaptionRequest& r) const {
  std::string text = trim(chat_->complete(caption_messages(r)));
  if (text.empty()) throw ParseError("caption backend returned an empty reply");
  return text;
}

std::string caption_motion(const motion::MotionClip& clip, std::string_view animal, std::string_view motion,
                           const CaptionBackend& backend) {
  if (trim(animal).empty() || trim(motion).empty()) throw InvalidArgument("caption needs animal and motion categories");
  return backend.caption({std::string(animal), std::string(motion), compute_motion_stats(clip)});
}

std::string ChatRefineBackend::refine(std::string_view text) const {
  return chat_->complete({{"system",
                           "Rewrite the motion description concisely, keeping every fact about the animal and its "
                           "movement. Reply with the rewritten text only."},
                          {"user", std::string(text)}});
}

RefineResult refine_caption(std::string_view text, const RefineBackend& backend) {
  const std::string original = trim(text);
  if (original.empty()) throw InvalidArgument("refine_caption: empty text");
  std::string reply;
  try {
    reply = trim(backend.refine(original));
  } catch (const Error& e) {
    return {original, false, std::string("backend failed: ") + e.what()};
  }
  if (reply.empty()) return {original, false, "empty reply"};
  if (reply.size() > 2 * original.size()) return {original, false, "reply longer than twice the original"};
  return {reply, true, {}};
}

}  // namespace critter::zoogen
