#include "critter/motion/clip_ops.hpp"

#include <cmath>

#include "critter/motion/rotation.hpp"
#include "critter/util/error.hpp"

namespace critter::motion {

Eigen::VectorXd interpolate_frames(const Skeleton& sk, const Eigen::VectorXd& a, const Eigen::VectorXd& b, double t) {
  Eigen::VectorXd out = (1.0 - t) * a + t * b;
  const std::span<const double> fa(a.data(), static_cast<std::size_t>(a.size()));
  const std::span<const double> fb(b.data(), static_cast<std::size_t>(b.size()));
  const std::span<double> fo(out.data(), static_cast<std::size_t>(out.size()));
  for (int j = 0; j < sk.num_joints(); ++j) {
    if (rotation_axes(sk, j).size() != 3) continue;
    const Eigen::Quaterniond qa = joint_rotation(sk, j, fa);
    const Eigen::Quaterniond qb = joint_rotation(sk, j, fb);
    set_joint_rotation(sk, j, qa.slerp(t, qb), fo);
  }
  return out;
}

MotionClip resample(const MotionClip& clip, double new_frame_time) {
  if (!(new_frame_time > 0.0) || !std::isfinite(new_frame_time)) throw InvalidArgument("frame time must be positive");
  if (new_frame_time == clip.frame_time()) return clip;
  const int n = clip.num_frames();
  const double span = (n - 1) * clip.frame_time();
  const int out_frames = static_cast<int>(std::floor(span / new_frame_time + 1e-9)) + 1;
  Eigen::MatrixXd frames(out_frames, clip.frames().cols());
  for (int i = 0; i < out_frames; ++i) {
    const double u = i * new_frame_time / clip.frame_time();
    int k = static_cast<int>(std::floor(u + 1e-9));
    double frac = u - k;
    if (k >= n - 1) {
      k = n - 1;
      frac = 0.0;
    }
    if (std::abs(frac) < 1e-9) {
      frames.row(i) = clip.frames().row(k);
    } else {
      frames.row(i) = interpolate_frames(clip.skeleton(), clip.frame(k), clip.frame(k + 1), frac).transpose();
    }
  }
  return MotionClip(clip.skeleton(), new_frame_time, std::move(frames));
}

MotionClip crop(const MotionClip& clip, int start, int end) {
  if (start < 0 || end > clip.num_frames() || start >= end) {
    throw InvalidArgument("crop range [" + std::to_string(start) + ", " + std::to_string(end) +
                          ") is empty or outside [0, " + std::to_string(clip.num_frames()) + ")");
  }
  return MotionClip(clip.skeleton(), clip.frame_time(), clip.frames().middleRows(start, end - start));
}

MotionClip with_frames(const MotionClip& clip, Eigen::MatrixXd frames) {
  return MotionClip(clip.skeleton(), clip.frame_time(), std::move(frames));
}

}  // namespace critter::motion
