#include "critter/motion/kinematics.hpp"

#include "critter/motion/rotation.hpp"
#include "critter/util/error.hpp"

namespace critter::motion {

Pose forward_kinematics_pose(const Skeleton& skeleton, std::span<const double> frame) {
  if (static_cast<int>(frame.size()) != skeleton.num_channels()) {
    throw InvalidArgument("frame has " + std::to_string(frame.size()) + " values, skeleton expects " +
                          std::to_string(skeleton.num_channels()));
  }
  const int n = skeleton.num_joints();
  Pose pose;
  pose.positions.resize(static_cast<std::size_t>(n));
  pose.rotations.resize(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const Joint& jt = skeleton.joint(j);
    const Eigen::Vector3d local = jt.offset + joint_translation(skeleton, j, frame);
    const Eigen::Quaterniond rot = joint_rotation(skeleton, j, frame);
    const auto uj = static_cast<std::size_t>(j);
    if (jt.parent < 0) {
      pose.positions[uj] = local;
      pose.rotations[uj] = rot;
    } else {
      const auto up = static_cast<std::size_t>(jt.parent);
      pose.positions[uj] = pose.positions[up] + pose.rotations[up] * local;
      pose.rotations[uj] = pose.rotations[up] * rot;
    }
  }
  return pose;
}

std::vector<Eigen::Vector3d> forward_kinematics(const Skeleton& skeleton, std::span<const double> frame) {
  return forward_kinematics_pose(skeleton, frame).positions;
}

Eigen::MatrixXd world_positions(const MotionClip& clip) {
  const int j = clip.skeleton().num_joints();
  Eigen::MatrixXd out(clip.num_frames(), 3 * j);
  for (int f = 0; f < clip.num_frames(); ++f) {
    const Eigen::VectorXd row = clip.frame(f);
    const auto pos = forward_kinematics(clip.skeleton(), std::span(row.data(), static_cast<std::size_t>(row.size())));
    for (int k = 0; k < j; ++k) out.block<1, 3>(f, 3 * k) = pos[static_cast<std::size_t>(k)].transpose();
  }
  return out;
}

std::vector<Eigen::Vector3d> rest_positions(const Skeleton& skeleton) {
  const std::vector<double> zeros(static_cast<std::size_t>(skeleton.num_channels()), 0.0);
  return forward_kinematics(skeleton, zeros);
}

}  // namespace critter::motion
