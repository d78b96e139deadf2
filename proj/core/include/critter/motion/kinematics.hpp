#pragma once

#include <Eigen/Geometry>
#include <span>
#include <vector>

#include "critter/motion/skeleton.hpp"

namespace critter::motion {

struct Pose {
  std::vector<Eigen::Vector3d> positions;
  std::vector<Eigen::Quaterniond> rotations;
};

/// World-space joint positions and orientations for one frame row.
Pose forward_kinematics_pose(const Skeleton& skeleton, std::span<const double> frame);

std::vector<Eigen::Vector3d> forward_kinematics(const Skeleton& skeleton, std::span<const double> frame);

/// N x 3J matrix of world joint positions, one row per frame.
Eigen::MatrixXd world_positions(const MotionClip& clip);

/// Rest-pose world positions (all channels zero).
std::vector<Eigen::Vector3d> rest_positions(const Skeleton& skeleton);

}  // namespace critter::motion
