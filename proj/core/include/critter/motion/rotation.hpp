#pragma once

#include <Eigen/Geometry>
#include <array>
#include <span>

#include "critter/motion/skeleton.hpp"

namespace critter::motion {

/// Axis indices of a joint's rotation channels in declaration order.
using EulerOrder = std::array<int, 3>;

double deg_to_rad(double deg);
double rad_to_deg(double rad);

/// R = R_{order[0]}(a0) * R_{order[1]}(a1) * R_{order[2]}(a2), angles in degrees.
Eigen::Quaterniond quaternion_from_euler(const Eigen::Vector3d& degrees, const EulerOrder& order);

/// Inverse of quaternion_from_euler for distinct axes. First and last angles
/// lie in (-180, 180], the middle one in [-90, 90]. In gimbal lock the last
/// angle is set to zero.
Eigen::Vector3d euler_from_quaternion(const Eigen::Quaterniond& q, const EulerOrder& order);

/// Local rotation of `joint` for a frame row, composed in channel order.
/// Joints without rotation channels yield identity.
Eigen::Quaterniond joint_rotation(const Skeleton& skeleton, int joint, std::span<const double> frame);

/// Local translation from position channels (zero if the joint has none).
Eigen::Vector3d joint_translation(const Skeleton& skeleton, int joint, std::span<const double> frame);

/// Rotation channel axes of `joint` in declaration order (empty if none).
std::vector<int> rotation_axes(const Skeleton& skeleton, int joint);

/// Writes the Euler decomposition of q into the joint's rotation channels of
/// `frame`. Requires three distinct rotation channels.
void set_joint_rotation(const Skeleton& skeleton, int joint, const Eigen::Quaterniond& q,
                        std::span<double> frame);

/// 6D continuous rotation: the first two columns of the rotation matrix.
Eigen::Matrix<double, 6, 1> rotation_to_6d(const Eigen::Quaterniond& q);
/// Gram-Schmidt projection back onto SO(3).
Eigen::Quaterniond rotation_from_6d(const Eigen::Matrix<double, 6, 1>& v);

}  // namespace critter::motion
