#include "critter/motion/rotation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "critter/util/error.hpp"

namespace critter::motion {

double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

namespace {

Eigen::Vector3d unit_axis(int axis) { return Eigen::Vector3d::Unit(axis); }

// +1 when (i, j, k) is an even permutation of (0, 1, 2).
double parity(const EulerOrder& o) { return ((o[1] - o[0] + 3) % 3 == 1) ? 1.0 : -1.0; }

}  // namespace

Eigen::Quaterniond quaternion_from_euler(const Eigen::Vector3d& degrees, const EulerOrder& order) {
  Eigen::Quaterniond q = Eigen::Quaterniond::Identity();
  for (int i = 0; i < 3; ++i) {
    q = q * Eigen::Quaterniond(Eigen::AngleAxisd(deg_to_rad(degrees[i]), unit_axis(order[i])));
  }
  return q;
}

Eigen::Vector3d euler_from_quaternion(const Eigen::Quaterniond& q, const EulerOrder& order) {
  const Eigen::Matrix3d r = q.normalized().toRotationMatrix();
  const int i = order[0];
  const int j = order[1];
  const int k = order[2];
  const double s = parity(order);
  const double sin_b = std::clamp(s * r(i, k), -1.0, 1.0);
  const double b = std::asin(sin_b);
  double a;
  double c;
  if (std::abs(sin_b) < 1.0 - 1e-12) {
    a = std::atan2(-s * r(j, k), r(k, k));
    c = std::atan2(-s * r(i, j), r(i, i));
  } else {
    // Gimbal lock: fold everything into the first angle.
    c = 0.0;
    const Eigen::Matrix3d m = r * Eigen::AngleAxisd(b, unit_axis(j)).toRotationMatrix().transpose();
    const int p = (i + 1) % 3;
    const int n = (i + 2) % 3;
    a = std::atan2(m(n, p), m(p, p));
  }
  Eigen::Vector3d out(rad_to_deg(a), rad_to_deg(b), rad_to_deg(c));
  for (int t = 0; t < 3; ++t) {
    if (out[t] <= -180.0) out[t] += 360.0;
  }
  return out;
}

Eigen::Quaterniond joint_rotation(const Skeleton& skeleton, int joint, std::span<const double> frame) {
  const Joint& jt = skeleton.joint(joint);
  const int base = skeleton.channel_offset(joint);
  Eigen::Quaterniond q = Eigen::Quaterniond::Identity();
  for (std::size_t c = 0; c < jt.channels.size(); ++c) {
    if (!is_rotation(jt.channels[c])) continue;
    const double angle = deg_to_rad(frame[static_cast<std::size_t>(base) + c]);
    q = q * Eigen::Quaterniond(Eigen::AngleAxisd(angle, unit_axis(channel_axis(jt.channels[c]))));
  }
  return q;
}

Eigen::Vector3d joint_translation(const Skeleton& skeleton, int joint, std::span<const double> frame) {
  const Joint& jt = skeleton.joint(joint);
  const int base = skeleton.channel_offset(joint);
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  for (std::size_t c = 0; c < jt.channels.size(); ++c) {
    if (is_position(jt.channels[c])) t[channel_axis(jt.channels[c])] += frame[static_cast<std::size_t>(base) + c];
  }
  return t;
}

std::vector<int> rotation_axes(const Skeleton& skeleton, int joint) {
  std::vector<int> axes;
  for (Channel c : skeleton.joint(joint).channels) {
    if (is_rotation(c)) axes.push_back(channel_axis(c));
  }
  return axes;
}

void set_joint_rotation(const Skeleton& skeleton, int joint, const Eigen::Quaterniond& q,
                        std::span<double> frame) {
  const Joint& jt = skeleton.joint(joint);
  const auto axes = rotation_axes(skeleton, joint);
  if (axes.size() != 3) {
    throw InvalidArgument("joint '" + jt.name + "' needs three rotation channels to hold an arbitrary rotation");
  }
  const Eigen::Vector3d angles = euler_from_quaternion(q, {axes[0], axes[1], axes[2]});
  const int base = skeleton.channel_offset(joint);
  int r = 0;
  for (std::size_t c = 0; c < jt.channels.size(); ++c) {
    if (is_rotation(jt.channels[c])) frame[static_cast<std::size_t>(base) + c] = angles[r++];
  }
}

Eigen::Matrix<double, 6, 1> rotation_to_6d(const Eigen::Quaterniond& q) {
  const Eigen::Matrix3d r = q.normalized().toRotationMatrix();
  Eigen::Matrix<double, 6, 1> v;
  v << r.col(0), r.col(1);
  return v;
}

Eigen::Quaterniond rotation_from_6d(const Eigen::Matrix<double, 6, 1>& v) {
  Eigen::Vector3d a = v.head<3>();
  Eigen::Vector3d b = v.tail<3>();
  if (a.norm() < 1e-12) a = Eigen::Vector3d::UnitX();
  a.normalize();
  b -= a.dot(b) * a;
  if (b.norm() < 1e-12) {
    b = a.unitOrthogonal();
  }
  b.normalize();
  Eigen::Matrix3d r;
  r.col(0) = a;
  r.col(1) = b;
  r.col(2) = a.cross(b);
  return Eigen::Quaterniond(r).normalized();
}

}  // namespace critter::motion
