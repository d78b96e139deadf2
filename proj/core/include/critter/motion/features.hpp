#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <vector>
#include <string>

#include "critter/motion/skeleton.hpp"

namespace critter::motion {

enum class UpAxis : std::uint8_t { kY = 1, kZ = 2 };

/// Layout of a feature row for a skeleton with J joints:
///
///   [0, 2)        root linear velocity in the heading frame (ground plane)
///   [2]           root heading angular velocity (radians per frame)
///   [3]           root height
///   [4, 4+6J)     per-joint local rotation, 6D continuous representation
///   [4+6J, 4+9J)  per-joint position relative to the root ground point,
///                 expressed in the heading frame
///
/// Velocities of frame 0 are zero. The root's 6D block carries its rotation
/// with the heading removed.
struct FeatureSpec {
  Skeleton skeleton;
  UpAxis up = UpAxis::kY;

  int num_joints() const { return skeleton.num_joints(); }
  int dim() const { return 4 + 9 * num_joints(); }
  int rotation_column(int joint) const { return 4 + 6 * joint; }
  int position_column(int joint) const { return 4 + 6 * num_joints() + 3 * joint; }
};

/// Initial ground position and heading of the root, which the feature rows do
/// not carry. Zero places the reconstruction at the origin facing forward.
struct RootAnchor {
  double ground_a = 0.0;
  double ground_b = 0.0;
  double heading = 0.0;
};

struct FeatureMatrix {
  Eigen::MatrixXd data;  // N x D
  FeatureSpec spec;
  RootAnchor anchor;
  double frame_time = 1.0 / 30.0;

  int num_frames() const { return static_cast<int>(data.rows()); }
};

/// Throws InvalidArgument when a joint has 1 or 2 rotation channels or a
/// non-root joint has position channels.
void check_feature_layout(const Skeleton& skeleton);

FeatureMatrix to_features(const MotionClip& clip, const FeatureSpec& spec);
FeatureMatrix to_features(const MotionClip& clip);

MotionClip from_features(const FeatureMatrix& features);

/// MAFM file: "MAFM", u32 version, u32 N, u32 D, N*D little-endian float32.
void write_feature_file(const std::string& path, const Eigen::MatrixXd& data);
std::vector<std::uint8_t> encode_feature_file(const Eigen::MatrixXd& data);
Eigen::MatrixXd decode_feature_file(std::span<const std::uint8_t> bytes);
Eigen::MatrixXd read_feature_file(const std::string& path);

}  // namespace critter::motion
