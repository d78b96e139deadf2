#pragma once

#include <Eigen/Geometry>
#include <string>
#include <utility>
#include <vector>

#include "critter/avatar/mesh.hpp"
#include "critter/motion/skeleton.hpp"

namespace critter::avatar {

struct Influence {
  int joint = 0;
  double weight = 0.0;
};

/// A mesh bound to a skeleton. bind_pose[j] is joint j's world transform in
/// the rest pose.
///
/// Invariants: one bind matrix per joint; one influence list per vertex,
/// each with 1 to 4 entries, weights >= 0 summing to 1 within 1e-5, joints
/// in range.
struct RiggedMesh {
  Mesh mesh;
  motion::Skeleton rig;
  std::vector<Eigen::Matrix4d> bind_pose;
  std::vector<std::vector<Influence>> weights;

  void validate() const;
};

/// Rest-pose world transforms of every joint (pure translations).
std::vector<Eigen::Matrix4d> rest_bind_pose(const motion::Skeleton& skeleton);

/// Fits `template_rig` to the mesh's bounding box by a per-axis scale and
/// translation, then skins each vertex to its 4 nearest bones with
/// inverse-square distance weights. A joint's bones run to each child and
/// to its end site. A template axis of zero extent takes the mean scale of
/// the others. Throws InvalidArgument for an empty mesh or empty template
/// and Error for a mesh of zero extent.
RiggedMesh auto_rig(const Mesh& mesh, const motion::Skeleton& template_rig);

enum class UnmappedPolicy { kDrop, kInheritParent };

/// Source joint name -> target joint name.
struct JointMap {
  std::vector<std::pair<std::string, std::string>> pairs;
  UnmappedPolicy policy = UnmappedPolicy::kDrop;

  /// Every joint of `skeleton` to itself.
  static JointMap identity(const motion::Skeleton& skeleton, UnmappedPolicy policy = UnmappedPolicy::kDrop);
  /// Joints whose names appear in both skeletons.
  static JointMap by_name(const motion::Skeleton& source, const motion::Skeleton& target,
                          UnmappedPolicy policy = UnmappedPolicy::kDrop);

  /// Throws InvalidArgument when a source or target name repeats or a
  /// target name is missing from `target`.
  void validate(const motion::Skeleton& target) const;
};

/// Copies joint-local rotations from clip onto target.rig through the map.
///
/// Rotation channels are copied verbatim when source and target declare the
/// same axis order and converted through quaternions otherwise. Unmapped
/// target joints keep their bind rotation (zero channels). Under
/// kInheritParent an unmapped source joint's rotation is folded into its
/// nearest mapped ancestor. Root translation follows
///   p_t = s * (o_s + p_s) - o_t,   s = h_t / h_s,
/// with o the root offsets and h the rest root heights (Y). If either
/// height is zero the vertical rest extents of the skeletons are used. Frame
/// count and frame time are preserved.
motion::MotionClip retarget(const motion::MotionClip& clip, const JointMap& map, const RiggedMesh& target);

/// The root scale factor retarget() uses for this pair of skeletons.
double retarget_scale(const motion::Skeleton& source, const motion::Skeleton& target);

}  // namespace critter::avatar
