#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "critter/avatar/rig.hpp"
#include "critter/motion/skeleton.hpp"

namespace critter::avatar {

enum class ExportFormat { kGltf, kBvh };

/// "gltf"/"glb" or "bvh"; throws InvalidArgument otherwise.
ExportFormat export_format_from_string(std::string_view name);

/// Binary glTF 2.0: one node per joint plus a skinned mesh node, inverse
/// bind matrices, and one LINEAR animation with a rotation channel per
/// rotating joint and a translation channel for a translating root. Keys sit
/// at i * frame_time plus a closing key at N * frame_time repeating the last
/// frame, so the animation lasts exactly the clip duration.
std::vector<std::uint8_t> export_glb(const RiggedMesh& rigged, const motion::MotionClip& clip);

/// BVH text of the clip on the rig.
std::vector<std::uint8_t> export_bvh(const RiggedMesh& rigged, const motion::MotionClip& clip);

/// Requires clip.skeleton() == rigged.rig (InvalidArgument: channel
/// mismatch).
std::vector<std::uint8_t> export_animated(const RiggedMesh& rigged, const motion::MotionClip& clip,
                                          ExportFormat format);

}  // namespace critter::avatar
