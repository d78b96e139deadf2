#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "critter/motion/skeleton.hpp"

namespace critter::zoogen {

/// Reflection across the sagittal (YZ) plane.
struct MirrorOp {};
/// New duration = factor * old duration at the same frame time.
struct TimeWarpOp {
  double factor = 1.0;
};
/// Frames [start, end).
struct CropOp {
  int start = 0;
  int end = 0;
};
/// Appends the clip registered as `other`, cross-fading over blend_frames.
struct SpliceOp {
  std::string other;
  int blend_frames = 0;
};
/// Gaussian noise (degrees) on every rotation channel.
struct JitterOp {
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

using AugmentOp = std::variant<MirrorOp, TimeWarpOp, CropOp, SpliceOp, JitterOp>;

/// Canonical text form, e.g. "time_warp(1.5)". Equal ops have equal
/// signatures and doubles print round-trippably.
std::string signature(const AugmentOp& op);
std::string signature(const std::vector<AugmentOp>& ops);

nlohmann::json op_to_json(const AugmentOp& op);
/// Throws ParseError for an unknown kind or missing field.
AugmentOp op_from_json(const nlohmann::json& j);

/// Throws InvalidArgument when factor <= 0, start < 0, start >= end,
/// blend_frames < 0 or sigma < 0.
void validate(const AugmentOp& op);

/// Left/right naming conventions. A joint pairs with the joint whose name
/// swaps one left token for the matching right token, as a prefix or a
/// suffix.
struct MirrorPairing {
  std::vector<std::pair<std::string, std::string>> tokens = {
      {"Left", "Right"}, {"left", "right"}, {"L_", "R_"}, {"_L", "_R"}, {".L", ".R"}, {"l_", "r_"}, {"_l", "_r"}};
};

/// Partner index of every joint (itself when unpaired).
std::vector<int> mirror_partners(const motion::Skeleton& skeleton, const MirrorPairing& pairing = {});

struct AugmentContext {
  std::map<std::string, motion::MotionClip> library;  // splice partners by id
  MirrorPairing pairing;
};

/// Applies one op. Mirror negates X translation and the Y and Z rotation
/// channels (the reflected rotation M R M with M = diag(-1, 1, 1)) and swaps
/// paired joints. Splice requires the same skeleton and frame time and
/// 0 <= blend_frames <= min(N_a, N_b); the result has N_a + N_b - blend
/// frames. Throws InvalidArgument when the op does not fit the clip.
motion::MotionClip augment(const motion::MotionClip& clip, const AugmentOp& op, const AugmentContext& context = {});
motion::MotionClip augment(const motion::MotionClip& clip, const std::vector<AugmentOp>& ops,
                           const AugmentContext& context = {});

struct Variant {
  std::vector<AugmentOp> ops;
  motion::MotionClip clip;
};

/// Every single op of the grid, then every ordered pair, in grid order,
/// deduplicated by signature and truncated to `budget`. Sequences that do not
/// fit the clip are skipped. Throws InvalidArgument when budget < 1.
std::vector<Variant> enumerate_variants(const motion::MotionClip& clip, const std::vector<AugmentOp>& grid,
                                        std::size_t budget, const AugmentContext& context = {});

}  // namespace critter::zoogen
