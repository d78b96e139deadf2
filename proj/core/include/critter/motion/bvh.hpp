#pragma once

#include <string>
#include <string_view>

#include "critter/motion/skeleton.hpp"

namespace critter::motion {

/// Parses a Biovision Hierarchy document. Throws ParseError with line and
/// column on malformed input, channel-count mismatches, non-numeric values and
/// frame-count disagreement with the "Frames:" header.
MotionClip parse_bvh(std::string_view text);

MotionClip load_bvh(const std::string& path);

/// Serializes a clip. Values are written with six decimals, frame time with
/// seven. Joints are emitted depth-first; frame columns follow that order.
std::string write_bvh(const MotionClip& clip);

/// Overload checking that `skeleton` equals the clip's skeleton.
std::string write_bvh(const Skeleton& skeleton, const MotionClip& clip);

}  // namespace critter::motion
