#pragma once

#include "critter/motion/skeleton.hpp"

namespace critter::motion {

/// Blend of two frame rows: slerp on three-channel rotations, linear on
/// everything else. t = 0 gives `a`, t = 1 gives `b`.
Eigen::VectorXd interpolate_frames(const Skeleton& skeleton, const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                                   double t);

/// Resamples to a new frame spacing over the same time span. Rotations are
/// interpolated per joint with quaternion slerp, translations linearly.
/// Samples that land on an existing frame copy it verbatim.
MotionClip resample(const MotionClip& clip, double new_frame_time);

/// Frames [start, end). Requires 0 <= start < end <= N.
MotionClip crop(const MotionClip& clip, int start, int end);

/// Copy with every channel value replaced; shape must match.
MotionClip with_frames(const MotionClip& clip, Eigen::MatrixXd frames);

}  // namespace critter::motion
