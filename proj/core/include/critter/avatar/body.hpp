#pragma once

#include <string>
#include <string_view>

#include "critter/avatar/mesh.hpp"
#include "critter/motion/skeleton.hpp"

namespace critter::avatar {

enum class BodyPlan { kQuadruped, kBiped, kSerpent, kWinged };

std::string_view to_string(BodyPlan plan);
/// Throws InvalidArgument for an unknown name.
BodyPlan body_plan_from_string(std::string_view name);

/// Coarse body plan of an animal category (quadruped when unknown).
BodyPlan body_plan_for(std::string_view animal);

/// Y-up, +Z forward rest skeleton for a plan, about `height` units tall (or
/// long, for serpents). Limbs are named Left*/Right*. The root carries
/// position + ZXY rotation channels, every other joint ZXY rotations.
motion::Skeleton template_rig(BodyPlan plan, double height = 1.0);

struct ProceduralParams {
  double height = 1.0;     // (0, 100]
  int radial_segments = 12;  // [3, 64]
  int rings = 6;             // [2, 32], latitude rings per cap or sphere
  double thickness = 1.0;  // [0.25, 4], multiplies every radius
};

/// Closed body built from the template rig: a capsule per torso bone, a
/// capped cylinder per limb bone and a sphere for the head. Each primitive is
/// a separate closed genus-0 component. Throws InvalidArgument for params
/// outside their ranges.
Mesh procedural_mesh(BodyPlan plan, const ProceduralParams& params = {});

}  // namespace critter::avatar
