#include "critter/avatar/body.hpp"

#include <cmath>
#include <numbers>
#include <optional>

#include "critter/motion/kinematics.hpp"
#include "critter/planner/taxonomy.hpp"
#include "critter/util/error.hpp"

namespace critter::avatar {

namespace {

enum class Part { kTorso, kLimb, kHead };

struct LayoutJoint {
  std::string name;
  int parent;
  Eigen::Vector3d offset;
  std::optional<Eigen::Vector3d> end;
  Part part;
  double radius;
};

using Layout = std::vector<LayoutJoint>;

// Appends a Left/Right pair of chains hanging off `parent`. `first` is the
// left-side offset of the first joint; the right side mirrors X.
void add_pair(Layout& l, int parent, const std::vector<std::string>& names, const Eigen::Vector3d& first,
              const std::vector<Eigen::Vector3d>& rest, const Eigen::Vector3d& end, double radius) {
  for (const double side : {1.0, -1.0}) {
    const std::string prefix = side > 0 ? "Left" : "Right";
    const Eigen::Vector3d mirror(side, 1.0, 1.0);
    int p = parent;
    for (std::size_t k = 0; k < names.size(); ++k) {
      const Eigen::Vector3d off = (k == 0 ? first : rest[k - 1]).cwiseProduct(mirror);
      std::optional<Eigen::Vector3d> e;
      if (k + 1 == names.size()) e = end.cwiseProduct(mirror);
      l.push_back({prefix + names[k], p, off, e, Part::kLimb, radius});
      p = static_cast<int>(l.size()) - 1;
    }
  }
}

Layout quadruped() {
  Layout l;
  l.push_back({"Hips", -1, {0, 0.6, 0}, std::nullopt, Part::kTorso, 0.14});
  l.push_back({"Spine", 0, {0, 0.02, 0.4}, std::nullopt, Part::kTorso, 0.13});
  l.push_back({"Neck", 1, {0, 0.12, 0.12}, std::nullopt, Part::kTorso, 0.07});
  l.push_back({"Head", 2, {0, 0.1, 0.08}, Eigen::Vector3d(0, 0, 0.16), Part::kHead, 0.1});
  add_pair(l, 1, {"Shoulder", "Elbow", "Hand"}, {0.1, -0.05, 0}, {{0, -0.27, 0}, {0, -0.25, 0}}, {0, -0.05, 0.03}, 0.04);
  add_pair(l, 0, {"Hip", "Knee", "Foot"}, {0.1, -0.05, -0.05}, {{0, -0.25, 0}, {0, -0.25, 0}}, {0, -0.05, 0.03}, 0.045);
  l.push_back({"Tail", 0, {0, 0.05, -0.15}, std::nullopt, Part::kLimb, 0.03});
  l.push_back({"TailTip", static_cast<int>(l.size()) - 1, {0, 0.02, -0.2}, Eigen::Vector3d(0, 0, -0.15), Part::kLimb, 0.02});
  return l;
}

Layout biped() {
  Layout l;
  l.push_back({"Hips", -1, {0, 1.0, 0}, std::nullopt, Part::kTorso, 0.13});
  l.push_back({"Spine", 0, {0, 0.2, 0}, std::nullopt, Part::kTorso, 0.13});
  l.push_back({"Chest", 1, {0, 0.2, 0}, std::nullopt, Part::kTorso, 0.12});
  l.push_back({"Neck", 2, {0, 0.2, 0}, std::nullopt, Part::kTorso, 0.05});
  l.push_back({"Head", 3, {0, 0.08, 0}, Eigen::Vector3d(0, 0.2, 0), Part::kHead, 0.11});
  add_pair(l, 2, {"Shoulder", "Arm", "ForeArm", "Hand"}, {0.08, 0.15, 0}, {{0.1, 0, 0}, {0, -0.28, 0}, {0, -0.25, 0}},
           {0, -0.08, 0}, 0.04);
  add_pair(l, 0, {"UpLeg", "Leg", "Foot"}, {0.1, -0.05, 0}, {{0, -0.42, 0}, {0, -0.43, 0}}, {0, -0.05, 0.12}, 0.055);
  return l;
}

Layout serpent() {
  Layout l;
  l.push_back({"Hips", -1, {0, 0.06, 0}, std::nullopt, Part::kTorso, 0.05});
  l.push_back({"Head", 0, {0, 0, 0.2}, Eigen::Vector3d(0, 0, 0.1), Part::kHead, 0.06});
  int p = 0;
  for (int k = 1; k <= 6; ++k) {
    std::optional<Eigen::Vector3d> e;
    if (k == 6) e = Eigen::Vector3d(0, 0, -0.12);
    l.push_back({"Body" + std::to_string(k), p, {0, 0, -0.15}, e, Part::kTorso, 0.05 - 0.005 * k});
    p = static_cast<int>(l.size()) - 1;
  }
  return l;
}

Layout winged() {
  Layout l;
  l.push_back({"Hips", -1, {0, 0.45, 0}, std::nullopt, Part::kTorso, 0.12});
  l.push_back({"Spine", 0, {0, 0.1, 0.12}, std::nullopt, Part::kTorso, 0.1});
  l.push_back({"Neck", 1, {0, 0.12, 0.08}, std::nullopt, Part::kTorso, 0.04});
  l.push_back({"Head", 2, {0, 0.1, 0.03}, Eigen::Vector3d(0, 0, 0.12), Part::kHead, 0.07});
  add_pair(l, 1, {"Wing", "WingMid", "WingTip"}, {0.1, 0.02, 0}, {{0.25, 0, -0.03}, {0.25, 0, -0.05}}, {0.12, 0, -0.04},
           0.03);
  add_pair(l, 0, {"UpLeg", "Leg", "Foot"}, {0.07, -0.05, 0}, {{0, -0.18, 0}, {0, -0.17, 0}}, {0, -0.05, 0.06}, 0.03);
  l.push_back({"Tail", 0, {0, 0.02, -0.12}, Eigen::Vector3d(0, 0, -0.18), Part::kLimb, 0.03});
  return l;
}

Layout layout_for(BodyPlan plan) {
  switch (plan) {
    case BodyPlan::kQuadruped:
      return quadruped();
    case BodyPlan::kBiped:
      return biped();
    case BodyPlan::kSerpent:
      return serpent();
    case BodyPlan::kWinged:
      return winged();
  }
  throw InvalidArgument("unknown body plan");
}

// Extent of the rest pose along its longest axis, joints and end sites.
double layout_extent(const Layout& l) {
  std::vector<Eigen::Vector3d> world(l.size());
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(1e300), hi = Eigen::Vector3d::Constant(-1e300);
  for (std::size_t i = 0; i < l.size(); ++i) {
    world[i] = (l[i].parent < 0 ? Eigen::Vector3d::Zero() : world[static_cast<std::size_t>(l[i].parent)]) + l[i].offset;
    lo = lo.cwiseMin(world[i]);
    hi = hi.cwiseMax(world[i]);
    if (l[i].end) {
      lo = lo.cwiseMin(world[i] + *l[i].end);
      hi = hi.cwiseMax(world[i] + *l[i].end);
    }
  }
  // Include the ground for standing plans.
  lo.y() = std::min(lo.y(), 0.0);
  return (hi - lo).maxCoeff();
}

motion::Skeleton build(const Layout& l, double scale) {
  using motion::Channel;
  const std::vector<Channel> rot = {Channel::kZrotation, Channel::kXrotation, Channel::kYrotation};
  std::vector<motion::Joint> joints;
  for (const auto& lj : l) {
    motion::Joint j;
    j.name = lj.name;
    j.parent = lj.parent;
    j.offset = lj.offset * scale;
    if (lj.end) j.end_site = *lj.end * scale;
    j.channels = rot;
    if (lj.parent < 0) j.channels.insert(j.channels.begin(), {Channel::kXposition, Channel::kYposition, Channel::kZposition});
    joints.push_back(std::move(j));
  }
  return motion::Skeleton(std::move(joints));
}

// Closed surface of revolution around the segment from `a` along unit axis
// `u`: a pole at s_begin, one ring per (s, radius), a pole at s_end.
Mesh lathe(const Eigen::Vector3d& a, const Eigen::Vector3d& u, double s_begin, double s_end,
           const std::vector<std::pair<double, double>>& rings, int segments) {
  Eigen::Vector3d e1 = std::abs(u.x()) < 0.9 ? u.cross(Eigen::Vector3d::UnitX()) : u.cross(Eigen::Vector3d::UnitY());
  e1.normalize();
  const Eigen::Vector3d e2 = u.cross(e1);
  Mesh m;
  m.vertices.push_back(a + s_begin * u);
  for (const auto& [s, r] : rings) {
    for (int k = 0; k < segments; ++k) {
      const double phi = 2.0 * std::numbers::pi * k / segments;
      m.vertices.push_back(a + s * u + r * (std::cos(phi) * e1 + std::sin(phi) * e2));
    }
  }
  m.vertices.push_back(a + s_end * u);
  const int last = static_cast<int>(m.vertices.size()) - 1;
  auto ring = [&](std::size_t i, int k) { return 1 + static_cast<int>(i) * segments + (k % segments); };
  for (int k = 0; k < segments; ++k) m.faces.push_back({0, ring(0, k + 1), ring(0, k)});
  for (std::size_t i = 0; i + 1 < rings.size(); ++i) {
    for (int k = 0; k < segments; ++k) {
      m.faces.push_back({ring(i, k), ring(i, k + 1), ring(i + 1, k + 1)});
      m.faces.push_back({ring(i, k), ring(i + 1, k + 1), ring(i + 1, k)});
    }
  }
  const std::size_t lr = rings.size() - 1;
  for (int k = 0; k < segments; ++k) m.faces.push_back({last, ring(lr, k), ring(lr, k + 1)});
  return m;
}

Mesh capsule(const Eigen::Vector3d& a, const Eigen::Vector3d& b, double r, int segments, int rings) {
  const Eigen::Vector3d d = b - a;
  const double len = d.norm();
  const Eigen::Vector3d u = d / len;
  std::vector<std::pair<double, double>> profile;
  for (int i = 1; i <= rings; ++i) {
    const double phi = (std::numbers::pi / 2) * i / rings;
    profile.emplace_back(-r * std::cos(phi), r * std::sin(phi));
  }
  for (int i = rings - 1; i >= 1; --i) {
    const double phi = (std::numbers::pi / 2) * i / rings;
    profile.emplace_back(len + r * std::cos(phi), r * std::sin(phi));
  }
  return lathe(a, u, -r, len + r, profile, segments);
}

Mesh cylinder(const Eigen::Vector3d& a, const Eigen::Vector3d& b, double r, int segments) {
  const Eigen::Vector3d d = b - a;
  const double len = d.norm();
  return lathe(a, d / len, 0.0, len, {{0.0, r}, {len, r}}, segments);
}

Mesh sphere(const Eigen::Vector3d& c, double r, int segments, int rings) {
  std::vector<std::pair<double, double>> profile;
  const int lat = 2 * rings;
  for (int i = 1; i < lat; ++i) {
    const double theta = std::numbers::pi * i / lat;
    profile.emplace_back(-r * std::cos(theta), r * std::sin(theta));
  }
  return lathe(c, Eigen::Vector3d::UnitY(), -r, r, profile, segments);
}

}  // namespace

std::string_view to_string(BodyPlan plan) {
  switch (plan) {
    case BodyPlan::kQuadruped:
      return "quadruped";
    case BodyPlan::kBiped:
      return "biped";
    case BodyPlan::kSerpent:
      return "serpent";
    case BodyPlan::kWinged:
      return "winged";
  }
  return "unknown";
}

BodyPlan body_plan_from_string(std::string_view name) {
  for (const auto p : {BodyPlan::kQuadruped, BodyPlan::kBiped, BodyPlan::kSerpent, BodyPlan::kWinged}) {
    if (to_string(p) == name) return p;
  }
  throw InvalidArgument("unknown body plan '" + std::string(name) + "'");
}

BodyPlan body_plan_for(std::string_view animal) {
  const std::string a = planner::normalize_text(animal);
  auto any = [&](std::initializer_list<const char*> words) {
    for (const char* w : words) {
      if (a.find(w) != std::string::npos) return true;
    }
    return false;
  };
  if (any({"snake", "python", "cobra", "viper", "anaconda", "serpent", "eel", "worm", "fish", "shark", "dolphin",
           "whale", "pirrana", "piranha"})) {
    return BodyPlan::kSerpent;
  }
  if (any({"bird", "eagle", "hawk", "crow", "raven", "parrot", "chicken", "duck", "goose", "swan", "owl", "flamingo",
           "ostrich", "penguin", "pigeon", "bat", "pteranodon", "pterosaur", "dragon", "wyvern", "bee", "butterfly",
           "fly"})) {
    // Komodo dragons walk on four legs.
    if (a.find("komodo") == std::string::npos) return BodyPlan::kWinged;
  }
  if (any({"monkey", "ape", "gorilla", "chimp", "orangutan", "human", "kangaroo", "trex", "raptor", "tyranno"})) {
    return BodyPlan::kBiped;
  }
  return BodyPlan::kQuadruped;
}

motion::Skeleton template_rig(BodyPlan plan, double height) {
  if (!(height > 0.0) || !std::isfinite(height)) throw InvalidArgument("rig height must be positive");
  const Layout l = layout_for(plan);
  return build(l, height / layout_extent(l));
}

Mesh procedural_mesh(BodyPlan plan, const ProceduralParams& p) {
  if (!(p.height > 0.0 && p.height <= 100.0)) throw InvalidArgument("procedural height must lie in (0, 100]");
  if (p.radial_segments < 3 || p.radial_segments > 64) throw InvalidArgument("radial_segments must lie in [3, 64]");
  if (p.rings < 2 || p.rings > 32) throw InvalidArgument("rings must lie in [2, 32]");
  if (!(p.thickness >= 0.25 && p.thickness <= 4.0)) throw InvalidArgument("thickness must lie in [0.25, 4]");
  const Layout l = layout_for(plan);
  const double scale = p.height / layout_extent(l);
  const motion::Skeleton sk = build(l, scale);
  const auto world = motion::rest_positions(sk);
  Mesh out;
  for (int j = 0; j < sk.num_joints(); ++j) {
    const auto& lj = l[static_cast<std::size_t>(j)];
    const double r = lj.radius * scale * p.thickness;
    std::vector<Eigen::Vector3d> tips;
    for (const int c : sk.children(j)) tips.push_back(world[static_cast<std::size_t>(c)]);
    if (sk.joint(j).end_site) tips.push_back(world[static_cast<std::size_t>(j)] + *sk.joint(j).end_site);
    for (const auto& tip : tips) {
      const Eigen::Vector3d& a = world[static_cast<std::size_t>(j)];
      if ((tip - a).norm() < 1e-9) continue;
      switch (lj.part) {
        case Part::kTorso:
          out.append(capsule(a, tip, r, p.radial_segments, p.rings));
          break;
        case Part::kLimb:
          out.append(cylinder(a, tip, r, p.radial_segments));
          break;
        case Part::kHead:
          out.append(sphere((a + tip) / 2.0, r, p.radial_segments, p.rings));
          break;
      }
    }
  }
  out.validate();
  return out;
}

}  // namespace critter::avatar
