#include "critter/avatar/rig.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "critter/motion/kinematics.hpp"
#include "critter/motion/rotation.hpp"
#include "critter/util/error.hpp"

namespace critter::avatar {

namespace {

struct Segment {
  Eigen::Vector3d a, b;
};

double point_segment_sq(const Eigen::Vector3d& p, const Segment& s) {
  const Eigen::Vector3d d = s.b - s.a;
  const double len2 = d.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp((p - s.a).dot(d) / len2, 0.0, 1.0) : 0.0;
  return (s.a + t * d - p).squaredNorm();
}

// Lowest and highest rest-pose Y over joints and end sites.
double vertical_extent(const motion::Skeleton& sk) {
  const auto world = motion::rest_positions(sk);
  double lo = 1e300, hi = -1e300;
  for (int j = 0; j < sk.num_joints(); ++j) {
    const auto& p = world[static_cast<std::size_t>(j)];
    lo = std::min(lo, p.y());
    hi = std::max(hi, p.y());
    if (sk.joint(j).end_site) {
      const double y = p.y() + sk.joint(j).end_site->y();
      lo = std::min(lo, y);
      hi = std::max(hi, y);
    }
  }
  return hi - lo;
}

}  // namespace

void RiggedMesh::validate() const {
  mesh.validate();
  if (static_cast<int>(bind_pose.size()) != rig.num_joints()) throw InvalidArgument("bind pose size != joint count");
  if (weights.size() != mesh.vertices.size()) throw InvalidArgument("weights size != vertex count");
  for (std::size_t v = 0; v < weights.size(); ++v) {
    const auto& w = weights[v];
    if (w.empty() || w.size() > 4) throw InvalidArgument("vertex " + std::to_string(v) + " has " + std::to_string(w.size()) + " influences");
    double sum = 0.0;
    for (const auto& inf : w) {
      if (inf.joint < 0 || inf.joint >= rig.num_joints()) throw InvalidArgument("influence joint out of range");
      if (!(inf.weight >= 0.0)) throw InvalidArgument("negative skin weight");
      sum += inf.weight;
    }
    if (std::abs(sum - 1.0) > 1e-5) throw InvalidArgument("vertex " + std::to_string(v) + " weights sum to " + std::to_string(sum));
  }
}

std::vector<Eigen::Matrix4d> rest_bind_pose(const motion::Skeleton& skeleton) {
  const auto world = motion::rest_positions(skeleton);
  std::vector<Eigen::Matrix4d> out;
  for (const auto& p : world) {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.block<3, 1>(0, 3) = p;
    out.push_back(m);
  }
  return out;
}

RiggedMesh auto_rig(const Mesh& mesh, const motion::Skeleton& tmpl) {
  if (mesh.vertices.empty()) throw InvalidArgument("auto_rig: mesh has no vertices");
  if (tmpl.num_joints() == 0) throw InvalidArgument("auto_rig: template has no joints");
  mesh.validate();

  const auto [mlo, mhi] = mesh.bounds();
  const Eigen::Vector3d mext = mhi - mlo;
  if (mext.maxCoeff() <= 0.0) throw Error("auto_rig: mesh has zero extent");

  const auto rest = motion::rest_positions(tmpl);
  Eigen::Vector3d tlo = Eigen::Vector3d::Constant(1e300), thi = Eigen::Vector3d::Constant(-1e300);
  for (int j = 0; j < tmpl.num_joints(); ++j) {
    const auto& p = rest[static_cast<std::size_t>(j)];
    tlo = tlo.cwiseMin(p);
    thi = thi.cwiseMax(p);
    if (tmpl.joint(j).end_site) {
      tlo = tlo.cwiseMin(p + *tmpl.joint(j).end_site);
      thi = thi.cwiseMax(p + *tmpl.joint(j).end_site);
    }
  }
  const Eigen::Vector3d text = thi - tlo;
  Eigen::Vector3d scale;
  double sum = 0.0;
  int good = 0;
  for (int a = 0; a < 3; ++a) {
    if (text[a] > 1e-12 && mext[a] > 0.0) {
      scale[a] = mext[a] / text[a];
      sum += scale[a];
      ++good;
    } else {
      scale[a] = -1.0;
    }
  }
  // A single point template: scale by the mesh's largest side.
  const double fill = good > 0 ? sum / good : mext.maxCoeff();
  for (int a = 0; a < 3; ++a) {
    if (scale[a] < 0.0) scale[a] = fill;
  }
  // Map the template box onto the mesh box; degenerate axes stay centred.
  Eigen::Vector3d shift;
  for (int a = 0; a < 3; ++a) {
    shift[a] = text[a] > 1e-12 && mext[a] > 0.0 ? mlo[a] - scale[a] * tlo[a]
                                                 : 0.5 * (mlo[a] + mhi[a]) - scale[a] * 0.5 * (tlo[a] + thi[a]);
  }

  std::vector<motion::Joint> joints = tmpl.joints();
  for (auto& j : joints) {
    j.offset = j.offset.cwiseProduct(scale);
    if (j.parent < 0) j.offset += shift;
    if (j.end_site) j.end_site = j.end_site->cwiseProduct(scale);
  }
  RiggedMesh out;
  out.mesh = mesh;
  out.rig = motion::Skeleton(std::move(joints));
  out.bind_pose = rest_bind_pose(out.rig);

  const auto world = motion::rest_positions(out.rig);
  const int J = out.rig.num_joints();
  std::vector<std::vector<Segment>> bones(static_cast<std::size_t>(J));
  for (int j = 0; j < J; ++j) {
    const auto& p = world[static_cast<std::size_t>(j)];
    auto& list = bones[static_cast<std::size_t>(j)];
    for (const int c : out.rig.children(j)) list.push_back({p, world[static_cast<std::size_t>(c)]});
    if (out.rig.joint(j).end_site) list.push_back({p, p + *out.rig.joint(j).end_site});
    if (list.empty()) list.push_back({p, p});
  }

  out.weights.resize(mesh.vertices.size());
  std::vector<std::pair<double, int>> dist(static_cast<std::size_t>(J));
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    for (int j = 0; j < J; ++j) {
      double best = 1e300;
      for (const auto& s : bones[static_cast<std::size_t>(j)]) best = std::min(best, point_segment_sq(mesh.vertices[v], s));
      dist[static_cast<std::size_t>(j)] = {best, j};
    }
    const std::size_t k = std::min<std::size_t>(4, dist.size());
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    auto& w = out.weights[v];
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double inv = 1.0 / std::max(dist[i].first, 1e-12);
      w.push_back({dist[i].second, inv});
      total += inv;
    }
    for (auto& inf : w) inf.weight /= total;
  }
  return out;
}

JointMap JointMap::identity(const motion::Skeleton& skeleton, UnmappedPolicy policy) {
  JointMap m;
  m.policy = policy;
  for (const auto& j : skeleton.joints()) m.pairs.emplace_back(j.name, j.name);
  return m;
}

JointMap JointMap::by_name(const motion::Skeleton& source, const motion::Skeleton& target, UnmappedPolicy policy) {
  JointMap m;
  m.policy = policy;
  for (const auto& j : source.joints()) {
    if (target.find(j.name) >= 0) m.pairs.emplace_back(j.name, j.name);
  }
  return m;
}

void JointMap::validate(const motion::Skeleton& target) const {
  std::set<std::string> sources, targets;
  for (const auto& [s, t] : pairs) {
    if (!sources.insert(s).second) throw InvalidArgument("joint map lists source '" + s + "' twice");
    if (!targets.insert(t).second) throw InvalidArgument("joint map targets '" + t + "' twice");
    if (target.find(t) < 0) throw InvalidArgument("joint map target '" + t + "' is not in the target rig");
  }
}

double retarget_scale(const motion::Skeleton& source, const motion::Skeleton& target) {
  const double hs = source.joint(0).offset.y();
  const double ht = target.joint(0).offset.y();
  if (std::abs(hs) > 1e-9 && std::abs(ht) > 1e-9) return ht / hs;
  const double es = vertical_extent(source);
  const double et = vertical_extent(target);
  if (es > 1e-9 && et > 1e-9) return et / es;
  return 1.0;
}

motion::MotionClip retarget(const motion::MotionClip& clip, const JointMap& map, const RiggedMesh& target) {
  const motion::Skeleton& src = clip.skeleton();
  const motion::Skeleton& dst = target.rig;
  map.validate(dst);

  const int Js = src.num_joints();
  std::vector<int> to_target(static_cast<std::size_t>(Js), -1);
  for (const auto& [s, t] : map.pairs) {
    const int si = src.find(s);
    if (si < 0) throw InvalidArgument("retarget: clip skeleton has no joint '" + s + "'");
    to_target[static_cast<std::size_t>(si)] = dst.find(t);
  }

  // Under inherit-parent, each unmapped joint folds into its nearest mapped
  // ancestor; folds[a] lists those joints in topological order.
  std::vector<std::vector<int>> folds(static_cast<std::size_t>(Js));
  if (map.policy == UnmappedPolicy::kInheritParent) {
    for (int j = 0; j < Js; ++j) {
      if (to_target[static_cast<std::size_t>(j)] >= 0) continue;
      int a = src.joint(j).parent;
      while (a >= 0 && to_target[static_cast<std::size_t>(a)] < 0) a = src.joint(a).parent;
      if (a >= 0) folds[static_cast<std::size_t>(a)].push_back(j);
    }
  }

  const int N = clip.num_frames();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(N, dst.num_channels());
  const double s = retarget_scale(src, dst);
  const Eigen::Vector3d os = src.joint(0).offset;
  const Eigen::Vector3d ot = dst.joint(0).offset;

  for (int i = 0; i < N; ++i) {
    const Eigen::VectorXd in = clip.frame(i);
    const std::span<const double> row(in.data(), static_cast<std::size_t>(in.size()));
    Eigen::VectorXd res = Eigen::VectorXd::Zero(dst.num_channels());
    const std::span<double> orow(res.data(), static_cast<std::size_t>(res.size()));

    for (int j = 0; j < Js; ++j) {
      const int t = to_target[static_cast<std::size_t>(j)];
      if (t < 0) continue;
      const auto src_axes = motion::rotation_axes(src, j);
      const auto dst_axes = motion::rotation_axes(dst, t);
      const auto& fold = folds[static_cast<std::size_t>(j)];
      if (fold.empty() && src_axes == dst_axes) {
        // Same channel layout: copy values bit for bit.
        const auto& sch = src.joint(j).channels;
        const auto& dch = dst.joint(t).channels;
        for (std::size_t a = 0; a < sch.size(); ++a) {
          if (!motion::is_rotation(sch[a])) continue;
          for (std::size_t b = 0; b < dch.size(); ++b) {
            if (dch[b] == sch[a]) {
              orow[static_cast<std::size_t>(dst.channel_offset(t)) + b] =
                  row[static_cast<std::size_t>(src.channel_offset(j)) + a];
            }
          }
        }
        continue;
      }
      Eigen::Quaterniond q = motion::joint_rotation(src, j, row);
      for (const int u : fold) q = q * motion::joint_rotation(src, u, row);
      if (dst_axes.empty()) continue;
      if (dst_axes.size() != 3) {
        throw InvalidArgument("retarget: target joint '" + dst.joint(t).name + "' has a partial rotation channel set");
      }
      motion::set_joint_rotation(dst, t, q.normalized(), orow);
    }

    const Eigen::Vector3d ps = motion::joint_translation(src, 0, row);
    const Eigen::Vector3d pt = s * (os + ps) - ot;
    const auto& rch = dst.joint(0).channels;
    for (std::size_t b = 0; b < rch.size(); ++b) {
      if (motion::is_position(rch[b])) {
        orow[static_cast<std::size_t>(dst.channel_offset(0)) + b] = pt[motion::channel_axis(rch[b])];
      }
    }
    out.row(i) = res.transpose();
  }
  return motion::MotionClip(dst, clip.frame_time(), std::move(out));
}

}  // namespace critter::avatar
