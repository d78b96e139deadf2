#include "critter/zoogen/augment.hpp"

#include <cmath>
#include <cstdio>
#include <set>

#include "critter/motion/clip_ops.hpp"
#include "critter/util/error.hpp"
#include "critter/util/rng.hpp"

namespace critter::zoogen {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Swap of one token at the start or end of `name`, or empty.
std::string swapped(const std::string& name, const std::string& from, const std::string& to) {
  if (name.size() > from.size() && name.compare(0, from.size(), from) == 0) return to + name.substr(from.size());
  if (name.size() > from.size() && name.compare(name.size() - from.size(), from.size(), from) == 0) {
    return name.substr(0, name.size() - from.size()) + to;
  }
  return {};
}

motion::MotionClip mirror(const motion::MotionClip& clip, const MirrorPairing& pairing) {
  using motion::Channel;
  const auto& sk = clip.skeleton();
  const auto partner = mirror_partners(sk, pairing);
  Eigen::MatrixXd out(clip.num_frames(), sk.num_channels());
  for (int j = 0; j < sk.num_joints(); ++j) {
    const int p = partner[static_cast<std::size_t>(j)];
    const auto& dst = sk.joint(j).channels;
    const auto& src = sk.joint(p).channels;
    for (std::size_t a = 0; a < dst.size(); ++a) {
      std::size_t b = 0;
      while (b < src.size() && src[b] != dst[a]) ++b;
      if (b == src.size()) {
        throw InvalidArgument("mirror: joints '" + sk.joint(j).name + "' and '" + sk.joint(p).name +
                              "' declare different channels");
      }
      const bool flip = dst[a] == Channel::kXposition || dst[a] == Channel::kYrotation || dst[a] == Channel::kZrotation;
      const auto col = clip.frames().col(sk.channel_offset(p) + static_cast<int>(b));
      out.col(sk.channel_offset(j) + static_cast<int>(a)) = flip ? Eigen::VectorXd(-col) : Eigen::VectorXd(col);
    }
  }
  return motion::with_frames(clip, std::move(out));
}

motion::MotionClip time_warp(const motion::MotionClip& clip, double factor) {
  if (factor == 1.0) return clip;
  const motion::MotionClip r = motion::resample(clip, clip.frame_time() / factor);
  return motion::MotionClip(clip.skeleton(), clip.frame_time(), r.frames());
}

motion::MotionClip splice(const motion::MotionClip& a, const SpliceOp& op, const AugmentContext& ctx) {
  const auto it = ctx.library.find(op.other);
  if (it == ctx.library.end()) throw InvalidArgument("splice: unknown clip '" + op.other + "'");
  const motion::MotionClip& b = it->second;
  if (!(a.skeleton() == b.skeleton())) throw InvalidArgument("splice: skeleton mismatch with '" + op.other + "'");
  if (a.frame_time() != b.frame_time()) throw InvalidArgument("splice: frame time mismatch with '" + op.other + "'");
  const int k = op.blend_frames;
  const int na = a.num_frames(), nb = b.num_frames();
  if (k > na || k > nb) throw InvalidArgument("splice: blend longer than a clip");
  Eigen::MatrixXd out(na + nb - k, a.frames().cols());
  out.topRows(na - k) = a.frames().topRows(na - k);
  for (int i = 0; i < k; ++i) {
    const double t = static_cast<double>(i + 1) / (k + 1);
    out.row(na - k + i) = motion::interpolate_frames(a.skeleton(), a.frame(na - k + i), b.frame(i), t).transpose();
  }
  out.bottomRows(nb - k) = b.frames().bottomRows(nb - k);
  return motion::with_frames(a, std::move(out));
}

motion::MotionClip jitter(const motion::MotionClip& clip, const JitterOp& op) {
  const auto& sk = clip.skeleton();
  Rng rng(op.seed);
  Eigen::MatrixXd out = clip.frames();
  for (int f = 0; f < out.rows(); ++f) {
    for (int j = 0; j < sk.num_joints(); ++j) {
      const auto& ch = sk.joint(j).channels;
      for (std::size_t c = 0; c < ch.size(); ++c) {
        if (motion::is_rotation(ch[c])) out(f, sk.channel_offset(j) + static_cast<int>(c)) += op.sigma * rng.normal();
      }
    }
  }
  return motion::with_frames(clip, std::move(out));
}

}  // namespace

std::string signature(const AugmentOp& op) {
  return std::visit(Overloaded{
                        [](const MirrorOp&) { return std::string("mirror"); },
                        [](const TimeWarpOp& o) { return "time_warp(" + num(o.factor) + ")"; },
                        [](const CropOp& o) {
                          return "crop(" + std::to_string(o.start) + "," + std::to_string(o.end) + ")";
                        },
                        [](const SpliceOp& o) {
                          return "splice(" + o.other + "," + std::to_string(o.blend_frames) + ")";
                        },
                        [](const JitterOp& o) {
                          return "jitter(" + num(o.sigma) + ",seed=" + std::to_string(o.seed) + ")";
                        },
                    },
                    op);
}

std::string signature(const std::vector<AugmentOp>& ops) {
  std::string out;
  for (const auto& op : ops) {
    if (!out.empty()) out += " | ";
    out += signature(op);
  }
  return out.empty() ? "source" : out;
}

nlohmann::json op_to_json(const AugmentOp& op) {
  return std::visit(Overloaded{
                        [](const MirrorOp&) { return nlohmann::json{{"kind", "mirror"}}; },
                        [](const TimeWarpOp& o) { return nlohmann::json{{"kind", "time_warp"}, {"factor", o.factor}}; },
                        [](const CropOp& o) {
                          return nlohmann::json{{"kind", "crop"}, {"start", o.start}, {"end", o.end}};
                        },
                        [](const SpliceOp& o) {
                          return nlohmann::json{{"kind", "splice"}, {"other", o.other}, {"blend_frames", o.blend_frames}};
                        },
                        [](const JitterOp& o) {
                          return nlohmann::json{{"kind", "jitter"}, {"sigma", o.sigma}, {"seed", o.seed}};
                        },
                    },
                    op);
}

AugmentOp op_from_json(const nlohmann::json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "mirror") return MirrorOp{};
    if (kind == "time_warp") return TimeWarpOp{j.at("factor").get<double>()};
    if (kind == "crop") return CropOp{j.at("start").get<int>(), j.at("end").get<int>()};
    if (kind == "splice") return SpliceOp{j.at("other").get<std::string>(), j.value("blend_frames", 0)};
    if (kind == "jitter") return JitterOp{j.at("sigma").get<double>(), j.value<std::uint64_t>("seed", 0)};
    throw ParseError("unknown augment op kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("augment op: ") + e.what());
  }
}

void validate(const AugmentOp& op) {
  std::visit(Overloaded{
                 [](const MirrorOp&) {},
                 [](const TimeWarpOp& o) {
                   if (!(o.factor > 0.0) || !std::isfinite(o.factor)) throw InvalidArgument("time_warp factor must be > 0");
                 },
                 [](const CropOp& o) {
                   if (o.start < 0 || o.start >= o.end) throw InvalidArgument("crop needs 0 <= start < end");
                 },
                 [](const SpliceOp& o) {
                   if (o.blend_frames < 0) throw InvalidArgument("splice blend_frames must be >= 0");
                 },
                 [](const JitterOp& o) {
                   if (!(o.sigma >= 0.0) || !std::isfinite(o.sigma)) throw InvalidArgument("jitter sigma must be >= 0");
                 },
             },
             op);
}

std::vector<int> mirror_partners(const motion::Skeleton& skeleton, const MirrorPairing& pairing) {
  std::vector<int> partner(static_cast<std::size_t>(skeleton.num_joints()));
  for (int j = 0; j < skeleton.num_joints(); ++j) {
    partner[static_cast<std::size_t>(j)] = j;
    const std::string& name = skeleton.joint(j).name;
    for (const auto& [left, right] : pairing.tokens) {
      for (const auto& [from, to] : {std::pair{left, right}, std::pair{right, left}}) {
        const std::string other = swapped(name, from, to);
        if (other.empty()) continue;
        const int p = skeleton.find(other);
        if (p >= 0) {
          partner[static_cast<std::size_t>(j)] = p;
          goto next;
        }
      }
    }
  next:;
  }
  return partner;
}

motion::MotionClip augment(const motion::MotionClip& clip, const AugmentOp& op, const AugmentContext& ctx) {
  validate(op);
  return std::visit(Overloaded{
                        [&](const MirrorOp&) { return mirror(clip, ctx.pairing); },
                        [&](const TimeWarpOp& o) { return time_warp(clip, o.factor); },
                        [&](const CropOp& o) { return motion::crop(clip, o.start, o.end); },
                        [&](const SpliceOp& o) { return splice(clip, o, ctx); },
                        [&](const JitterOp& o) { return jitter(clip, o); },
                    },
                    op);
}

motion::MotionClip augment(const motion::MotionClip& clip, const std::vector<AugmentOp>& ops,
                           const AugmentContext& ctx) {
  motion::MotionClip out = clip;
  for (const auto& op : ops) out = augment(out, op, ctx);
  return out;
}

std::vector<Variant> enumerate_variants(const motion::MotionClip& clip, const std::vector<AugmentOp>& grid,
                                        std::size_t budget, const AugmentContext& ctx) {
  if (budget < 1) throw InvalidArgument("variant budget must be >= 1");
  std::vector<Variant> out;
  std::set<std::string> seen;
  auto offer = [&](std::vector<AugmentOp> ops) {
    if (out.size() >= budget || !seen.insert(signature(ops)).second) return;
    try {
      motion::MotionClip c = augment(clip, ops, ctx);
      out.push_back({std::move(ops), std::move(c)});
    } catch (const InvalidArgument&) {
      // The sequence does not fit this clip.
    }
  };
  for (const auto& op : grid) offer({op});
  for (const auto& a : grid) {
    for (const auto& b : grid) offer({a, b});
  }
  return out;
}

}  // namespace critter::zoogen
