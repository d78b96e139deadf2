// Acceptance driver: one PASS/FAIL line per criterion, each checked against
// an independent oracle and its runtime budget. Exit status is the number of
// failed criteria (capped at 1 for the shell).
//
//   critter_acceptance              run everything
//   critter_acceptance motion zoo   run criteria whose name contains a word

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "critter/avatar/body.hpp"
#include "critter/avatar/export.hpp"
#include "critter/avatar/rig.hpp"
#include "critter/gen/generator.hpp"
#include "critter/gen/nn.hpp"
#include "critter/gen/rvq.hpp"
#include "critter/metrics/metrics.hpp"
#include "critter/motion/bvh.hpp"
#include "critter/motion/features.hpp"
#include "critter/motion/kinematics.hpp"
#include "critter/net/chat.hpp"
#include "critter/pipeline/cli.hpp"
#include "critter/planner/evaluation.hpp"
#include "critter/planner/planner.hpp"
#include "critter/util/binary_io.hpp"
#include "critter/util/error.hpp"
#include "critter/util/rng.hpp"
#include "critter/zoogen/augment.hpp"
#include "critter/zoogen/caption.hpp"
#include "critter/zoogen/dataset.hpp"
#include "overfit.hpp"
#include "random_motion.hpp"
#include "toy_motion.hpp"

namespace fs = std::filesystem;
using namespace critter;
using motion::MotionClip;
using motion::Skeleton;

namespace {

// Collects failed expectations; only the first few are printed.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    if (failures_.size() < 4) failures_.push_back(what);
    ++count_;
  }
  void note(const std::string& s) { notes_.push_back(s); }
  bool ok() const { return count_ == 0; }
  std::string summary() const {
    std::string s;
    for (const auto& f : failures_) s += (s.empty() ? "" : "; ") + f;
    if (count_ > failures_.size()) s += "; +" + std::to_string(count_ - failures_.size()) + " more";
    return s;
  }
  const std::vector<std::string>& notes() const { return notes_; }

 private:
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
  std::size_t count_ = 0;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "critter_acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_gltf_validator(const fs::path& glb, std::string* log_text) {
  const fs::path log = fs::path(glb).concat(".log");
  const std::string cmd = "node \"" CRITTER_GLTF_VALIDATOR_DIR "/validate.js\" \"" + glb.string() + "\" > \"" +
                          log.string() + "\" 2>&1";
  const int rc = std::system(cmd.c_str());
  std::ifstream in(log);
  *log_text = std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return rc;
}

int validate_glb_bytes(const std::vector<std::uint8_t>& glb, const fs::path& path, std::string* log) {
  std::ofstream(path, std::ios::binary)
      .write(reinterpret_cast<const char*>(glb.data()), static_cast<std::streamsize>(glb.size()));
  return run_gltf_validator(path, log);
}

std::vector<fs::path> sample_files() {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(CRITTER_SAMPLES_DIR)) {
    if (e.path().extension() == ".bvh") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ------------------------------------------------------------------ planner

namespace cp = planner;

std::vector<cp::QARecord> listing_records() { return cp::load_qa_dataset(CRITTER_DATA_DIR "/qa/listing.json"); }

std::shared_ptr<net::ChatBackend> echo_backend(const std::vector<cp::QARecord>& records) {
  return std::make_shared<net::FunctionChatBackend>([records](const auto& messages) {
    for (const auto& r : records) {
      if (r.instruction == messages.back().content) return r.output;
    }
    throw TransportError("unknown instruction");
  });
}

// n verdicts of which `animal` and `motion` are correct.
cp::AccuracyReport report_from_counts(int n, int animal, int motion) {
  std::vector<cp::RecordVerdict> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto& r = v[static_cast<std::size_t>(i)];
    r.index = static_cast<std::size_t>(i);
    r.animal_correct = i < animal;
    r.motion_correct = i < motion;
  }
  return cp::AccuracyReport::from_verdicts(std::move(v));
}

void planner_arithmetic(Check& c) {
  struct Row {
    int animal, motion, overall;
  };
  // Table rows in hundredths of a percent.
  for (const Row row : {Row{9707, 7167, 8437}, Row{6930, 1919, 4424}}) {
    c.expect(cp::mean_hundredths(row.animal, row.motion) == row.overall,
             "mean_hundredths(" + std::to_string(row.animal) + ", " + std::to_string(row.motion) + ")");
    const auto rep = report_from_counts(10000, row.animal, row.motion);
    c.expect(rep.animal_acc == row.animal / 100.0, "animal " + fmt(rep.animal_acc));
    c.expect(rep.motion_acc == row.motion / 100.0, "motion " + fmt(rep.motion_acc));
    c.expect(rep.overall_acc == row.overall / 100.0, "overall " + fmt(rep.overall_acc));
    const auto pct = cp::AccuracyReport::from_percentages(row.animal / 100.0, row.motion / 100.0);
    c.expect(pct.overall_acc == row.overall / 100.0, "from_percentages overall " + fmt(pct.overall_acc));
  }
}

void planner_functional(Check& c) {
  const auto records = listing_records();
  c.expect(records.size() == 5, "listing has " + std::to_string(records.size()) + " records");
  const cp::Planner llm(cp::Taxonomy::builtin(), {}, echo_backend(records));
  const auto rep = cp::evaluate_planner(records, llm, 3);
  c.expect(rep.animal_acc == 100.0 && rep.motion_acc == 100.0 && rep.overall_acc == 100.0,
           "echo backend " + fmt(rep.animal_acc) + "/" + fmt(rep.motion_acc) + "/" + fmt(rep.overall_acc));

  const cp::Planner matcher(cp::Taxonomy::builtin());
  const std::set<std::pair<std::string, std::string>> must = {
      {"Monkey", "Attack"}, {"Chicken", "Walk Quick"}, {"Fox", "Walk Out"}, {"Rabbit", "Hop"}};
  std::set<std::pair<std::string, std::string>> found;
  for (const auto& r : records) {
    const auto [animal, motion] = cp::parse_planner_output(r.output);
    try {
      const auto d = matcher.plan(r.instruction);
      if (d.animal == animal && d.motion == motion) found.insert({animal, motion});
      if (!must.count({animal, motion})) c.note("matcher on " + animal + "/" + motion + " -> " + d.animal + "/" + d.motion);
    } catch (const Error& e) {
      // Reported, not crashed.
      c.note("matcher on " + animal + "/" + motion + " reported: " + e.what());
    }
  }
  for (const auto& p : must) c.expect(found.count(p) == 1, "matcher missed " + p.first + "/" + p.second);
  const auto alone = cp::evaluate_planner(records, matcher, 2);
  c.expect(alone.evaluated == 5, "matcher-only evaluation covered " + std::to_string(alone.evaluated));
  c.note("matcher-only " + fmt(alone.animal_acc) + "/" + fmt(alone.motion_acc) + "/" + fmt(alone.overall_acc));
}

void planner_properties(Check& c) {
  const auto tax = cp::Taxonomy::builtin();
  std::mt19937 gen(17);
  for (int i = 0; i < 1000; ++i) {
    const auto& a = tax.animals()[gen() % tax.animals().size()];
    const auto& m = tax.motions()[gen() % tax.motions().size()];
    c.expect(cp::parse_planner_output(cp::format_planner_output(a, m)) == std::make_pair(a, m),
             "closure failed on " + a + "/" + m);
  }
  const auto base = listing_records();
  std::vector<cp::QARecord> records;
  for (int i = 0; i < 80; ++i) {
    cp::QARecord r = base[gen() % base.size()];
    if (i % 3 == 0) r.output = cp::format_planner_output(tax.animals()[gen() % tax.animals().size()], "Idle");
    if (i % 11 == 0) r.output = "not a planner reply";
    records.push_back(r);
  }
  const cp::Planner planner(tax);
  const auto ref = cp::evaluate_planner(records, planner, 1);
  for (int k = 0; k < 10; ++k) {
    std::shuffle(records.begin(), records.end(), gen);
    const auto r = cp::evaluate_planner(records, planner, 1 + static_cast<std::size_t>(k % 4));
    c.expect(r.animal_acc == ref.animal_acc && r.motion_acc == ref.motion_acc && r.overall_acc == ref.overall_acc &&
                 r.evaluated == ref.evaluated,
             "permutation " + std::to_string(k) + " changed the report");
  }
}

// ------------------------------------------------------------------ metrics

Eigen::MatrixXd gaussian(int rows, int cols, Rng& rng, double mean = 0.0, double stddev = 1.0) {
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int k = 0; k < cols; ++k) m(r, k) = rng.normal(mean, stddev);
  }
  return m;
}

// Full sort of the pool; a distractor at the true distance ranks first.
int oracle_rank(const Eigen::MatrixXd& text, const Eigen::RowVectorXd& motion, const std::vector<int>& pool) {
  std::vector<std::pair<double, int>> order;
  for (std::size_t k = 0; k < pool.size(); ++k) {
    order.push_back({(text.row(pool[k]) - motion).norm(), k == 0 ? 1 : 0});
  }
  std::sort(order.begin(), order.end());
  for (std::size_t p = 0; p < order.size(); ++p) {
    if (order[p].second == 1) return static_cast<int>(p);
  }
  return -1;
}

// 2e points at mu +- s_k on each axis; sample covariance diag(2 s_k^2 / (2e - 1)).
Eigen::MatrixXd axis_cross(const Eigen::VectorXd& mu, const Eigen::VectorXd& s) {
  const auto e = mu.size();
  Eigen::MatrixXd m(2 * e, e);
  for (Eigen::Index k = 0; k < e; ++k) {
    m.row(2 * k) = mu.transpose();
    m.row(2 * k + 1) = mu.transpose();
    m(2 * k, k) += s[k];
    m(2 * k + 1, k) -= s[k];
  }
  return m;
}

void metric_oracles(Check& c) {
  Rng rng(2024);
  // R-precision against exhaustive ranking.
  for (int trial = 0; trial < 200; ++trial) {
    const int B = 2 + static_cast<int>(rng.below(39));
    const int e = 1 + static_cast<int>(rng.below(8));
    const int P = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(B)));
    const int k = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(P)));
    const std::uint64_t seed = rng.next();
    Eigen::MatrixXd text = gaussian(B, e, rng), motion = gaussian(B, e, rng);
    if (trial % 4 == 0) {
      // Integer grid: exact distance ties are common.
      text = text.array().round();
      motion = motion.array().round();
    }
    std::vector<std::vector<int>> pools;
    if (P == B) {
      // Every text is in the pool; no sampling involved.
      for (int i = 0; i < B; ++i) {
        std::vector<int> pool = {i};
        for (int j = 0; j < B; ++j) {
          if (j != i) pool.push_back(j);
        }
        pools.push_back(pool);
      }
    } else {
      pools = metrics::sample_pools(B, P, seed);
    }
    int hits = 0;
    for (int i = 0; i < B; ++i) hits += oracle_rank(text, motion.row(i), pools[static_cast<std::size_t>(i)]) < k;
    const double expected = static_cast<double>(hits) / B;
    const double got = metrics::r_precision(text, motion, k, P, seed);
    c.expect(got == expected, "r_precision trial " + std::to_string(trial) + ": " + fmt(got) + " vs " + fmt(expected));
  }

  // FID, one dimension, N(m1, s1) vs N(m2, s2): (m1-m2)^2 + (s1-s2)^2.
  struct Gauss {
    double ma, sa, mb, sb;
  };
  // Cases are chosen so the sampling error at 1e5 rows stays under 0.4% of
  // the value; the same formula on the sample moments must agree exactly.
  auto moments = [](const Eigen::MatrixXd& x) {
    const double mean = x.mean();
    return std::make_pair(mean, std::sqrt((x.array() - mean).square().sum() / static_cast<double>(x.rows() - 1)));
  };
  for (const Gauss g : {Gauss{0.0, 1.0, 4.0, 2.0}, Gauss{-1.0, 0.5, 1.5, 0.5}, Gauss{3.0, 2.0, -1.0, 1.0}}) {
    const double analytic = (g.ma - g.mb) * (g.ma - g.mb) + (g.sa - g.sb) * (g.sa - g.sb);
    const Eigen::MatrixXd a = gaussian(100000, 1, rng, g.ma, g.sa), b = gaussian(100000, 1, rng, g.mb, g.sb);
    const double got = metrics::fid(a, b);
    c.expect(std::abs(got - analytic) <= 0.02 * analytic, "1-D FID " + fmt(got) + " vs " + fmt(analytic));
    const auto [ma, sa] = moments(a);
    const auto [mb, sb] = moments(b);
    const double sample = (ma - mb) * (ma - mb) + (sa - sb) * (sa - sb);
    c.expect(std::abs(got - sample) <= 1e-9 * std::max(1.0, sample), "1-D FID " + fmt(got) + " vs sample moments " + fmt(sample));
  }
  // Diagonal closed form.
  for (int trial = 0; trial < 10; ++trial) {
    const int e = 1 + static_cast<int>(rng.below(8));
    Eigen::VectorXd mu_a(e), s_a(e), mu_b(e), s_b(e);
    for (int k = 0; k < e; ++k) {
      mu_a[k] = rng.uniform(-3, 3);
      mu_b[k] = rng.uniform(-3, 3);
      s_a[k] = rng.uniform(0.1, 4);
      s_b[k] = rng.uniform(0.1, 4);
    }
    double oracle = 0.0;
    for (int k = 0; k < e; ++k) {
      const double va = 2.0 * s_a[k] * s_a[k] / (2.0 * e - 1.0), vb = 2.0 * s_b[k] * s_b[k] / (2.0 * e - 1.0);
      oracle += (mu_a[k] - mu_b[k]) * (mu_a[k] - mu_b[k]) + va + vb - 2.0 * std::sqrt(va * vb);
    }
    const double got = metrics::fid(axis_cross(mu_a, s_a), axis_cross(mu_b, s_b));
    c.expect(std::abs(got - oracle) <= 1e-6, "diagonal FID " + fmt(got) + " vs " + fmt(oracle));
  }

  // Diversity on a two-point distribution: half the rows at +v, half at -v.
  {
    const int B = 200;
    Eigen::MatrixXd m(B, 3);
    const Eigen::RowVector3d v(1.2, -0.4, 1.5);
    for (int i = 0; i < B; ++i) m.row(i) = i % 2 == 0 ? v : Eigen::RowVector3d(-v);
    const double pairs = B * (B - 1) / 2.0;
    const double expectation = 2.0 * v.norm() * (B / 2.0) * (B / 2.0) / pairs;
    const double sampled = metrics::diversity(m, 15000, 99);
    c.expect(std::abs(sampled - expectation) <= 0.01 * expectation,
             "diversity " + fmt(sampled) + " vs expectation " + fmt(expectation));
    const double all = metrics::diversity(m, B * (B - 1) / 2, 5);
    c.expect(std::abs(all - expectation) <= 1e-12 * expectation, "exhaustive diversity " + fmt(all));
  }

  // Monotone curve.
  for (int trial = 0; trial < 100; ++trial) {
    const int B = 3 + static_cast<int>(rng.below(40));
    const int P = 3 + static_cast<int>(rng.below(static_cast<std::uint64_t>(B - 2)));
    const std::uint64_t seed = rng.next();
    const Eigen::MatrixXd t = gaussian(B, 4, rng), m = gaussian(B, 4, rng);
    const auto curve = metrics::r_precision_curve(t, m, 3, P, seed);
    c.expect(curve[0] <= curve[1] && curve[1] <= curve[2], "curve not monotone at trial " + std::to_string(trial));
    const double t1 = metrics::r_precision(t, m, 1, P, seed), t2 = metrics::r_precision(t, m, 2, P, seed),
                 t3 = metrics::r_precision(t, m, 3, P, seed);
    c.expect(t1 <= t2 && t2 <= t3, "top-k not monotone at trial " + std::to_string(trial));
  }
}

// ---------------------------------------------------------------------- rvq

using gen::Mat;

int oracle_nearest(const Mat& cb, const Eigen::RowVectorXd& x) {
  std::vector<std::pair<double, int>> d;
  for (int k = 0; k < cb.rows(); ++k) {
    double s = 0.0;
    for (int j = 0; j < cb.cols(); ++j) s += (cb(k, j) - x(j)) * (cb(k, j) - x(j));
    d.emplace_back(s, k);
  }
  std::stable_sort(d.begin(), d.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  return d.front().second;
}

// Residual layers reserve entry 0 as the zero vector.
gen::Codebooks random_codebooks(Rng& rng, int layers, int K, int d) {
  gen::Codebooks cbs;
  for (int v = 0; v < layers; ++v) {
    Mat cb = gen::random_normal(K, d, 1.0 / (1 + v), rng);
    if (v > 0) cb.row(0).setZero();
    cbs.push_back(cb);
  }
  return cbs;
}

void rvq_properties(Check& c) {
  Rng rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto cbs = random_codebooks(rng, 4, 8, 5);
    const auto q = gen::quantize_residual(gen::random_normal(1, 5, 2.0, rng), cbs);
    for (int v = 1; v < q.residual_norms.rows(); ++v) {
      c.expect(q.residual_norms(v, 0) <= q.residual_norms(v - 1, 0), "norm increased at trial " + std::to_string(trial));
    }
  }
  for (int trial = 0; trial < 100; ++trial) {
    const auto cbs = random_codebooks(rng, 3, 16, 4);  // base + V = 2 residual layers
    const Mat latent = gen::random_normal(8, 4, 1.0, rng);
    const auto q = gen::quantize_residual(latent, cbs);
    for (int i = 0; i < 8; ++i) {
      Eigen::RowVectorXd r = latent.row(i);
      for (int v = 0; v < 3; ++v) {
        const int k = oracle_nearest(cbs[static_cast<std::size_t>(v)], r);
        c.expect(q.grid.layers(v, i) == k, "index mismatch at trial " + std::to_string(trial));
        r -= cbs[static_cast<std::size_t>(v)].row(k);
      }
    }
  }

  // Four clusters, identity encoder: latent space is the data space.
  const auto spec = motion::to_features(fixtures::toy_walk(2)).spec;
  const int D = spec.dim();
  const Mat centers = gen::random_normal(4, D, 3.0, rng);
  std::vector<motion::FeatureMatrix> data;
  for (int k = 0; k < 40; ++k) {
    motion::FeatureMatrix fm{Mat(4, D), spec, {}, 1.0 / 30};
    for (int r = 0; r < 4; ++r) fm.data.row(r) = centers.row(rng.below(4)) + gen::random_normal(1, D, 0.1, rng);
    data.push_back(fm);
  }
  gen::RvqConfig cfg;
  cfg.codebook_size = 4;
  cfg.residual_layers = 0;
  cfg.latent_dim = D;
  cfg.downsample = 1;
  cfg.encoder = gen::EncoderKind::kIdentity;
  cfg.epochs = 200;
  cfg.seed = 2;
  const auto result = gen::train_rvq(data, cfg);
  const Eigen::RowVectorXd mean = centers.colwise().mean();
  const double inter = (centers.rowwise() - mean).squaredNorm() / (4.0 * D);
  c.expect(result.report.quant_mse < 0.1 * inter,
           "quant_mse " + fmt(result.report.quant_mse) + " vs 10% of " + fmt(inter));
  c.note("four-cluster quant_mse " + fmt(result.report.quant_mse) + ", inter-cluster variance " + fmt(inter));
}

// ---------------------------------------------------------------- generator

template <typename Forward>
double worst_relative_error(const std::vector<gen::Param*>& params, Forward loss, Rng& rng, int slices) {
  double worst = 0.0;
  for (int s = 0; s < slices; ++s) {
    gen::Param* p = params[rng.below(params.size())];
    const auto r = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(p->value.rows())));
    const auto k = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(p->value.cols())));
    const double h = 1e-5;
    const double orig = p->value(r, k);
    p->value(r, k) = orig + h;
    const double up = loss();
    p->value(r, k) = orig - h;
    const double down = loss();
    p->value(r, k) = orig;
    const double numeric = (up - down) / (2 * h);
    const double analytic = p->grad(r, k);
    worst = std::max(worst, std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), 1e-8}));
  }
  return worst;
}

gen::TransformerConfig tiny_transformer(int K, int V) {
  gen::TransformerConfig t;
  t.codebook_size = K;
  t.residual_layers = V;
  t.text_dim = 16;
  t.width = 16;
  t.layers = 1;
  t.heads = 2;
  t.ff = 32;
  t.max_len = 16;
  t.seed = 5;
  return t;
}

void generator_properties(Check& c) {
  Rng rng(41);
  {
    gen::TransformerBlock block("b", 8, 2, 16, 0.3, rng);
    std::vector<gen::Param*> params;
    block.collect(params);
    for (gen::Param* p : params) p->value += gen::random_normal(p->value.rows(), p->value.cols(), 0.1, rng);
    const Mat x = gen::random_normal(5, 8, 1.0, rng);
    const Mat R = gen::random_normal(5, 8, 1.0, rng);
    gen::TransformerBlock::Cache cache;
    block.forward(x, &cache);
    for (gen::Param* p : params) p->zero_grad();
    block.backward(R, cache);
    const double err = worst_relative_error(params, [&] { return block.forward(x).cwiseProduct(R).sum(); }, rng, 20);
    c.expect(err <= 1e-4, "transformer block relative error " + fmt(err));
    c.note("block gradient error " + fmt(err));
  }
  {
    const auto fm = motion::to_features(fixtures::toy_walk(8));
    gen::RvqConfig cfg;
    cfg.codebook_size = 4;
    cfg.latent_dim = 6;
    cfg.hidden = 12;
    cfg.downsample = 2;
    cfg.seed = 3;
    gen::RvqModel model(cfg, fm.spec, fm.frame_time);
    const Mat latent = gen::random_normal(4, 6, 1.0, rng);
    const Mat R = gen::random_normal(4, 2 * fm.spec.dim(), 1.0, rng);
    std::vector<gen::Param*> dec;
    for (gen::Param* p : model.parameters()) {
      if (p->name.rfind("dec", 0) == 0) dec.push_back(p);
    }
    c.expect(!dec.empty(), "decoder has no parameters");
    gen::RvqModel::DecoderCache cache;
    model.decode_rows(latent, &cache);
    for (gen::Param* p : dec) p->zero_grad();
    model.backward_decoder(R, cache);
    const double err =
        worst_relative_error(dec, [&] { return model.decode_rows(latent).cwiseProduct(R).sum(); }, rng, 20);
    c.expect(err <= 1e-4, "decoder relative error " + fmt(err));
    c.note("decoder gradient error " + fmt(err));
  }

  // Mask-count schedule: ceil(cos(pi t / 2L) n) masks after step t, none after L.
  const gen::GeneratorModel model(tiny_transformer(12, 2));
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(16));
    const int L = 1 + static_cast<int>(rng.below(12));
    const Eigen::VectorXd text = model.text_encoder().embed("prompt " + std::to_string(trial));
    gen::GenerationTrace trace;
    const auto out = gen::generate_base(model, text, n, gen::MaskSchedule{L}, 1.0, static_cast<std::uint64_t>(trial), &trace);
    c.expect(static_cast<int>(trace.masked_counts.size()) == L, "trace length");
    for (int t = 1; t <= L && t <= static_cast<int>(trace.masked_counts.size()); ++t) {
      const double ratio = t == L ? 0.0 : std::cos(std::numbers::pi * t / (2.0 * L));
      c.expect(trace.masked_counts[static_cast<std::size_t>(t - 1)] == static_cast<int>(std::ceil(ratio * n)),
               "mask count n=" + std::to_string(n) + " L=" + std::to_string(L) + " t=" + std::to_string(t));
    }
    c.expect(!trace.masked_counts.empty() && trace.masked_counts.back() == 0, "masks left after L iterations");
    c.expect(static_cast<int>(out.size()) == n, "output length");
    for (const int tok : out) c.expect(tok >= 0 && tok < 12, "token out of range");
  }

  const auto r = fixtures::overfit_one_sample();
  c.expect(r.mean_joint_error < 5e-2, "overfit mean joint error " + fmt(r.mean_joint_error));
  c.note("overfit mean joint error " + fmt(r.mean_joint_error) + ", masked accuracy " + fmt(r.masked_accuracy));
}

// ------------------------------------------------------------------- motion

// Structure exact, floats within tol.
void compare_clips(Check& c, const MotionClip& a, const MotionClip& b, double tol, const std::string& where) {
  const Skeleton& sa = a.skeleton();
  const Skeleton& sb = b.skeleton();
  bool same = sa.num_joints() == sb.num_joints() && a.num_frames() == b.num_frames();
  double worst = 0.0;
  for (int j = 0; same && j < sa.num_joints(); ++j) {
    const auto& ja = sa.joint(j);
    const auto& jb = sb.joint(j);
    same = ja.name == jb.name && ja.parent == jb.parent && ja.channels == jb.channels &&
           ja.end_site.has_value() == jb.end_site.has_value();
    if (!same) break;
    worst = std::max(worst, (ja.offset - jb.offset).cwiseAbs().maxCoeff());
    if (ja.end_site) worst = std::max(worst, (*ja.end_site - *jb.end_site).cwiseAbs().maxCoeff());
  }
  c.expect(same, where + ": structure differs");
  if (!same) return;
  worst = std::max(worst, std::abs(a.frame_time() - b.frame_time()));
  if (a.frames().size() > 0) worst = std::max(worst, (a.frames() - b.frames()).cwiseAbs().maxCoeff());
  c.expect(worst <= tol, where + ": float error " + fmt(worst));
}

void motion_data(Check& c) {
  const auto files = sample_files();
  c.expect(files.size() >= 4, "sample corpus has " + std::to_string(files.size()) + " files");
  for (const auto& f : files) {
    const MotionClip first = motion::load_bvh(f.string());
    const std::string text = motion::write_bvh(first);
    const MotionClip second = motion::parse_bvh(text);
    compare_clips(c, first, second, 1e-5, f.filename().string());
    c.expect(motion::write_bvh(second) == text, f.filename().string() + ": second write differs");
  }
  Rng rng(53);
  for (int i = 0; i < 500; ++i) {
    const MotionClip clip = fixtures::random_clip(rng);
    const std::string text = motion::write_bvh(clip);
    const MotionClip parsed = motion::parse_bvh(text);
    compare_clips(c, clip, parsed, 1e-5, "random clip " + std::to_string(i));
    c.expect(motion::write_bvh(parsed) == text, "random clip " + std::to_string(i) + ": second write differs");
  }
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const MotionClip clip = fixtures::random_clip(rng, {}, 3);
    for (int f = 0; f < clip.num_frames(); ++f) {
      const Eigen::VectorXd row = clip.frame(f);
      const auto fast =
          motion::forward_kinematics(clip.skeleton(), std::span(row.data(), static_cast<std::size_t>(row.size())));
      const auto slow = fixtures::matrix_fk(clip.skeleton(), row);
      for (std::size_t j = 0; j < fast.size(); ++j) worst = std::max(worst, (fast[j] - slow[j]).cwiseAbs().maxCoeff());
    }
  }
  c.expect(worst <= 1e-6, "FK error " + fmt(worst));
  c.note("FK worst error " + fmt(worst));
}

// ------------------------------------------------------------------- avatar

constexpr avatar::BodyPlan kPlans[] = {avatar::BodyPlan::kQuadruped, avatar::BodyPlan::kBiped,
                                       avatar::BodyPlan::kSerpent, avatar::BodyPlan::kWinged};

avatar::RiggedMesh bind_exact(const avatar::Mesh& mesh, const Skeleton& skeleton) {
  avatar::RiggedMesh r = avatar::auto_rig(mesh, skeleton);
  r.rig = skeleton;
  r.bind_pose = avatar::rest_bind_pose(skeleton);
  return r;
}

MotionClip wave_clip(const Skeleton& sk, int frames) {
  Eigen::MatrixXd m(frames, sk.num_channels());
  for (int f = 0; f < frames; ++f) {
    for (int k = 0; k < sk.num_channels(); ++k) m(f, k) = 15.0 * std::sin(0.2 * f + 0.7 * k);
  }
  return MotionClip(sk, 1.0 / 30.0, std::move(m));
}

void avatar_checks(Check& c) {
  const auto dir = scratch("avatar");
  std::vector<MotionClip> clips = {fixtures::toy_walk(40)};
  for (const auto plan : kPlans) {
    const std::string name(avatar::to_string(plan));
    const avatar::Mesh mesh = avatar::procedural_mesh(plan);
    const Skeleton rig = avatar::template_rig(plan);
    clips.push_back(wave_clip(rig, 30));

    const auto rigged = avatar::auto_rig(mesh, rig);
    c.expect(rigged.weights.size() == mesh.vertices.size(), name + ": weight count");
    double worst = 0.0;
    for (const auto& w : rigged.weights) {
      double sum = 0.0;
      for (const auto& inf : w) {
        c.expect(inf.weight >= 0.0, name + ": negative weight");
        sum += inf.weight;
      }
      c.expect(!w.empty() && w.size() <= 4, name + ": influence count");
      worst = std::max(worst, std::abs(sum - 1.0));
    }
    c.expect(worst <= 1e-5, name + ": partition of unity off by " + fmt(worst));

    std::string log;
    const int rc = validate_glb_bytes(avatar::export_glb(bind_exact(mesh, rig), wave_clip(rig, 24)), dir / (name + ".glb"), &log);
    c.expect(rc == 0, name + ".glb rejected by the validator: " + log.substr(0, 200));
  }
  {
    const auto rigged = avatar::auto_rig(avatar::procedural_mesh(avatar::BodyPlan::kQuadruped), fixtures::toy_quadruped());
    const MotionClip clip = avatar::retarget(fixtures::toy_walk(32), avatar::JointMap::identity(fixtures::toy_quadruped()), rigged);
    std::string log;
    c.expect(validate_glb_bytes(avatar::export_glb(rigged, clip), dir / "autorig.glb", &log) == 0,
             "auto-rigged glb rejected: " + log.substr(0, 200));
  }

  for (const MotionClip& clip : clips) {
    const Skeleton& sk = clip.skeleton();
    const auto map = avatar::JointMap::identity(sk);
    const MotionClip same = avatar::retarget(clip, map, bind_exact(avatar::procedural_mesh(kPlans[0]), sk));
    c.expect(same.skeleton() == sk && same.num_frames() == clip.num_frames(), "identity retarget changed shape");
    if (same.frames().rows() == clip.frames().rows()) {
      c.expect((same.frames() - clip.frames()).cwiseAbs().maxCoeff() <= 1e-6, "identity retarget moved channels");
    }
    for (const double s : {2.0, 0.37, 1.7}) {
      const MotionClip out = avatar::retarget(clip, map, bind_exact(avatar::procedural_mesh(kPlans[0]), sk.scaled(s)));
      if (out.frames().rows() != clip.frames().rows() || out.frames().cols() != clip.frames().cols()) {
        c.expect(false, "scaled retarget changed shape");
        continue;
      }
      const auto& root = sk.joint(0).channels;
      double rot_diff = 0.0, trans_err = 0.0;
      for (int f = 0; f < clip.num_frames(); ++f) {
        for (int k = 0; k < sk.num_channels(); ++k) {
          const bool root_pos = k < static_cast<int>(root.size()) && motion::is_position(root[static_cast<std::size_t>(k)]);
          if (root_pos) {
            trans_err = std::max(trans_err, std::abs(out.frames()(f, k) - s * clip.frames()(f, k)));
          } else {
            rot_diff = std::max(rot_diff, std::abs(out.frames()(f, k) - clip.frames()(f, k)));
          }
        }
      }
      c.expect(rot_diff == 0.0, "scale " + fmt(s) + ": rotations differ by " + fmt(rot_diff));
      c.expect(trans_err <= 1e-6, "scale " + fmt(s) + ": root translation error " + fmt(trans_err));
    }
  }
}

// --------------------------------------------------------------- end to end

void end_to_end(Check& c) {
  const auto dir = scratch("e2e");
  std::vector<std::string> bvh[2];
  for (int run = 0; run < 2; ++run) {
    const std::string name = "run" + std::to_string(run);
    const std::string out_dir = dir.string();
    const char* argv[] = {"critter", "--seed", "7", "gen", "a wolf runs forward", "--output-dir", out_dir.c_str(),
                          "--run-name", name.c_str()};
    std::ostringstream out, err;
    const auto t0 = std::chrono::steady_clock::now();
    const int rc = pipeline::cli_main(static_cast<int>(std::size(argv)), argv, out, err);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    c.expect(rc == pipeline::kExitOk, "gen exited " + std::to_string(rc) + ": " + err.str());
    c.expect(seconds < 60.0, "gen took " + fmt(seconds) + " s");
    c.note(name + " " + fmt(seconds) + " s");
    if (rc != pipeline::kExitOk) return;

    const fs::path run_dir = dir / name;
    std::string log;
    c.expect(run_gltf_validator(run_dir / "avatar.glb", &log) == 0, "avatar.glb rejected: " + log.substr(0, 200));
    for (const char* f : {"avatar.bvh", "motion.bvh"}) {
      const auto bytes = io::read_file_bytes((run_dir / f).string());
      bvh[run].emplace_back(bytes.begin(), bytes.end());
      try {
        const MotionClip clip = motion::parse_bvh(bvh[run].back());
        c.expect(clip.num_frames() > 0, std::string(f) + " has no frames");
      } catch (const Error& e) {
        c.expect(false, std::string(f) + " does not parse: " + e.what());
      }
    }
  }
  c.expect(bvh[0] == bvh[1], "BVH differs between runs with the same seed");
}

// ------------------------------------------------------------------- zoogen

void zoogen_checks(Check& c) {
  std::vector<zoogen::SourceClip> sources = {{"toy_a", "Fox", "Walk", fixtures::toy_walk(30)},
                                             {"toy_b", "Fox", "Run", fixtures::toy_walk(24, 1.0, 0.05)}};
  for (const auto& f : sample_files()) {
    MotionClip clip = motion::load_bvh(f.string());
    try {
      motion::to_features(clip);
    } catch (const InvalidArgument&) {
      continue;  // layouts without a feature encoding cannot be emitted
    }
    sources.push_back({f.stem().string(), "Wolf", "Walk", std::move(clip)});
  }
  for (const auto& s : sources) {
    const MotionClip twice = zoogen::augment(zoogen::augment(s.clip, zoogen::MirrorOp{}), zoogen::MirrorOp{});
    c.expect(twice == s.clip, s.id + ": mirror is not an involution");
    c.expect(zoogen::augment(s.clip, zoogen::TimeWarpOp{1.0}) == s.clip, s.id + ": time_warp(1) changed the clip");
  }

  zoogen::BuildOptions opt;
  opt.grid = {zoogen::MirrorOp{}, zoogen::TimeWarpOp{0.8}, zoogen::TimeWarpOp{1.25}, zoogen::JitterOp{1.0, 3},
              zoogen::CropOp{2, 12}, zoogen::SpliceOp{"toy_b", 3}};
  opt.budget = 8;
  const auto built = zoogen::build_records(sources, opt, zoogen::MockCaptionBackend{}, zoogen::MockRefineBackend{});
  zoogen::ReviewQueue q;
  for (const auto& r : built.records) q.add(r);
  for (const auto& r : built.records) q.review(r.id, zoogen::ReviewState::kApproved, "acceptance");
  const auto dir = scratch("zoogen");
  const auto manifest = zoogen::emit_dataset(q, built.clips, dir.string());
  c.expect(manifest.size() == built.records.size(), "emitted " + std::to_string(manifest.size()) + " of " +
                                                        std::to_string(built.records.size()));
  c.note(std::to_string(manifest.size()) + " records emitted");

  zoogen::AugmentContext library;
  for (const auto& s : sources) library.library.emplace(s.id, s.clip);
  const auto loaded = zoogen::load_dataset(dir.string());
  c.expect(loaded.size() == manifest.size(), "loaded " + std::to_string(loaded.size()) + " records");
  double worst = 0.0;
  for (const auto& rec : loaded) {
    const MotionClip& clip = built.clips.at(rec.entry.id);
    c.expect(zoogen::replay_lineage(rec.entry.lineage, library) == clip, rec.entry.id + ": replay differs");
    const auto expected = motion::to_features(clip);
    c.expect(rec.features.data.rows() == expected.data.rows() && rec.features.data.cols() == expected.data.cols(),
             rec.entry.id + ": feature shape");
    if (rec.features.data.rows() == expected.data.rows() && rec.features.data.cols() == expected.data.cols()) {
      worst = std::max(worst, (rec.features.data - expected.data).cwiseAbs().maxCoeff());
    }
    c.expect(rec.features.spec.skeleton.num_joints() == clip.skeleton().num_joints(), rec.entry.id + ": skeleton");
    c.expect(rec.entry.frames == clip.num_frames(), rec.entry.id + ": frame count");
    c.expect(std::abs(rec.entry.frame_time - clip.frame_time()) <= 1e-5, rec.entry.id + ": frame time");
  }
  c.expect(worst <= 1e-5, "manifest round trip error " + fmt(worst));
}

struct Criterion {
  std::string name;
  double budget_seconds;
  std::function<void(Check&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {"planner-arithmetic", 1.0, planner_arithmetic},
      {"planner-functional", 1.0, planner_functional},
      {"planner-properties", 30.0, planner_properties},
      {"metric-oracles", 60.0, metric_oracles},
      {"rvq-properties", 120.0, rvq_properties},
      {"generator-properties", 300.0, generator_properties},
      {"motion-data", 30.0, motion_data},
      {"avatar", 30.0, avatar_checks},
      {"end-to-end-smoke", 120.0, end_to_end},  // two runs, each under 60 s
      {"zoogen", 30.0, zoogen_checks},
  };
  std::vector<std::string> filters(argv + 1, argv + argc);
  int failed = 0, ran = 0;
  for (const auto& cr : criteria) {
    if (!filters.empty() && std::none_of(filters.begin(), filters.end(),
                                         [&](const std::string& f) { return cr.name.find(f) != std::string::npos; })) {
      continue;
    }
    ++ran;
    Check check;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      cr.run(check);
    } catch (const std::exception& e) {
      check.expect(false, std::string("threw: ") + e.what());
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    check.expect(seconds < cr.budget_seconds, "over budget");
    char timing[96];
    std::snprintf(timing, sizeof timing, "(%.2f s, budget %g s)", seconds, cr.budget_seconds);
    if (check.ok()) {
      std::cout << "PASS " << cr.name << ' ' << timing << '\n';
    } else {
      ++failed;
      std::cout << "FAIL " << cr.name << ' ' << timing << ": " << check.summary() << '\n';
    }
    for (const auto& n : check.notes()) std::cout << "     " << n << '\n';
    std::cout.flush();
  }
  std::cout << (ran - failed) << '/' << ran << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
