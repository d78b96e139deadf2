#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "critter/avatar/body.hpp"
#include "critter/metrics/metrics.hpp"
#include "critter/metrics/report.hpp"
#include "critter/metrics/space.hpp"
#include "critter/util/error.hpp"
#include "critter/util/rng.hpp"
#include "toy_motion.hpp"

namespace critter {
namespace {

using namespace metrics;

Eigen::MatrixXd gaussian(int rows, int cols, Rng& rng, double mean = 0.0, double stddev = 1.0) {
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = rng.normal(mean, stddev);
  }
  return m;
}

// Full sort of a pool by distance; equal distances place the true text last.
int oracle_rank(const Eigen::MatrixXd& text, const Eigen::RowVectorXd& motion, const std::vector<int>& pool) {
  std::vector<std::pair<double, int>> order;
  for (std::size_t c = 0; c < pool.size(); ++c) {
    order.push_back({(text.row(pool[c]) - motion).norm(), c == 0 ? 1 : 0});
  }
  std::sort(order.begin(), order.end());
  for (std::size_t p = 0; p < order.size(); ++p) {
    if (order[p].second == 1) return static_cast<int>(p);
  }
  return -1;
}

// --- R-precision

TEST(RPrecision, PerfectEvaluatorScoresOne) {
  Rng rng(1);
  const Eigen::MatrixXd e = gaussian(40, 8, rng, 0.0, 10.0);
  EXPECT_DOUBLE_EQ(r_precision(e, e, 1, 32, 7), 1.0);
}

TEST(RPrecision, FullPoolRankAlwaysHits) {
  Rng rng(2);
  const Eigen::MatrixXd t = gaussian(20, 4, rng), m = gaussian(20, 4, rng);
  for (int p : {1, 3, 8, 20}) EXPECT_DOUBLE_EQ(r_precision(t, m, p, p, 11), 1.0) << p;
}

TEST(RPrecision, PoolsAreDistinctAndSeeded) {
  const auto pools = sample_pools(8, 4, 5);
  ASSERT_EQ(pools.size(), 8u);
  for (int i = 0; i < 8; ++i) {
    const auto& pool = pools[static_cast<std::size_t>(i)];
    ASSERT_EQ(pool.size(), 4u);
    EXPECT_EQ(pool[0], i);
    EXPECT_EQ(std::set<int>(pool.begin(), pool.end()).size(), 4u);
    for (int c : pool) EXPECT_TRUE(c >= 0 && c < 8);
  }
  EXPECT_EQ(pools, sample_pools(8, 4, 5));
  EXPECT_NE(pools, sample_pools(8, 4, 6));
}

TEST(RPrecision, MatchesBruteForceRanking) {
  Rng rng(3);
  const Eigen::MatrixXd t = gaussian(8, 3, rng), m = gaussian(8, 3, rng);
  const auto pools = sample_pools(8, 4, 42);
  for (int k = 1; k <= 4; ++k) {
    int hits = 0;
    for (int i = 0; i < 8; ++i) hits += oracle_rank(t, m.row(i), pools[static_cast<std::size_t>(i)]) < k;
    EXPECT_DOUBLE_EQ(r_precision(t, m, k, 4, 42), hits / 8.0) << "k=" << k;
  }
}

TEST(RPrecision, FullPoolMatchesExhaustiveOracleWithoutSampling) {
  Rng rng(4);
  const Eigen::MatrixXd t = gaussian(8, 3, rng), m = gaussian(8, 3, rng);
  std::vector<int> everyone(8);
  for (int k = 1; k <= 3; ++k) {
    int hits = 0;
    for (int i = 0; i < 8; ++i) {
      everyone[0] = i;
      for (int j = 0, w = 1; j < 8; ++j) {
        if (j != i) everyone[static_cast<std::size_t>(w++)] = j;
      }
      hits += oracle_rank(t, m.row(i), everyone) < k;
    }
    EXPECT_DOUBLE_EQ(r_precision(t, m, k, 8, 99), hits / 8.0);
  }
}

TEST(RPrecision, TiesCountAgainstTheTrueText) {
  // Every text is the same point: each distractor ties the true text.
  const Eigen::MatrixXd t = Eigen::MatrixXd::Ones(6, 2);
  const Eigen::MatrixXd m = Eigen::MatrixXd::Zero(6, 2);
  EXPECT_DOUBLE_EQ(r_precision(t, m, 1, 3, 0), 0.0);
  EXPECT_DOUBLE_EQ(r_precision(t, m, 3, 3, 0), 1.0);
}

TEST(RPrecision, CurveIsMonotoneOnSharedPools) {
  Rng rng(5);
  const Eigen::MatrixXd t = gaussian(64, 6, rng), m = t + 0.8 * gaussian(64, 6, rng);
  const auto curve = r_precision_curve(t, m, 8, 32, 3);
  for (std::size_t k = 1; k < curve.size(); ++k) EXPECT_LE(curve[k - 1], curve[k]);
  for (int k = 1; k <= 8; ++k) EXPECT_DOUBLE_EQ(curve[static_cast<std::size_t>(k - 1)], r_precision(t, m, k, 32, 3));
}

TEST(RPrecision, PermutingPairsLeavesFullPoolScoreUnchanged) {
  Rng rng(6);
  const Eigen::MatrixXd t = gaussian(12, 4, rng), m = t + gaussian(12, 4, rng);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(12);
  perm.setIdentity();
  std::reverse(perm.indices().data(), perm.indices().data() + 12);
  std::swap(perm.indices()[2], perm.indices()[7]);
  for (int k = 1; k <= 3; ++k) {
    EXPECT_DOUBLE_EQ(r_precision(t, m, k, 12, 1), r_precision(perm * t, perm * m, k, 12, 1));
  }
}

TEST(RPrecision, RejectsBadArguments) {
  const Eigen::MatrixXd e = Eigen::MatrixXd::Random(4, 2);
  EXPECT_THROW(r_precision(e, e, 1, 5, 0), InvalidArgument);
  EXPECT_THROW(r_precision(e, e, 0, 2, 0), InvalidArgument);
  EXPECT_THROW(r_precision(e, e, 3, 2, 0), InvalidArgument);
  EXPECT_THROW(r_precision(e, Eigen::MatrixXd::Random(3, 2), 1, 2, 0), InvalidArgument);
}

// --- FID

TEST(Fid, SelfDistanceIsZero) {
  Rng rng(7);
  const Eigen::MatrixXd x = gaussian(50, 6, rng);
  EXPECT_NEAR(fid(x, x), 0.0, 1e-8);
}

TEST(Fid, SymmetricAndNonNegative) {
  Rng rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::MatrixXd a = gaussian(30, 5, rng), b = gaussian(40, 5, rng, 0.3, 1.5);
    EXPECT_NEAR(fid(a, b), fid(b, a), 1e-8);
    EXPECT_GE(fid(a, b), 0.0);
  }
}

TEST(Fid, ConvergesToOneDimensionalFormula) {
  Rng rng(9);
  const double mu1 = 0.0, s1 = 1.0, mu2 = 2.0, s2 = 3.0;
  const Eigen::MatrixXd a = gaussian(50000, 1, rng, mu1, s1), b = gaussian(50000, 1, rng, mu2, s2);
  const double expected = (mu1 - mu2) * (mu1 - mu2) + (s1 - s2) * (s1 - s2);
  EXPECT_NEAR(fid(a, b), expected, 0.25);
}

// 2e points at mu +- s_k on each axis: sample covariance is exactly
// diag(2 s_k^2 / (2e - 1)).
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

TEST(Fid, MatchesDiagonalClosedForm) {
  Eigen::VectorXd mu_a(5), s_a(5), mu_b(5), s_b(5);
  mu_a << 0.1, -2.0, 3.0, 0.0, 1.0;
  s_a << 1.0, 0.5, 2.0, 3.0, 0.1;
  mu_b << 1.0, 0.0, 2.5, -1.0, 1.0;
  s_b << 2.0, 0.25, 2.0, 0.5, 4.0;
  double oracle = 0.0;
  for (int k = 0; k < 5; ++k) {
    const double sa = std::sqrt(2.0 * s_a[k] * s_a[k] / 9.0), sb = std::sqrt(2.0 * s_b[k] * s_b[k] / 9.0);
    oracle += (mu_a[k] - mu_b[k]) * (mu_a[k] - mu_b[k]) + (sa - sb) * (sa - sb);
  }
  EXPECT_NEAR(fid(axis_cross(mu_a, s_a), axis_cross(mu_b, s_b)), oracle, 1e-6);
}

TEST(Fid, RejectsTooFewSamples) {
  EXPECT_THROW(fid(Eigen::MatrixXd::Zero(1, 3), Eigen::MatrixXd::Zero(5, 3)), InvalidArgument);
  EXPECT_THROW(fid(Eigen::MatrixXd::Zero(5, 3), Eigen::MatrixXd::Zero(5, 2)), InvalidArgument);
}

// --- MultiModal-Dist and Diversity

TEST(MultimodalDist, KnownCases) {
  Rng rng(10);
  const Eigen::MatrixXd t = gaussian(16, 4, rng);
  EXPECT_DOUBLE_EQ(multimodal_dist(t, t), 0.0);
  Eigen::MatrixXd shifted = t;
  shifted.col(2).array() += 1.0;
  EXPECT_NEAR(multimodal_dist(t, shifted), 1.0, 1e-12);
  const Eigen::MatrixXd m = gaussian(16, 4, rng);
  double loop = 0.0;
  for (int i = 0; i < 16; ++i) {
    double sq = 0.0;
    for (int c = 0; c < 4; ++c) sq += (t(i, c) - m(i, c)) * (t(i, c) - m(i, c));
    loop += std::sqrt(sq);
  }
  EXPECT_NEAR(multimodal_dist(t, m), loop / 16.0, 1e-12);
  EXPECT_THROW(multimodal_dist(Eigen::MatrixXd(0, 4), Eigen::MatrixXd(0, 4)), InvalidArgument);
}

TEST(Diversity, KnownCases) {
  EXPECT_DOUBLE_EQ(diversity(Eigen::MatrixXd::Constant(10, 3, 2.5), 100, 0), 0.0);
  Eigen::MatrixXd two(2, 3);
  two << 1, 2, 3, -1, -2, -3;
  EXPECT_NEAR(diversity(two, 100, 4), two.row(0).norm() * 2.0, 1e-12);
  EXPECT_THROW(diversity(Eigen::MatrixXd::Zero(1, 3), 10, 0), InvalidArgument);
  EXPECT_THROW(diversity(two, 0, 0), InvalidArgument);
}

TEST(Diversity, ExhaustivePairsMatchAllPairMean) {
  Rng rng(11);
  const Eigen::MatrixXd m = gaussian(9, 3, rng);
  double sum = 0.0;
  for (int i = 0; i < 9; ++i) {
    for (int j = i + 1; j < 9; ++j) sum += (m.row(i) - m.row(j)).norm();
  }
  // 36 pairs exist; asking for more clamps to all of them, each once.
  EXPECT_NEAR(diversity(m, 36, 1), sum / 36.0, 1e-12);
  EXPECT_NEAR(diversity(m, 1000, 2), sum / 36.0, 1e-12);
}

TEST(Diversity, SeedDeterministic) {
  Rng rng(12);
  const Eigen::MatrixXd m = gaussian(50, 4, rng);
  EXPECT_EQ(diversity(m, 100, 3), diversity(m, 100, 3));
  EXPECT_NE(diversity(m, 100, 3), diversity(m, 100, 4));
}

// --- Embedding space

const char* kWalkCaptions[] = {"a Fox walks forward", "the Fox trots ahead steadily", "a Fox strolls along",
                               "a Fox is walking at a steady pace"};
const char* kIdleCaptions[] = {"a Fox stands still", "the Fox rests in place", "a Fox idles quietly",
                               "a Fox waits without moving"};

SpaceExample synthetic(bool walking, Rng& rng) {
  const double phase = rng.uniform(0.0, 6.28);
  if (walking) {
    return {"walk", kWalkCaptions[rng.below(4)],
            motion::to_features(fixtures::toy_walk(40, phase, rng.uniform(0.02, 0.04), rng.uniform(-1.0, 1.0)))};
  }
  auto clip = fixtures::toy_walk(40, phase, 0.0, 0.0);
  Eigen::MatrixXd frames = clip.frames();
  frames.rightCols(frames.cols() - 3) *= 0.05;
  return {"idle", kIdleCaptions[rng.below(4)],
          motion::to_features(motion::MotionClip(clip.skeleton(), clip.frame_time(), std::move(frames)))};
}

std::vector<SpaceExample> synthetic_set(int count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<SpaceExample> out;
  for (int i = 0; i < count; ++i) out.push_back(synthetic(i % 2 == 0, rng));
  return out;
}

TEST(EmbeddingSpace, DeterministicModeIsReproducibleAndUnitNorm) {
  SpaceConfig config;
  config.train = false;
  config.seed = 3;
  const auto examples = synthetic_set(6, 1);
  const auto a = train_eval_space(examples, config);
  const auto b = EmbeddingSpace::deterministic(config);
  EXPECT_EQ(a.provenance(), SpaceProvenance::kDeterministic);
  for (const auto& e : examples) {
    const Eigen::VectorXd ta = a.text_embed(e.caption), ma = a.motion_embed(e.features);
    EXPECT_EQ(ta, b.text_embed(e.caption));
    EXPECT_EQ(ma, b.motion_embed(e.features));
    EXPECT_EQ(ta.size(), a.dim());
    EXPECT_EQ(ma.size(), a.dim());
    EXPECT_TRUE(ta.allFinite() && ma.allFinite());
    EXPECT_NEAR(ta.norm(), 1.0, 1e-9);
    EXPECT_NEAR(ma.norm(), 1.0, 1e-9);
  }
}

TEST(EmbeddingSpace, DescriptorIgnoresJointCount) {
  const auto rig = avatar::template_rig(avatar::BodyPlan::kSerpent);
  const motion::MotionClip rest(rig, 1.0 / 30.0, Eigen::MatrixXd::Zero(5, rig.num_channels()));
  const Eigen::VectorXd a = motion_descriptor(motion::to_features(rest));
  const Eigen::VectorXd b = motion_descriptor(motion::to_features(fixtures::toy_walk(5)));
  ASSERT_NE(rig.num_joints(), fixtures::toy_quadruped().num_joints());
  EXPECT_EQ(a.size(), kDescriptorDim);
  EXPECT_EQ(b.size(), kDescriptorDim);
  EXPECT_TRUE(a.allFinite() && b.allFinite());
  EXPECT_NEAR(a[kDescriptorDim - 1], std::log(rig.num_joints()), 1e-12);
}

TEST(EmbeddingSpace, NeedsTwoCategories) {
  auto examples = synthetic_set(6, 1);
  for (auto& e : examples) e.category = "walk";
  EXPECT_THROW(train_eval_space(examples, SpaceConfig{}), InvalidArgument);
}

TEST(EmbeddingSpace, TrainedSpaceRetrievesHeldOutCategory) {
  SpaceConfig config;
  config.seed = 5;
  SpaceTrainLog log;
  const auto space = train_eval_space(synthetic_set(96, 10), config, &log);
  EXPECT_EQ(space.provenance(), SpaceProvenance::kTrainedContrastive);
  ASSERT_FALSE(log.epoch_loss.empty());
  EXPECT_LT(log.epoch_loss.back(), log.epoch_loss.front());

  const auto held_out = synthetic_set(40, 77);
  std::vector<std::string> captions;
  std::vector<motion::FeatureMatrix> clips;
  for (const auto& e : held_out) {
    captions.push_back(e.caption);
    clips.push_back(e.features);
  }
  const Eigen::MatrixXd t = space.text_embed(captions), m = space.motion_embed(clips);
  int correct = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Eigen::Index best = 0;
    (t.rowwise() - m.row(i)).rowwise().norm().minCoeff(&best);
    correct += held_out[static_cast<std::size_t>(best)].category == held_out[static_cast<std::size_t>(i)].category;
  }
  EXPECT_GE(correct / 40.0, 0.9);
}

TEST(EmbeddingSpace, JsonRoundTripKeepsEmbeddings) {
  SpaceConfig config;
  config.epochs = 3;
  const auto examples = synthetic_set(16, 4);
  const auto space = train_eval_space(examples, config);
  const auto back = EmbeddingSpace::from_json(nlohmann::json::parse(space.to_json().dump()));
  EXPECT_EQ(back.provenance(), space.provenance());
  for (const auto& e : examples) {
    EXPECT_LT((back.text_embed(e.caption) - space.text_embed(e.caption)).norm(), 1e-12);
    EXPECT_LT((back.motion_embed(e.features) - space.motion_embed(e.features)).norm(), 1e-12);
  }
  EXPECT_THROW(EmbeddingSpace::from_json(nlohmann::json{{"format", "other"}}), ParseError);
}

// --- Corpus report

std::vector<EvalSample> corpus(std::uint64_t seed, bool with_generated) {
  std::vector<EvalSample> out;
  Rng rng(seed);
  const char* animals[] = {"Fox", "Anaconda", "Horse"};
  for (int a = 0; a < 3; ++a) {
    for (int i = 0; i < 6 + 2 * a; ++i) {
      auto ex = synthetic(i % 2 == 0, rng);
      EvalSample s{animals[a], ex.caption, ex.features, std::nullopt};
      if (with_generated) s.generated = synthetic(i % 2 == 0, rng).features;
      out.push_back(std::move(s));
    }
  }
  out.push_back({"Lonely", "a Lonely animal walks", synthetic(true, rng).features, std::nullopt});
  return out;
}

TEST(Report, GroundTruthAgainstItself) {
  SpaceConfig sc;
  sc.train = false;
  const auto space = EmbeddingSpace::deterministic(sc);
  const auto report = evaluate_corpus(corpus(1, false), space, EvalConfig{});
  ASSERT_EQ(report.rows.size(), 3u);
  EXPECT_EQ(report.rows[0].category, "Anaconda");
  EXPECT_EQ(report.rows[0].label(), "Anaconda (GT)");
  for (const auto& r : report.rows) {
    EXPECT_NEAR(r.fid, 0.0, 1e-8);
    EXPECT_LE(r.top1, r.top2);
    EXPECT_LE(r.top2, r.top3);
    EXPECT_EQ(r.pool_size, r.samples);
    EXPECT_EQ(r.diversity_pairs, std::min(100, r.samples * (r.samples - 1) / 2));
  }
  ASSERT_EQ(report.metadata.skipped.size(), 1u);
  EXPECT_NE(report.metadata.skipped[0].find("Lonely"), std::string::npos);
  EXPECT_NO_THROW(report.validate());
}

TEST(Report, AverageRowIsTheMean) {
  SpaceConfig sc;
  sc.train = false;
  const auto report = evaluate_corpus(corpus(2, true), EmbeddingSpace::deterministic(sc), EvalConfig{});
  ASSERT_EQ(report.averages.size(), 2u);
  for (const auto& avg : report.averages) {
    double top1 = 0, fid_sum = 0, div = 0, mm = 0;
    int n = 0;
    for (const auto& r : report.rows) {
      if (r.source != avg.source) continue;
      top1 += r.top1;
      fid_sum += r.fid;
      div += r.diversity;
      mm += r.mm_dist;
      ++n;
    }
    EXPECT_EQ(n, 3);
    EXPECT_NEAR(avg.top1, top1 / n, 1e-12);
    EXPECT_NEAR(avg.fid, fid_sum / n, 1e-12);
    EXPECT_NEAR(avg.diversity, div / n, 1e-12);
    EXPECT_NEAR(avg.mm_dist, mm / n, 1e-12);
  }
  MetricReport broken = report;
  broken.averages[0].fid += 1.0;
  EXPECT_THROW(broken.validate(), Error);
}

TEST(Report, JsonRoundTripAndTable) {
  SpaceConfig sc;
  sc.train = false;
  const auto report = evaluate_corpus(corpus(3, true), EmbeddingSpace::deterministic(sc), EvalConfig{});
  const auto back = MetricReport::from_json(nlohmann::json::parse(report.to_json().dump()));
  EXPECT_EQ(back.to_json(), report.to_json());
  EXPECT_EQ(back.to_table(), report.to_table());
  const std::string table = report.to_table();
  const auto header = table.substr(0, table.find('\n'));
  EXPECT_LT(header.find("R-Prec Top 1"), header.find("FID"));
  EXPECT_LT(header.find("FID"), header.find("MultiModal-Dist"));
  EXPECT_LT(header.find("MultiModal-Dist"), header.find("Diversity"));
  EXPECT_NE(table.find("Average (Ours)"), std::string::npos);
}

TEST(Report, DeterministicAcrossThreadCounts) {
  SpaceConfig sc;
  sc.train = false;
  const auto space = EmbeddingSpace::deterministic(sc);
  EvalConfig one;
  one.max_in_flight = 1;
  EvalConfig many;
  many.max_in_flight = 4;
  EXPECT_EQ(evaluate_corpus(corpus(4, true), space, one).to_json(),
            evaluate_corpus(corpus(4, true), space, many).to_json());
}

TEST(Report, NothingToEvaluateThrows) {
  SpaceConfig sc;
  sc.train = false;
  auto samples = corpus(5, false);
  samples.resize(1);
  EXPECT_THROW(evaluate_corpus(samples, EmbeddingSpace::deterministic(sc), EvalConfig{}), InvalidArgument);
}

}  // namespace
}  // namespace critter
