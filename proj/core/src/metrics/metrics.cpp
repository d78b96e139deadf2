#include "critter/metrics/metrics.hpp"

#include <algorithm>
#include <Eigen/Eigenvalues>
#include <numeric>
#include <set>
#include <string>

#include "critter/util/error.hpp"
#include "critter/util/rng.hpp"

namespace critter::metrics {

namespace {

void check_pairs(const Embeddings& text, const Embeddings& motion) {
  if (text.rows() != motion.rows() || text.cols() != motion.cols()) {
    throw InvalidArgument("text and motion embeddings differ in shape");
  }
}

Eigen::MatrixXd covariance(const Embeddings& x, const Eigen::RowVectorXd& mean) {
  const Eigen::MatrixXd c = x.rowwise() - mean;
  return (c.transpose() * c) / static_cast<double>(x.rows() - 1);
}

Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& m) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

std::vector<std::vector<int>> sample_pools(int count, int pool_size, std::uint64_t seed) {
  if (pool_size < 1 || count < pool_size) {
    throw InvalidArgument("R-precision needs B >= P >= 1 (B = " + std::to_string(count) +
                          ", P = " + std::to_string(pool_size) + ")");
  }
  Rng rng(seed);
  std::vector<std::vector<int>> pools(static_cast<std::size_t>(count));
  std::vector<int> others(static_cast<std::size_t>(count - 1));
  for (int i = 0; i < count; ++i) {
    // Indices other than i, then a partial Fisher-Yates shuffle.
    for (int j = 0, w = 0; j < count; ++j) {
      if (j != i) others[static_cast<std::size_t>(w++)] = j;
    }
    auto& pool = pools[static_cast<std::size_t>(i)];
    pool.push_back(i);
    for (int s = 0; s < pool_size - 1; ++s) {
      const auto r = static_cast<std::size_t>(s) + rng.below(others.size() - static_cast<std::size_t>(s));
      std::swap(others[static_cast<std::size_t>(s)], others[r]);
      pool.push_back(others[static_cast<std::size_t>(s)]);
    }
  }
  return pools;
}

std::vector<double> r_precision_curve(const Embeddings& text, const Embeddings& motion, int max_k, int pool_size,
                                      std::uint64_t seed) {
  check_pairs(text, motion);
  if (max_k < 1) throw InvalidArgument("R-precision needs k >= 1");
  const auto pools = sample_pools(static_cast<int>(motion.rows()), pool_size, seed);
  std::vector<int> hits(static_cast<std::size_t>(max_k), 0);
  for (std::size_t i = 0; i < pools.size(); ++i) {
    const auto& pool = pools[i];
    const auto row = motion.row(static_cast<Eigen::Index>(i));
    const double truth = (text.row(pool[0]) - row).norm();
    int rank = 0;  // distractors at or below the true distance
    for (std::size_t c = 1; c < pool.size(); ++c) rank += (text.row(pool[c]) - row).norm() <= truth;
    for (int k = rank + 1; k <= max_k; ++k) ++hits[static_cast<std::size_t>(k - 1)];
  }
  std::vector<double> out;
  for (const int h : hits) out.push_back(static_cast<double>(h) / static_cast<double>(pools.size()));
  return out;
}

double r_precision(const Embeddings& text, const Embeddings& motion, int k, int pool_size, std::uint64_t seed) {
  if (k < 1) throw InvalidArgument("R-precision needs k >= 1");
  if (k > pool_size) throw InvalidArgument("R-precision needs k <= P");
  return r_precision_curve(text, motion, k, pool_size, seed).back();
}

double fid(const Embeddings& a, const Embeddings& b) {
  if (a.rows() < 2 || b.rows() < 2) throw InvalidArgument("FID needs at least 2 samples per set");
  if (a.cols() != b.cols()) throw InvalidArgument("FID sets differ in width");
  const Eigen::RowVectorXd mu_a = a.colwise().mean();
  const Eigen::RowVectorXd mu_b = b.colwise().mean();
  const Eigen::MatrixXd sa = covariance(a, mu_a);
  const Eigen::MatrixXd sb = covariance(b, mu_b);
  const Eigen::MatrixXd root_a = sqrt_psd(sa);
  const Eigen::MatrixXd inner = root_a * sb * root_a;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  const double tr_sqrt = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double d = (mu_a - mu_b).squaredNorm() + sa.trace() + sb.trace() - 2.0 * tr_sqrt;
  return std::max(d, 0.0);
}

double multimodal_dist(const Embeddings& text, const Embeddings& motion) {
  check_pairs(text, motion);
  if (text.rows() == 0) throw InvalidArgument("MultiModal-Dist needs at least one pair");
  return (text - motion).rowwise().norm().mean();
}

double diversity(const Embeddings& motion, int pairs, std::uint64_t seed) {
  const auto n = static_cast<std::uint64_t>(motion.rows());
  if (n < 2) throw InvalidArgument("Diversity needs at least 2 samples");
  if (pairs < 1) throw InvalidArgument("Diversity needs at least 1 pair");
  const std::uint64_t total = n * (n - 1) / 2;
  const std::uint64_t s = std::min<std::uint64_t>(static_cast<std::uint64_t>(pairs), total);
  // Floyd's sampling of s distinct pair ranks from [0, total).
  Rng rng(seed);
  std::set<std::uint64_t> chosen;
  for (std::uint64_t j = total - s; j < total; ++j) {
    const std::uint64_t t = rng.below(j + 1);
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  double sum = 0.0;
  for (const std::uint64_t rank : chosen) {
    // Rank -> (i, j), i < j, row-major over the upper triangle.
    std::uint64_t i = 0, r = rank;
    while (r >= n - 1 - i) {
      r -= n - 1 - i;
      ++i;
    }
    const std::uint64_t j = i + 1 + r;
    sum += (motion.row(static_cast<Eigen::Index>(i)) - motion.row(static_cast<Eigen::Index>(j))).norm();
  }
  return sum / static_cast<double>(s);
}

}  // namespace critter::metrics
