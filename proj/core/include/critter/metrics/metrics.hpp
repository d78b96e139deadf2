#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

namespace critter::metrics {

/// Row i of both matrices is a matched (text, motion) pair.
using Embeddings = Eigen::MatrixXd;

/// Pool of candidate texts for every motion i: pools[i][0] == i followed by
/// P - 1 distinct other indices drawn without replacement from one seeded
/// stream. Throws InvalidArgument unless B >= P >= 1.
std::vector<std::vector<int>> sample_pools(int count, int pool_size, std::uint64_t seed);

/// Fraction of motions whose true text ranks within the top k of its pool by
/// Euclidean distance. A distractor at exactly the true distance ranks ahead
/// of the true text. k >= P gives 1. Throws InvalidArgument unless
/// B >= P >= k >= 1 (k may exceed P only as noted) and shapes match.
double r_precision(const Embeddings& text, const Embeddings& motion, int k, int pool_size, std::uint64_t seed);

/// Top-1 .. top-max_k on the same pools, so the values are non-decreasing.
std::vector<double> r_precision_curve(const Embeddings& text, const Embeddings& motion, int max_k, int pool_size,
                                      std::uint64_t seed);

/// Frechet distance between Gaussians fitted to the rows (unbiased
/// covariance). The square-root trace comes from the eigenvalues of
/// sqrt(S_a) S_b sqrt(S_a), negatives clamped to zero; the result is
/// clamped at zero. Throws InvalidArgument for fewer than 2 rows or mismatched
/// widths.
double fid(const Embeddings& a, const Embeddings& b);

/// Mean distance between matched rows. Throws InvalidArgument for B = 0.
double multimodal_dist(const Embeddings& text, const Embeddings& motion);

/// Mean distance over `pairs` distinct unordered index pairs drawn without
/// replacement (clamped to B(B-1)/2). Throws InvalidArgument for B < 2 or
/// pairs < 1.
double diversity(const Embeddings& motion, int pairs, std::uint64_t seed);

}  // namespace critter::metrics
