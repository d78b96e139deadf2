#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "critter/metrics/space.hpp"
#include "critter/motion/features.hpp"

namespace critter::metrics {

/// Row source: the reference clips themselves or generated clips.
inline constexpr const char* kSourceGroundTruth = "GT";
inline constexpr const char* kSourceGenerated = "Ours";

struct MetricRow {
  std::string category;  // "Average" for the mean rows
  std::string source;    // kSourceGroundTruth or kSourceGenerated
  double top1 = 0.0;
  double top2 = 0.0;
  double top3 = 0.0;
  double fid = 0.0;
  double mm_dist = 0.0;
  double diversity = 0.0;
  int samples = 0;
  int pool_size = 0;
  int diversity_pairs = 0;

  std::string label() const { return category + " (" + source + ")"; }
};

struct ReportMetadata {
  int pool_size = 32;
  int diversity_pairs = 100;
  std::uint64_t seed = 0;
  std::string space_provenance;
  std::vector<std::string> skipped;  // "<category> (<source>): reason"
};

struct MetricReport {
  std::vector<MetricRow> rows;      // sorted by category, GT before Ours
  std::vector<MetricRow> averages;  // one per source present
  ReportMetadata metadata;

  /// Throws Error when a row breaks the metric ranges, top-k ordering or an
  /// Average row is not the mean of its rows.
  void validate() const;

  nlohmann::json to_json() const;
  static MetricReport from_json(const nlohmann::json& j);

  /// Aligned text table in the order R-Prec Top 1/2/3, FID, MultiModal-Dist,
  /// Diversity.
  std::string to_table() const;
};

struct EvalSample {
  std::string category;
  std::string caption;
  motion::FeatureMatrix reference;
  std::optional<motion::FeatureMatrix> generated;
};

struct EvalConfig {
  int pool_size = 32;
  int diversity_pairs = 100;
  std::uint64_t seed = 0;
  bool ground_truth_rows = true;
  int max_in_flight = 4;

  void validate() const;
};

/// Per category, rows for the reference clips (when ground_truth_rows) and
/// for generated clips where every sample of the category has one. FID
/// compares against the category's reference embeddings; the pool is
/// min(pool_size, B). Categories with fewer than 2 samples are skipped and
/// listed in the metadata. Throws InvalidArgument when nothing remains.
MetricReport evaluate_corpus(const std::vector<EvalSample>& samples, const EmbeddingSpace& space,
                             const EvalConfig& config);

}  // namespace critter::metrics
