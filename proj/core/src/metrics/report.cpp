#include "critter/metrics/report.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "critter/metrics/metrics.hpp"
#include "critter/util/error.hpp"
#include "critter/util/hash.hpp"
#include "critter/util/parallel.hpp"

namespace critter::metrics {

using nlohmann::json;

namespace {

constexpr double kAverageTolerance = 1e-9;

MetricRow mean_row(const std::vector<const MetricRow*>& rows, const std::string& source) {
  MetricRow avg;
  avg.category = "Average";
  avg.source = source;
  const double inv = 1.0 / static_cast<double>(rows.size());
  for (const MetricRow* r : rows) {
    avg.top1 += r->top1 * inv;
    avg.top2 += r->top2 * inv;
    avg.top3 += r->top3 * inv;
    avg.fid += r->fid * inv;
    avg.mm_dist += r->mm_dist * inv;
    avg.diversity += r->diversity * inv;
    avg.samples += r->samples;
  }
  return avg;
}

std::vector<MetricRow> averages_of(const std::vector<MetricRow>& rows) {
  std::vector<MetricRow> out;
  for (const char* source : {kSourceGroundTruth, kSourceGenerated}) {
    std::vector<const MetricRow*> group;
    for (const auto& r : rows) {
      if (r.source == source) group.push_back(&r);
    }
    if (!group.empty()) out.push_back(mean_row(group, source));
  }
  return out;
}

json row_to_json(const MetricRow& r) {
  return {{"category", r.category}, {"source", r.source},   {"top1", r.top1},
          {"top2", r.top2},         {"top3", r.top3},       {"fid", r.fid},
          {"mm_dist", r.mm_dist},   {"diversity", r.diversity}, {"samples", r.samples},
          {"pool_size", r.pool_size}, {"diversity_pairs", r.diversity_pairs}};
}

MetricRow row_from_json(const json& j) {
  MetricRow r;
  r.category = j.at("category");
  r.source = j.at("source");
  r.top1 = j.at("top1");
  r.top2 = j.at("top2");
  r.top3 = j.at("top3");
  r.fid = j.at("fid");
  r.mm_dist = j.at("mm_dist");
  r.diversity = j.at("diversity");
  r.samples = j.at("samples");
  r.pool_size = j.at("pool_size");
  r.diversity_pairs = j.at("diversity_pairs");
  return r;
}

void check_row(const MetricRow& r) {
  const auto fail = [&](const std::string& what) { throw Error("metric row " + r.label() + ": " + what); };
  for (const double v : {r.top1, r.top2, r.top3, r.fid, r.mm_dist, r.diversity}) {
    if (!std::isfinite(v)) fail("non-finite value");
  }
  if (r.top1 < 0.0 || r.top3 > 1.0) fail("R-precision outside [0, 1]");
  if (r.top1 > r.top2 || r.top2 > r.top3) fail("R-precision not monotone in k");
  if (r.fid < 0.0 || r.diversity < 0.0 || r.mm_dist < 0.0) fail("negative distance");
}

bool close(double a, double b) { return std::abs(a - b) <= kAverageTolerance * std::max(1.0, std::abs(b)); }

struct CategoryResult {
  std::vector<MetricRow> rows;
  std::vector<std::string> skipped;
};

MetricRow score(const std::string& category, const char* source, const Eigen::MatrixXd& text,
                const Eigen::MatrixXd& reference, const Eigen::MatrixXd& motion, const EvalConfig& config,
                std::uint64_t seed) {
  MetricRow row;
  row.category = category;
  row.source = source;
  row.samples = static_cast<int>(motion.rows());
  row.pool_size = std::min(config.pool_size, row.samples);
  const auto curve = r_precision_curve(text, motion, 3, row.pool_size, seed);
  row.top1 = curve[0];
  row.top2 = curve[1];
  row.top3 = curve[2];
  row.fid = fid(reference, motion);
  row.mm_dist = multimodal_dist(text, motion);
  const long long total = static_cast<long long>(row.samples) * (row.samples - 1) / 2;
  row.diversity_pairs = static_cast<int>(std::min<long long>(config.diversity_pairs, total));
  row.diversity = diversity(motion, config.diversity_pairs, seed ^ 0xd1e5ULL);
  return row;
}

}  // namespace

void MetricReport::validate() const {
  for (const auto& r : rows) check_row(r);
  const auto expected = averages_of(rows);
  if (expected.size() != averages.size()) throw Error("metric report average rows do not match its sources");
  for (std::size_t i = 0; i < averages.size(); ++i) {
    const auto& a = averages[i];
    const auto& e = expected[i];
    check_row(a);
    if (a.source != e.source || !close(a.top1, e.top1) || !close(a.top2, e.top2) || !close(a.top3, e.top3) ||
        !close(a.fid, e.fid) || !close(a.mm_dist, e.mm_dist) || !close(a.diversity, e.diversity)) {
      throw Error("metric report " + a.label() + " is not the mean of its rows");
    }
  }
}

json MetricReport::to_json() const {
  json j;
  j["rows"] = json::array();
  for (const auto& r : rows) j["rows"].push_back(row_to_json(r));
  j["averages"] = json::array();
  for (const auto& r : averages) j["averages"].push_back(row_to_json(r));
  j["metadata"] = {{"pool_size", metadata.pool_size},
                   {"diversity_pairs", metadata.diversity_pairs},
                   {"seed", metadata.seed},
                   {"space_provenance", metadata.space_provenance},
                   {"skipped", metadata.skipped}};
  return j;
}

MetricReport MetricReport::from_json(const json& j) {
  try {
    MetricReport report;
    for (const auto& r : j.at("rows")) report.rows.push_back(row_from_json(r));
    for (const auto& r : j.at("averages")) report.averages.push_back(row_from_json(r));
    const json& m = j.at("metadata");
    report.metadata.pool_size = m.at("pool_size");
    report.metadata.diversity_pairs = m.at("diversity_pairs");
    report.metadata.seed = m.at("seed");
    report.metadata.space_provenance = m.at("space_provenance");
    report.metadata.skipped = m.at("skipped").get<std::vector<std::string>>();
    return report;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed metric report: ") + e.what(), 0, 0);
  }
}

std::string MetricReport::to_table() const {
  std::size_t width = 8;
  for (const auto* group : {&rows, &averages}) {
    for (const auto& r : *group) width = std::max(width, r.label().size());
  }
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %12s  %12s  %12s  %10s  %15s  %10s\n", static_cast<int>(width), "Category",
                "R-Prec Top 1", "R-Prec Top 2", "R-Prec Top 3", "FID", "MultiModal-Dist", "Diversity");
  out << buf;
  const auto line = [&](const MetricRow& r) {
    std::snprintf(buf, sizeof buf, "%-*s  %12.3f  %12.3f  %12.3f  %10.3f  %15.3f  %10.3f\n", static_cast<int>(width),
                  r.label().c_str(), r.top1, r.top2, r.top3, r.fid, r.mm_dist, r.diversity);
    out << buf;
  };
  for (const auto& r : rows) line(r);
  for (const auto& r : averages) line(r);
  return out.str();
}

void EvalConfig::validate() const {
  if (pool_size < 1) throw InvalidArgument("pool size must be >= 1");
  if (diversity_pairs < 1) throw InvalidArgument("diversity pairs must be >= 1");
  if (max_in_flight < 1) throw InvalidArgument("max_in_flight must be >= 1");
}

MetricReport evaluate_corpus(const std::vector<EvalSample>& samples, const EmbeddingSpace& space,
                             const EvalConfig& config) {
  config.validate();
  std::map<std::string, std::vector<const EvalSample*>> by_category;
  for (const auto& s : samples) by_category[s.category].push_back(&s);
  std::vector<std::pair<std::string, std::vector<const EvalSample*>>> groups(by_category.begin(), by_category.end());

  std::vector<CategoryResult> results(groups.size());
  parallel_for(groups.size(), static_cast<std::size_t>(config.max_in_flight), [&](std::size_t g) {
    const auto& [category, members] = groups[g];
    auto& result = results[g];
    if (members.size() < 2) {
      result.skipped.push_back(category + ": fewer than 2 samples");
      return;
    }
    std::vector<std::string> captions;
    std::vector<motion::FeatureMatrix> refs;
    for (const auto* s : members) {
      captions.push_back(s->caption);
      refs.push_back(s->reference);
    }
    const Eigen::MatrixXd text = space.text_embed(captions);
    const Eigen::MatrixXd reference = space.motion_embed(refs);
    const std::uint64_t seed = config.seed ^ fnv1a64(category);
    if (config.ground_truth_rows) {
      result.rows.push_back(score(category, kSourceGroundTruth, text, reference, reference, config, seed));
    }
    std::size_t with_generated = 0;
    for (const auto* s : members) with_generated += s->generated.has_value();
    if (with_generated == members.size()) {
      std::vector<motion::FeatureMatrix> gen;
      for (const auto* s : members) gen.push_back(*s->generated);
      result.rows.push_back(
          score(category, kSourceGenerated, text, reference, space.motion_embed(gen), config, seed));
    } else if (with_generated > 0) {
      result.skipped.push_back(category + " (" + kSourceGenerated + "): generated clips missing for some samples");
    }
  });

  MetricReport report;
  report.metadata.pool_size = config.pool_size;
  report.metadata.diversity_pairs = config.diversity_pairs;
  report.metadata.seed = config.seed;
  report.metadata.space_provenance = to_string(space.provenance());
  for (auto& r : results) {
    for (auto& row : r.rows) report.rows.push_back(std::move(row));
    for (auto& s : r.skipped) report.metadata.skipped.push_back(std::move(s));
  }
  if (report.rows.empty()) throw InvalidArgument("no category has enough samples to evaluate");
  report.averages = averages_of(report.rows);
  return report;
}

}  // namespace critter::metrics
