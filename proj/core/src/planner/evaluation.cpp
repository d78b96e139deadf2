#include "critter/planner/evaluation.hpp"

#include <cctype>
#include <cmath>
#include <tuple>
#include <json.hpp>

#include "critter/util/binary_io.hpp"
#include "critter/util/error.hpp"
#include "critter/util/parallel.hpp"

namespace critter::planner {

namespace {

std::string collapse(std::string_view s) {
  std::string out;
  bool space = false;
  for (const char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      space = !out.empty();
    } else {
      if (space) out += ' ';
      space = false;
      out += static_cast<char>(std::tolower(c));
    }
  }
  return out;
}

}  // namespace

std::vector<QARecord> parse_qa_dataset(std::string_view json_text) {
  try {
    const auto doc = nlohmann::json::parse(json_text);
    if (!doc.is_array()) throw ParseError("Q&A dataset must be a JSON array");
    std::vector<QARecord> out;
    out.reserve(doc.size());
    for (const auto& item : doc) {
      QARecord r;
      r.instruction = item.at("instruction").get<std::string>();
      r.input = item.at("input").get<std::string>();
      r.output = item.at("output").get<std::string>();
      for (const auto& h : item.at("history")) r.history.push_back(h.is_string() ? h.get<std::string>() : h.dump());
      out.push_back(std::move(r));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid Q&A dataset: ") + e.what());
  }
}

std::vector<QARecord> load_qa_dataset(const std::string& path) { return parse_qa_dataset(io::read_file_text(path)); }

std::string write_qa_dataset(const std::vector<QARecord>& records) {
  auto doc = nlohmann::json::array();
  for (const auto& r : records) {
    doc.push_back({{"instruction", r.instruction}, {"input", r.input}, {"output", r.output}, {"history", r.history}});
  }
  return doc.dump(4);
}

std::int64_t percent_hundredths(std::int64_t numerator, std::int64_t denominator) {
  if (denominator <= 0) throw InvalidArgument("percentage of an empty set");
  const std::int64_t scaled = numerator * 10000;
  std::int64_t q = scaled / denominator;
  const std::int64_t r = scaled % denominator;
  if (2 * r > denominator || (2 * r == denominator && (q % 2 != 0))) ++q;
  return q;
}

std::int64_t mean_hundredths(std::int64_t a, std::int64_t b) {
  const std::int64_t sum = a + b;
  std::int64_t half = sum / 2;
  if (sum % 2 != 0 && half % 2 != 0) ++half;
  return half;
}

bool categories_match(std::string_view a, std::string_view b) { return collapse(a) == collapse(b); }

AccuracyReport AccuracyReport::from_verdicts(std::vector<RecordVerdict> verdicts) {
  std::int64_t valid = 0;
  std::int64_t animal = 0;
  std::int64_t motion = 0;
  for (const auto& v : verdicts) {
    if (!v.valid) continue;
    ++valid;
    animal += v.animal_correct ? 1 : 0;
    motion += v.motion_correct ? 1 : 0;
  }
  if (valid == 0) throw InvalidArgument("no valid records to evaluate");
  const std::int64_t a = percent_hundredths(animal, valid);
  const std::int64_t m = percent_hundredths(motion, valid);
  AccuracyReport report;
  report.animal_acc = static_cast<double>(a) / 100.0;
  report.motion_acc = static_cast<double>(m) / 100.0;
  report.overall_acc = static_cast<double>(mean_hundredths(a, m)) / 100.0;
  report.evaluated = static_cast<std::size_t>(valid);
  report.verdicts = std::move(verdicts);
  return report;
}

AccuracyReport AccuracyReport::from_percentages(double animal_acc, double motion_acc) {
  for (const double v : {animal_acc, motion_acc}) {
    if (!(v >= 0.0 && v <= 100.0)) throw InvalidArgument("accuracy must lie in [0, 100]");
  }
  const auto a = static_cast<std::int64_t>(std::llround(animal_acc * 100.0));
  const auto m = static_cast<std::int64_t>(std::llround(motion_acc * 100.0));
  AccuracyReport report;
  report.animal_acc = static_cast<double>(a) / 100.0;
  report.motion_acc = static_cast<double>(m) / 100.0;
  report.overall_acc = static_cast<double>(mean_hundredths(a, m)) / 100.0;
  return report;
}

AccuracyReport evaluate_planner(const std::vector<QARecord>& dataset, const Planner& planner,
                                std::size_t max_in_flight) {
  if (dataset.empty()) throw InvalidArgument("empty Q&A dataset");
  std::vector<RecordVerdict> verdicts(dataset.size());
  parallel_for(dataset.size(), max_in_flight, [&](std::size_t i) {
    RecordVerdict& v = verdicts[i];
    v.index = i;
    try {
      std::tie(v.expected_animal, v.expected_motion) = parse_planner_output(dataset[i].output);
    } catch (const ParseError& e) {
      v.valid = false;
      v.error = std::string("unparseable ground truth: ") + e.what();
      return;
    }
    try {
      const PlannerDecision d = planner.plan(dataset[i].instruction);
      v.predicted_animal = d.animal;
      v.predicted_motion = d.motion;
      v.animal_correct = categories_match(d.animal, v.expected_animal);
      v.motion_correct = categories_match(d.motion, v.expected_motion);
    } catch (const Error& e) {
      v.error = e.what();
    }
  });
  return AccuracyReport::from_verdicts(std::move(verdicts));
}

}  // namespace critter::planner
