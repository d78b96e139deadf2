#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "critter/planner/planner.hpp"

namespace critter::planner {

/// One row of the avatar Q&A instruction-tuning corpus.
struct QARecord {
  std::string instruction;
  std::string input;
  std::string output;  // "The animal is {X}, and motion is {Y}."
  std::vector<std::string> history;
};

/// JSON array of {"instruction", "input", "output", "history"} objects.
std::vector<QARecord> parse_qa_dataset(std::string_view json_text);
std::vector<QARecord> load_qa_dataset(const std::string& path);
std::string write_qa_dataset(const std::vector<QARecord>& records);

struct RecordVerdict {
  std::size_t index = 0;
  bool valid = true;  // ground truth parsed
  std::string expected_animal;
  std::string expected_motion;
  std::string predicted_animal;
  std::string predicted_motion;
  bool animal_correct = false;
  bool motion_correct = false;
  std::string error;  // ground-truth or planner failure
};

/// Accuracies in percent, rounded half-to-even at two decimals.
struct AccuracyReport {
  double animal_acc = 0.0;
  double motion_acc = 0.0;
  double overall_acc = 0.0;
  std::size_t evaluated = 0;
  std::vector<RecordVerdict> verdicts;

  /// Aggregates verdicts; invalid records are excluded from the denominator.
  static AccuracyReport from_verdicts(std::vector<RecordVerdict> verdicts);

  /// Overall from two already-rounded percentages.
  static AccuracyReport from_percentages(double animal_acc, double motion_acc);
};

/// round-half-even(100 * numerator / denominator) in hundredths of a percent,
/// computed exactly in integers.
std::int64_t percent_hundredths(std::int64_t numerator, std::int64_t denominator);

/// Mean of two values given in hundredths, rounded half to even.
std::int64_t mean_hundredths(std::int64_t a, std::int64_t b);

/// Case-insensitive comparison after trimming and collapsing whitespace.
bool categories_match(std::string_view a, std::string_view b);

/// Runs the planner over every record's instruction with up to
/// `max_in_flight` concurrent plans. The result is independent of record
/// order apart from verdict indices.
AccuracyReport evaluate_planner(const std::vector<QARecord>& dataset, const Planner& planner,
                                std::size_t max_in_flight = 1);

}  // namespace critter::planner
