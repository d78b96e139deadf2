#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "critter/net/chat.hpp"
#include "critter/planner/taxonomy.hpp"

namespace critter::planner {

enum class DecisionSource { kLlm, kMatcher };

std::string_view to_string(DecisionSource s);

struct PlannerDecision {
  std::string animal;
  std::string motion;
  std::string motion_prompt;  // drives motion generation
  std::string avatar_prompt;  // drives avatar image generation
  DecisionSource source = DecisionSource::kMatcher;
  std::optional<std::string> raw_backend_text;
  std::optional<std::string> fallback_reason;  // why the LLM answer was not used
};

/// "{animal}" and "{motion}" placeholders are substituted.
struct PromptTemplates {
  std::string motion = "a {animal} performs {motion}";
  std::string avatar = "a full-body photo of a {animal}, neutral pose, white background";
};

/// Throws InvalidArgument when either category is empty.
std::pair<std::string, std::string> build_prompts(std::string_view animal, std::string_view motion,
                                                  const PromptTemplates& templates = {});

/// "The animal is {X}, and motion is {Y}."
std::string format_planner_output(std::string_view animal, std::string_view motion);

/// Extracts the brace-delimited spans following "animal is" and "motion is".
/// Throws ParseError when an anchor or brace is missing.
std::pair<std::string, std::string> parse_planner_output(std::string_view text);

/// System message sent to an LLM backend.
std::string planner_system_prompt(const Taxonomy& taxonomy);

/// Maps a user query to categories and downstream prompts.
///
/// With a backend, the LLM reply is parsed and checked against the taxonomy;
/// any failure (transport, grammar, unknown category) falls back to the
/// deterministic matcher. Without a backend only the matcher runs.
class Planner {
 public:
  explicit Planner(Taxonomy taxonomy, PromptTemplates templates = {},
                   std::shared_ptr<const net::ChatBackend> backend = nullptr);

  /// Throws InvalidArgument for an empty query and Error("no category
  /// recognized") when the matcher finds nothing.
  PlannerDecision plan(std::string_view query) const;

  const Taxonomy& taxonomy() const { return taxonomy_; }
  const PromptTemplates& templates() const { return templates_; }
  bool has_backend() const { return backend_ != nullptr; }

 private:
  PlannerDecision plan_with_matcher(std::string_view query) const;

  Taxonomy taxonomy_;
  PromptTemplates templates_;
  std::shared_ptr<const net::ChatBackend> backend_;
};

}  // namespace critter::planner
