#include "critter/planner/planner.hpp"

#include <cctype>
#include <sstream>
#include <tuple>

#include "critter/util/error.hpp"

namespace critter::planner {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string substitute(std::string text, std::string_view key, std::string_view value) {
  for (auto pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + value.size())) {
    text.replace(pos, key.size(), value);
  }
  return text;
}

std::size_t find_ci(std::string_view hay, std::string_view needle, std::size_t from) {
  for (std::size_t i = from; i + needle.size() <= hay.size(); ++i) {
    bool ok = true;
    for (std::size_t k = 0; k < needle.size() && ok; ++k) {
      ok = std::tolower(static_cast<unsigned char>(hay[i + k])) == std::tolower(static_cast<unsigned char>(needle[k]));
    }
    if (ok) return i;
  }
  return std::string_view::npos;
}

// Span inside the first {...} at or after `from`; returns the index past '}'.
std::size_t braced_span(std::string_view text, std::size_t from, std::string& out, const char* what) {
  const auto open = text.find('{', from);
  if (open == std::string_view::npos) throw ParseError(std::string("missing '{' for ") + what);
  const auto close = text.find('}', open + 1);
  if (close == std::string_view::npos) throw ParseError(std::string("missing '}' for ") + what);
  out = trim(text.substr(open + 1, close - open - 1));
  if (out.empty()) throw ParseError(std::string("empty braces for ") + what);
  return close + 1;
}

}  // namespace

std::string_view to_string(DecisionSource s) { return s == DecisionSource::kLlm ? "llm" : "matcher"; }

std::pair<std::string, std::string> build_prompts(std::string_view animal, std::string_view motion,
                                                  const PromptTemplates& templates) {
  if (trim(animal).empty() || trim(motion).empty()) throw InvalidArgument("prompts need both an animal and a motion");
  auto fill = [&](const std::string& tpl) {
    return substitute(substitute(tpl, "{animal}", animal), "{motion}", motion);
  };
  return {fill(templates.motion), fill(templates.avatar)};
}

std::string format_planner_output(std::string_view animal, std::string_view motion) {
  return "The animal is {" + std::string(animal) + "}, and motion is {" + std::string(motion) + "}.";
}

std::pair<std::string, std::string> parse_planner_output(std::string_view text) {
  const auto animal_at = find_ci(text, "animal is", 0);
  if (animal_at == std::string_view::npos) throw ParseError("missing 'animal is' in planner output");
  std::string animal;
  const std::size_t after_animal = braced_span(text, animal_at + 9, animal, "the animal");
  const auto motion_at = find_ci(text, "motion is", after_animal);
  if (motion_at == std::string_view::npos) throw ParseError("missing 'motion is' in planner output");
  std::string motion;
  braced_span(text, motion_at + 9, motion, "the motion");
  return {animal, motion};
}

std::string planner_system_prompt(const Taxonomy& taxonomy) {
  std::ostringstream os;
  os << "You identify which animal and which motion a user is describing. "
        "Reply with exactly one sentence of the form: The animal is {X}, and motion is {Y}.\n"
        "Animal categories: ";
  for (std::size_t i = 0; i < taxonomy.animals().size(); ++i) os << (i ? ", " : "") << taxonomy.animals()[i];
  os << "\nMotion categories: ";
  for (std::size_t i = 0; i < taxonomy.motions().size(); ++i) os << (i ? ", " : "") << taxonomy.motions()[i];
  return os.str();
}

Planner::Planner(Taxonomy taxonomy, PromptTemplates templates, std::shared_ptr<const net::ChatBackend> backend)
    : taxonomy_(std::move(taxonomy)), templates_(std::move(templates)), backend_(std::move(backend)) {}

PlannerDecision Planner::plan(std::string_view query) const {
  if (trim(query).empty()) throw InvalidArgument("empty query");
  if (!backend_) return plan_with_matcher(query);

  std::string reason;
  std::optional<std::string> raw;
  try {
    raw = backend_->complete({{"system", planner_system_prompt(taxonomy_)}, {"user", std::string(query)}});
    const auto [animal, motion] = parse_planner_output(*raw);
    const std::string a = taxonomy_.canonical_animal(animal);
    const std::string m = taxonomy_.canonical_motion(motion);
    if (a.empty() || m.empty()) {
      reason = "category outside taxonomy: " + (a.empty() ? animal : motion);
    } else {
      PlannerDecision d;
      d.animal = a;
      d.motion = m;
      std::tie(d.motion_prompt, d.avatar_prompt) = build_prompts(a, m, templates_);
      d.source = DecisionSource::kLlm;
      d.raw_backend_text = raw;
      return d;
    }
  } catch (const Error& e) {
    reason = e.what();
  }
  PlannerDecision d = plan_with_matcher(query);
  d.raw_backend_text = raw;
  d.fallback_reason = reason;
  return d;
}

PlannerDecision Planner::plan_with_matcher(std::string_view query) const {
  const MatchResult match = match_taxonomy(query, taxonomy_);
  if (match.animals.empty() && match.motions.empty()) throw Error("no category recognized in query");
  std::string animal = match.animals.empty() ? taxonomy_.fallback_animal() : match.animals.front().category;
  std::string motion = match.motions.empty() ? taxonomy_.fallback_motion() : match.motions.front().category;
  if (animal.empty() || motion.empty()) {
    throw Error(std::string("no ") + (animal.empty() ? "animal" : "motion") + " category recognized in query");
  }
  PlannerDecision d;
  d.animal = std::move(animal);
  d.motion = std::move(motion);
  std::tie(d.motion_prompt, d.avatar_prompt) = build_prompts(d.animal, d.motion, templates_);
  d.source = DecisionSource::kMatcher;
  return d;
}

}  // namespace critter::planner
