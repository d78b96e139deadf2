#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace critter::planner {

/// Lower-cased, punctuation stripped, whitespace collapsed.
std::string normalize_text(std::string_view text);
std::vector<std::string> tokenize(std::string_view text);

/// Animal and motion categories plus surface-form aliases.
///
/// Categories are unique within their kind after case folding; every alias
/// resolves to an existing category. A category's own name is always an
/// alias of itself.
class Taxonomy {
 public:
  Taxonomy(std::vector<std::string> animals, std::vector<std::string> motions,
           std::map<std::string, std::string> aliases = {}, std::string fallback_animal = {},
           std::string fallback_motion = {});

  /// The 65 animal categories and the motion vocabulary shipped with the
  /// library.
  static Taxonomy builtin();

  /// {"animals": [...], "motions": [...], "aliases": {surface: category},
  ///  "fallback_animal": "...", "fallback_motion": "..."}
  static Taxonomy from_json(std::string_view text);
  static Taxonomy load(const std::string& path);
  std::string to_json() const;

  const std::vector<std::string>& animals() const { return animals_; }
  const std::vector<std::string>& motions() const { return motions_; }
  const std::map<std::string, std::string>& aliases() const { return aliases_; }

  /// Canonical spelling of an animal/motion category (case-insensitive
  /// lookup on the category name only), or empty.
  std::string canonical_animal(std::string_view name) const;
  std::string canonical_motion(std::string_view name) const;

  /// Used by the matcher when only one side is recognized. Empty disables.
  const std::string& fallback_animal() const { return fallback_animal_; }
  const std::string& fallback_motion() const { return fallback_motion_; }

  // Normalized alias -> category, per kind.
  const std::map<std::string, std::string>& animal_index() const { return animal_index_; }
  const std::map<std::string, std::string>& motion_index() const { return motion_index_; }
  int max_alias_tokens() const { return max_alias_tokens_; }

 private:
  std::vector<std::string> animals_;
  std::vector<std::string> motions_;
  std::map<std::string, std::string> aliases_;
  std::string fallback_animal_;
  std::string fallback_motion_;
  std::map<std::string, std::string> animal_index_;
  std::map<std::string, std::string> motion_index_;
  int max_alias_tokens_ = 1;
};

struct Candidate {
  std::string category;
  std::string alias;  // normalized surface form that matched
  int position = 0;   // token index of the match
  int length = 0;     // tokens in the alias
};

struct MatchResult {
  std::vector<Candidate> animals;  // best first
  std::vector<Candidate> motions;
};

/// Case-insensitive longest-alias match over query n-grams. Candidates are
/// ranked by alias length (tokens, then characters), earliest occurrence,
/// then category name.
MatchResult match_taxonomy(std::string_view query, const Taxonomy& taxonomy);

}  // namespace critter::planner
