#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "grpbench/promptkit.hpp"
#include "grpbench/scenario.hpp"

namespace grpbench {

enum class ParseFailure { None, NoJsonFound, MissingKeys, UnknownItems, EmptyList };

std::string_view to_string(ParseFailure failure);
std::optional<ParseFailure> parse_failure_from_string(std::string_view name);

struct ParsedRecommendation {
  std::optional<std::string> strategy_echo;
  /// Canonical item ids, de-duplicated, in the order the model gave them.
  /// With unknown names present this holds only the recognised ones.
  std::vector<std::string> items;
  /// The model's list as emitted, one entry per position: canonical id when
  /// recognised, the raw name otherwise. Duplicates kept. Used for NDCG.
  std::vector<std::string> positional_items;
  std::vector<std::string> unknown_items;
  std::optional<std::string> explanation_text;
  ParseFailure failure = ParseFailure::NoJsonFound;
  bool had_duplicates = false;
  /// Unknown names within edit distance 2 of a known name.
  int near_miss_count = 0;

  bool ok() const { return failure == ParseFailure::None; }
};

/// Finds the first JSON object in the text that carries a "recommendation"
/// key (markdown fences and surrounding prose are skipped over) and maps the
/// names in it onto scenario item ids, case-insensitively. When `titles` is
/// non-empty the names are matched against the titles instead. Malformed JSON
/// is not repaired.
ParsedRecommendation parse_response(std::string_view raw_text, const GroupScenario& scenario,
                                    const TitleMap& titles = {});

/// Levenshtein distance; exposed for the near-miss count.
std::size_t edit_distance(std::string_view a, std::string_view b);

}  // namespace grpbench
