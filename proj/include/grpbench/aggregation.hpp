#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "grpbench/scenario.hpp"

namespace grpbench {

enum class StrategyKind { ADD, APP, LMS, MPL };

inline constexpr StrategyKind kAllStrategies[] = {StrategyKind::ADD, StrategyKind::APP,
                                                  StrategyKind::LMS, StrategyKind::MPL};

std::string_view to_string(StrategyKind kind);
std::optional<StrategyKind> parse_strategy_kind(std::string_view name);

struct StrategySpec {
  StrategyKind kind = StrategyKind::ADD;
  // Minimum rating that counts as an approval. Only meaningful for APP.
  Rating approval_threshold = 7;

  void validate(RatingRange range = {}) const;
  bool operator==(const StrategySpec&) const = default;
};

using Score = long long;

struct GoldResult {
  std::vector<std::string> winners;  // tie set, in item order
  std::vector<Score> scores;         // indexed like scenario.item_ids
  std::vector<std::string> ranking;  // score desc, item index asc
  Score best = 0;
};

/// Per-item aggregate score, indexed like scenario.item_ids.
///   ADD: sum of ratings, APP: count of ratings >= threshold,
///   LMS: minimum rating, MPL: maximum rating.
std::vector<Score> score_items(const GroupScenario& scenario, const StrategySpec& strategy);

GoldResult gold_label(const GroupScenario& scenario, const StrategySpec& strategy);

/// First k entries of the strategy-induced ranking. Throws std::invalid_argument
/// unless 1 <= k <= num_items.
std::vector<std::string> top_k(const GroupScenario& scenario, const StrategySpec& strategy,
                               int k);

}  // namespace grpbench
