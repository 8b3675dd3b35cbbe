#include "grpbench/aggregation.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace grpbench {

std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::ADD: return "ADD";
    case StrategyKind::APP: return "APP";
    case StrategyKind::LMS: return "LMS";
    case StrategyKind::MPL: return "MPL";
  }
  return "?";
}

std::optional<StrategyKind> parse_strategy_kind(std::string_view name) {
  for (auto k : kAllStrategies)
    if (to_string(k) == name) return k;
  return std::nullopt;
}

void StrategySpec::validate(RatingRange range) const {
  if (kind == StrategyKind::APP &&
      (approval_threshold < range.min || approval_threshold > range.max)) {
    throw ConfigError("approval threshold " + std::to_string(approval_threshold) +
                      " outside rating range [" + std::to_string(range.min) + ", " +
                      std::to_string(range.max) + "]");
  }
}

std::vector<Score> score_items(const GroupScenario& scenario, const StrategySpec& strategy) {
  const auto n_items = static_cast<std::size_t>(scenario.num_items);
  std::vector<Score> scores(n_items, 0);
  for (std::size_t i = 0; i < n_items; ++i) {
    Score acc = scenario.at(0, i);
    if (strategy.kind == StrategyKind::APP) acc = scenario.at(0, i) >= strategy.approval_threshold;
    for (std::size_t u = 1; u < scenario.ratings.size(); ++u) {
      const Score r = scenario.at(u, i);
      switch (strategy.kind) {
        case StrategyKind::ADD: acc += r; break;
        case StrategyKind::APP: acc += r >= strategy.approval_threshold; break;
        case StrategyKind::LMS: acc = std::min(acc, r); break;
        case StrategyKind::MPL: acc = std::max(acc, r); break;
      }
    }
    scores[i] = acc;
  }
  return scores;
}

GoldResult gold_label(const GroupScenario& scenario, const StrategySpec& strategy) {
  GoldResult gold;
  gold.scores = score_items(scenario, strategy);
  gold.best = *std::max_element(gold.scores.begin(), gold.scores.end());

  std::vector<std::size_t> order(gold.scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return gold.scores[a] > gold.scores[b]; });

  gold.ranking.reserve(order.size());
  for (auto i : order) gold.ranking.push_back(scenario.item_ids[i]);
  for (std::size_t i = 0; i < gold.scores.size(); ++i)
    if (gold.scores[i] == gold.best) gold.winners.push_back(scenario.item_ids[i]);
  return gold;
}

std::vector<std::string> top_k(const GroupScenario& scenario, const StrategySpec& strategy,
                               int k) {
  if (k < 1 || k > scenario.num_items)
    throw std::invalid_argument("top_k: k=" + std::to_string(k) + " outside [1, " +
                                std::to_string(scenario.num_items) + "]");
  auto ranking = gold_label(scenario, strategy).ranking;
  ranking.resize(static_cast<std::size_t>(k));
  return ranking;
}

}  // namespace grpbench
