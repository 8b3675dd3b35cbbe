#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "grpbench/aggregation.hpp"
#include "grpbench/scenario.hpp"

namespace grpbench {

enum class ScenarioFormat { JsonItem, JsonUser, DataframeText };

inline constexpr ScenarioFormat kAllFormats[] = {ScenarioFormat::JsonItem, ScenarioFormat::JsonUser,
                                                 ScenarioFormat::DataframeText};

std::string_view to_string(ScenarioFormat format);
std::optional<ScenarioFormat> parse_scenario_format(std::string_view name);

/// Prompt variant applied on top of the baseline prompt. At most one of the
/// three modifiers is set: the variants are compared against the baseline,
/// never combined. ranked_topk is orthogonal and switches the output contract
/// from "winning items" to "ordered top-k list".
struct PromptCondition {
  bool with_explanation = false;
  bool with_icl = false;
  bool with_domain_cues = false;
  std::optional<int> ranked_topk;

  void validate() const;
  bool is_baseline() const { return !with_explanation && !with_icl && !with_domain_cues; }

  /// "baseline", "explanation", "icl", "domain_cues", with "+top<k>" when ranked.
  std::string label() const;
  static PromptCondition parse(std::string_view label);

  bool operator==(const PromptCondition&) const = default;
};

/// The four conditions of the comparison (baseline plus one modifier each).
std::vector<PromptCondition> standard_conditions(std::optional<int> ranked_topk = std::nullopt);

/// item_id -> display name (movie title). Empty when domain cues are off.
using TitleMap = std::map<std::string, std::string>;

class TitleBank {
 public:
  TitleBank() = default;
  /// Titles are trimmed, blank lines dropped, case-insensitive duplicates and
  /// anything that looks like an anonymous item identifier rejected.
  explicit TitleBank(std::vector<std::string> titles);

  static TitleBank bundled();
  static TitleBank load(const std::filesystem::path& path);

  const std::vector<std::string>& titles() const { return titles_; }
  std::size_t size() const { return titles_.size(); }

  /// Deterministic distinct title per item, sampled with the scenario seed.
  TitleMap assign(const GroupScenario& scenario) const;

 private:
  std::vector<std::string> titles_;
};

struct IclExample {
  GroupScenario scenario;
  GoldResult gold;
};

struct IclBank {
  StrategySpec strategy;
  std::uint64_t seed = 0;
  std::vector<IclExample> examples;

  std::vector<std::string> scenario_ids() const;
};

inline constexpr std::uint64_t kDefaultIclSeed = 0x49434c2d62616e6bULL;

/// Three solved examples (2, 4 and 8 members, 50 items each) under one
/// strategy. Scenarios depend only on the seed, answers on the strategy.
IclBank make_icl_bank(const StrategySpec& strategy, std::uint64_t seed = kDefaultIclSeed,
                      RatingRange range = {});

nlohmann::ordered_json to_json(const IclBank& bank);

struct PromptBundle {
  std::string prompt_text;
  std::string scenario_block;  // the serialized query scenario as embedded
  StrategySpec strategy;
  ScenarioFormat format = ScenarioFormat::JsonItem;
  PromptCondition condition;
  std::string scenario_id;
  std::vector<std::string> icl_example_ids;
  TitleMap title_map;
  int requested_k = 0;  // effective top-k when ranked, else 0
};

/// Copy of the scenario with item ids replaced through the title map.
GroupScenario apply_titles(const GroupScenario& scenario, const TitleMap& titles);

std::string serialize_scenario(const GroupScenario& scenario, ScenarioFormat format);

std::string strategy_explanation(const StrategySpec& strategy);

/// The JSON answer object in the shape the prompt asks for, compact.
std::string format_answer(const StrategySpec& strategy, const std::vector<std::string>& items,
                          const std::optional<std::string>& explanation = std::nullopt);

/// Renders the complete prompt. Throws ConfigError when ICL is requested
/// without a matching bank, or domain cues without enough titles.
PromptBundle build_prompt(const GroupScenario& scenario, const StrategySpec& strategy,
                          ScenarioFormat format, const PromptCondition& condition,
                          const IclBank* icl_bank, const TitleBank* title_bank);

/// Substitutes {name} placeholders. Throws std::invalid_argument on a
/// placeholder without a value.
std::string render_template(std::string_view tpl, const std::map<std::string, std::string>& values);

}  // namespace grpbench
