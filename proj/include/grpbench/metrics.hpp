#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "grpbench/aggregation.hpp"
#include "grpbench/llmclient.hpp"
#include "grpbench/parser.hpp"
#include "grpbench/promptkit.hpp"
#include "grpbench/scenario.hpp"

namespace grpbench {

/// Parse failures plus the transport outcome, as stored in records.
enum class FailureCategory { None, NoJsonFound, MissingKeys, UnknownItems, EmptyList, TransportFailure };

std::string_view to_string(FailureCategory f);
FailureCategory failure_category_from_string(std::string_view name);
FailureCategory to_category(ParseFailure f);

enum class NdcgRelevance {
  Graded,  // relevance = the strategy's aggregate score
  Binary,  // relevance = 1 for members of the oracle top-k, else 0
};

std::string_view to_string(NdcgRelevance mode);
NdcgRelevance ndcg_relevance_from_string(std::string_view name);

/// One scenario x model x condition x format outcome.
struct EvalRecord {
  std::string scenario_id;
  std::string model;
  StrategyKind strategy = StrategyKind::ADD;
  std::optional<Rating> approval_threshold;  // set for APP only
  std::string condition;
  std::string format;
  int group_size = 0;
  int num_items = 0;
  int complexity = 0;
  std::vector<std::string> parsed_items;
  std::vector<std::string> gold_winners;
  bool correct = false;
  int list_length = 0;
  std::optional<double> ndcg5;
  std::optional<double> ndcg10;
  FailureCategory failure = FailureCategory::None;
  std::vector<std::string> unknown_items;
  int near_miss_count = 0;
  bool duplicate_items = false;
  double latency_ms = 0.0;
  int attempts = 0;
  std::string transport_error;
  std::optional<std::string> explanation;
  std::string raw_text;

  /// Unique cell key within a run.
  std::string key() const;
};

nlohmann::ordered_json to_json(const EvalRecord& r);
EvalRecord record_from_json(const nlohmann::json& j);

/// True iff parsing succeeded and the parsed items share at least one item
/// with the gold tie set.
bool overlap_correct(const ParsedRecommendation& parsed, const GoldResult& gold);

/// NDCG@k of a ranked list against the strategy's scores. Positions beyond k
/// are ignored; unknown and repeated items score 0 at their position. The
/// ideal DCG uses the k best scores, so it does not depend on tie order.
/// When the ideal DCG is 0 every ordering ties: a list whose first min(k, n)
/// entries are distinct scenario items scores 1, anything else 0.
double ndcg_at_k(const std::vector<std::string>& ranked, const GroupScenario& scenario,
                 const StrategySpec& strategy, int k, NdcgRelevance mode = NdcgRelevance::Graded);

/// Scores one completion. NDCG is filled in only for ranked prompts; a failed
/// completion or unparseable reply scores NDCG 0.
EvalRecord evaluate_completion(const GroupScenario& scenario, const PromptBundle& prompt,
                               const std::string& model, const CompletionResult& completion,
                               NdcgRelevance mode = NdcgRelevance::Graded);

struct ListLengthStats {
  std::string model;
  int n = 0;  // failure-free records
  double mean = 0.0;
  double sd = 0.0;  // population
  double gold_mean = 0.0;
  double gold_sd = 0.0;
};

/// Per-model list-length mean/SD over failure-free records, each with the
/// gold tie-set size over the same records. Sorted by model name. Throws
/// std::invalid_argument on empty input.
std::vector<ListLengthStats> list_length_stats(const std::vector<EvalRecord>& records);

/// Gold tie-set size over the distinct scenarios in the records.
ListLengthStats gold_list_length(const std::vector<EvalRecord>& records);

inline constexpr std::string_view kGroupingKeys[] = {"model",  "complexity", "strategy", "condition",
                                                     "format", "group_size", "num_items"};

struct MetricsSummary {
  std::vector<std::pair<std::string, std::string>> key;
  int n = 0;
  int n_correct = 0;
  double accuracy = 0.0;
  int n_parsed = 0;
  double mean_list_length = 0.0;
  double sd_list_length = 0.0;
  int n_ndcg = 0;
  std::optional<double> mean_ndcg5;
  std::optional<double> mean_ndcg10;
  std::map<std::string, int> failures;  // category -> count, "none" excluded

  double failure_rate() const;
  std::string key_value(std::string_view name) const;
};

/// One row per distinct key tuple, ordered by key (complexity and sizes
/// numerically). Throws std::invalid_argument on an unknown key or empty input.
std::vector<MetricsSummary> summarize(const std::vector<EvalRecord>& records,
                                      const std::vector<std::string>& keys);

/// Sort by (scenario_id, model, condition, format).
void canonical_sort(std::vector<EvalRecord>& records);

std::vector<EvalRecord> read_records_jsonl(const std::filesystem::path& path);

}  // namespace grpbench
