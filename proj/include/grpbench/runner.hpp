#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "grpbench/aggregation.hpp"
#include "grpbench/llmclient.hpp"
#include "grpbench/metrics.hpp"
#include "grpbench/promptkit.hpp"
#include "grpbench/scenario.hpp"

namespace grpbench {

inline constexpr std::string_view kToolVersion = "0.1.0";

/// Process exit codes shared by the CLI verbs.
enum ExitCode : int {
  kExitOk = 0,
  kExitUnexpected = 1,
  kExitConfigError = 2,
  kExitTransportExhausted = 3,
  kExitEmptyReport = 4,
};

/// A live endpoint or a mock policy, under one model name.
struct EndpointConfig {
  std::string name;
  std::optional<ModelEndpoint> http;
  std::optional<MockPolicy> mock;

  std::unique_ptr<ChatModel> instantiate() const;
};

struct RunConfig {
  // Exactly one of the two corpus sources.
  std::optional<std::filesystem::path> corpus_path;
  std::optional<CorpusConfig> corpus_config;

  std::vector<EndpointConfig> endpoints;
  std::vector<PromptCondition> conditions{PromptCondition{}};
  std::vector<ScenarioFormat> formats{ScenarioFormat::JsonItem};
  std::uint64_t strategy_seed = 1;
  Rating approval_threshold = 7;
  std::uint64_t icl_seed = kDefaultIclSeed;
  std::optional<std::filesystem::path> titles_path;
  NdcgRelevance ndcg_relevance = NdcgRelevance::Graded;
  std::filesystem::path output_dir = "results";
  bool resume = false;
  // Non-baseline cells (other conditions, other formats, ranked prompts) run
  // only on scenarios with sweep_items items unless full_sweep is set.
  bool full_sweep = false;
  int sweep_items = 50;
  int workers = 1;

  void validate() const;
  static RunConfig from_json(const nlohmann::json& j);
  /// Reads a run config file, or the config snapshot inside a run manifest.
  static RunConfig load(const std::filesystem::path& path);
  nlohmann::ordered_json to_json() const;
};

/// Uniform, independent draw of one of the four strategies per scenario,
/// keyed on (seed, scenario_id) so it does not depend on corpus order.
std::map<std::string, StrategySpec> assign_strategies(const std::vector<GroupScenario>& corpus,
                                                      std::uint64_t seed, Rating approval_threshold = 7);

struct RunManifest {
  nlohmann::ordered_json config;
  std::string tool_version{kToolVersion};
  std::uint64_t corpus_fingerprint = 0;
  int corpus_size = 0;
  std::map<std::string, std::string> strategies;  // scenario_id -> "ADD" / "APP"
  std::map<std::string, std::vector<std::string>> icl_bank_ids;
  std::vector<nlohmann::ordered_json> models;
  std::string started_at;
  std::string finished_at;

  nlohmann::ordered_json to_json() const;
};

struct RunOutcome {
  std::filesystem::path results_path;
  std::filesystem::path manifest_path;
  RunManifest manifest;
  int cells_total = 0;
  int records_written = 0;
  int records_skipped = 0;  // already present when resuming
  int transport_failures = 0;
  bool interrupted = false;
};

struct RunHooks {
  /// Stop after this many new cells without finalising, as if killed.
  std::optional<int> stop_after;
  /// Models to use instead of instantiating config.endpoints (same order).
  std::vector<std::shared_ptr<ChatModel>> models;
};

/// Runs every selected (scenario x endpoint x condition x format) cell and
/// appends one EvalRecord per cell to <output_dir>/results.jsonl, flushing as
/// it goes. On completion the file is rewritten in cell order, so serial and
/// parallel runs produce identical bytes. Throws ConfigError before any model
/// call when the configuration is invalid.
RunOutcome run(const RunConfig& config, const RunHooks& hooks = {});

/// Loads the corpus named by the config (generating it if inline).
std::vector<GroupScenario> load_corpus(const RunConfig& config);

// ---------------------------------------------------------------------------
// Reports

class EmptyReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ReportOptions {
  std::vector<int> focus_complexities{100, 200, 400};
  int focus_items = 50;
};

struct ReportTable {
  std::string name;   // file stem
  std::string title;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string to_csv() const;
  std::string to_markdown() const;
};

/// Builds every report table from the records. Throws EmptyReportError when
/// there are no records.
std::vector<ReportTable> build_report(const std::vector<EvalRecord>& records,
                                      const ReportOptions& options = {});

/// Writes <name>.csv and <name>.md per table plus a combined report.md.
/// Returns the written paths.
std::vector<std::filesystem::path> report(const std::filesystem::path& results_path,
                                          const std::filesystem::path& out_dir,
                                          const ReportOptions& options = {});

}  // namespace grpbench
