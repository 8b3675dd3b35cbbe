#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>

#include <json.hpp>

#include "grpbench/aggregation.hpp"
#include "grpbench/promptkit.hpp"
#include "grpbench/scenario.hpp"

namespace grpbench {

struct DecodeParams {
  double temperature = 0.0;
  int max_tokens = 1024;
};

/// A named model behind a chat-completion HTTP endpoint.
struct ModelEndpoint {
  std::string name;
  std::string base_url = "http://127.0.0.1:11434";
  double timeout_s = 120.0;
  int max_retries = 3;
  DecodeParams decode{};
  int max_in_flight = 1;
  double backoff_initial_s = 1.0;
  double backoff_max_s = 30.0;

  void validate() const;
};

/// Applies GRPBENCH_BASE_URL_<NAME> (name upper-cased, non-alphanumerics as
/// '_') or, failing that, GRPBENCH_BASE_URL to the endpoint's base_url.
ModelEndpoint with_env_overrides(ModelEndpoint endpoint);

enum class TransportStatus { Ok, RetryableFailure, FatalFailure };

std::string_view to_string(TransportStatus status);

struct CompletionResult {
  std::optional<std::string> raw_text;  // present iff status == Ok
  double latency_ms = 0.0;
  int attempt_count = 0;
  TransportStatus status = TransportStatus::FatalFailure;
  int http_status = 0;
  std::string error;  // transport error or preserved response body
};

/// Request body for POST {base_url}/api/chat: one user message, no streaming.
nlohmann::json chat_request_body(const ModelEndpoint& endpoint, std::string_view prompt);

/// Assistant text from a chat response. Accepts {"message":{"content":...}}
/// and the {"choices":[{"message":{"content":...}}]} variant.
std::optional<std::string> extract_chat_content(const nlohmann::json& response);

/// Sends the prompt and retries transient faults (connection errors, timeouts,
/// 429, 5xx) with exponential backoff, max_retries + 1 attempts in total.
/// Other 4xx responses fail immediately with the body kept in `error`.
CompletionResult complete(const ModelEndpoint& endpoint, const PromptBundle& prompt);
CompletionResult complete(const ModelEndpoint& endpoint, std::string_view prompt_text);

// ---------------------------------------------------------------------------
// Mock models

enum class MockKind { PerfectOracle, SingleWinnerOnly, OverRecommender, Amnesiac, MalformedJson };

struct MockPolicy {
  MockKind kind = MockKind::PerfectOracle;
  int extra = 1;              // OverRecommender
  int visible_ratings = 100;  // Amnesiac
  double rate = 0.5;          // MalformedJson
  std::uint64_t seed = 0;

  /// "perfect_oracle", "single_winner_only", "over_recommender:<extra>",
  /// "amnesiac:<visible_ratings>", "malformed_json:<rate>".
  static MockPolicy parse(std::string_view spec);
  static MockPolicy from_json(const nlohmann::json& j);
  std::string label() const;
  nlohmann::ordered_json to_json() const;
};

/// Deterministic offline model. Output is a pure function of
/// (policy, prompt, scenario, strategy). Item names go through the prompt's
/// title map when domain cues are on.
CompletionResult mock_complete(const MockPolicy& policy, const PromptBundle& prompt,
                               const GroupScenario& scenario, const StrategySpec& strategy);

// ---------------------------------------------------------------------------

/// What the runner talks to: a live endpoint or a mock.
class ChatModel {
 public:
  virtual ~ChatModel() = default;
  virtual const std::string& name() const = 0;
  virtual bool is_mock() const = 0;
  virtual nlohmann::ordered_json describe() const = 0;
  virtual CompletionResult complete(const PromptBundle& prompt, const GroupScenario& scenario) = 0;
};

/// Live endpoint with an in-flight cap: at most max_in_flight concurrent
/// requests reach the endpoint, regardless of how many threads call in.
class HttpChatModel final : public ChatModel {
 public:
  explicit HttpChatModel(ModelEndpoint endpoint);
  const std::string& name() const override { return endpoint_.name; }
  bool is_mock() const override { return false; }
  nlohmann::ordered_json describe() const override;
  CompletionResult complete(const PromptBundle& prompt, const GroupScenario& scenario) override;

 private:
  ModelEndpoint endpoint_;
  std::unique_ptr<std::counting_semaphore<>> in_flight_;
};

class MockChatModel final : public ChatModel {
 public:
  MockChatModel(std::string name, MockPolicy policy);
  const std::string& name() const override { return name_; }
  bool is_mock() const override { return true; }
  nlohmann::ordered_json describe() const override;
  CompletionResult complete(const PromptBundle& prompt, const GroupScenario& scenario) override;

 private:
  std::string name_;
  MockPolicy policy_;
};

}  // namespace grpbench
