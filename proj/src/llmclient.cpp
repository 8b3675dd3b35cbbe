#include "grpbench/llmclient.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <thread>

#include <httplib.h>

// <arpa/nameser_compat.h> (via httplib) defines ADD, which collides with StrategyKind::ADD.
#undef ADD

namespace grpbench {

namespace {

struct ParsedUrl {
  std::string host;
  int port = 80;
  std::string path_prefix;
};

ParsedUrl parse_base_url(const std::string& url) {
  constexpr std::string_view scheme = "http://";
  if (url.rfind(scheme, 0) != 0)
    throw ConfigError("endpoint base_url must start with http:// (got '" + url + "')");
  std::string rest = url.substr(scheme.size());
  ParsedUrl out;
  if (auto slash = rest.find('/'); slash != std::string::npos) {
    out.path_prefix = rest.substr(slash);
    rest = rest.substr(0, slash);
    while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
  }
  if (auto colon = rest.rfind(':'); colon != std::string::npos) {
    try {
      out.port = std::stoi(rest.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("bad port in base_url '" + url + "'");
    }
    rest = rest.substr(0, colon);
  }
  if (rest.empty()) throw ConfigError("missing host in base_url '" + url + "'");
  out.host = rest;
  return out;
}

bool retryable_http(int status) { return status == 408 || status == 429 || status >= 500; }

std::chrono::duration<double> backoff_delay(const ModelEndpoint& e, int failed_attempts) {
  const double d = e.backoff_initial_s * std::pow(2.0, failed_attempts - 1);
  return std::chrono::duration<double>(std::min(d, e.backoff_max_s));
}

}  // namespace

void ModelEndpoint::validate() const {
  if (name.empty()) throw ConfigError("endpoint name must be non-empty");
  if (!(timeout_s > 0)) throw ConfigError("endpoint '" + name + "': timeout must be > 0");
  if (max_retries < 0) throw ConfigError("endpoint '" + name + "': max_retries must be >= 0");
  if (max_in_flight < 1) throw ConfigError("endpoint '" + name + "': max_in_flight must be >= 1");
  if (decode.max_tokens < 1) throw ConfigError("endpoint '" + name + "': max_tokens must be >= 1");
  if (backoff_initial_s < 0 || backoff_max_s < 0)
    throw ConfigError("endpoint '" + name + "': backoff must be >= 0");
  parse_base_url(base_url);
}

ModelEndpoint with_env_overrides(ModelEndpoint endpoint) {
  std::string var = "GRPBENCH_BASE_URL_";
  for (unsigned char c : endpoint.name)
    var += std::isalnum(c) ? static_cast<char>(std::toupper(c)) : '_';
  if (const char* v = std::getenv(var.c_str()); v && *v) {
    endpoint.base_url = v;
  } else if (const char* g = std::getenv("GRPBENCH_BASE_URL"); g && *g) {
    endpoint.base_url = g;
  }
  return endpoint;
}

std::string_view to_string(TransportStatus status) {
  switch (status) {
    case TransportStatus::Ok: return "ok";
    case TransportStatus::RetryableFailure: return "retryable_failure";
    case TransportStatus::FatalFailure: return "fatal_failure";
  }
  return "?";
}

nlohmann::json chat_request_body(const ModelEndpoint& endpoint, std::string_view prompt) {
  return {
      {"model", endpoint.name},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
      {"stream", false},
      {"options", {{"temperature", endpoint.decode.temperature},
                   {"num_predict", endpoint.decode.max_tokens}}},
  };
}

std::optional<std::string> extract_chat_content(const nlohmann::json& response) {
  if (!response.is_object()) return std::nullopt;
  const nlohmann::json* message = nullptr;
  if (auto it = response.find("message"); it != response.end()) {
    message = &*it;
  } else if (auto ch = response.find("choices");
             ch != response.end() && ch->is_array() && !ch->empty() && (*ch)[0].is_object()) {
    if (auto m = (*ch)[0].find("message"); m != (*ch)[0].end()) message = &*m;
  }
  if (message == nullptr || !message->is_object()) return std::nullopt;
  auto content = message->find("content");
  if (content == message->end() || !content->is_string()) return std::nullopt;
  return content->get<std::string>();
}

CompletionResult complete(const ModelEndpoint& endpoint, const PromptBundle& prompt) {
  return complete(endpoint, prompt.prompt_text);
}

CompletionResult complete(const ModelEndpoint& endpoint, std::string_view prompt_text) {
  endpoint.validate();
  const auto url = parse_base_url(endpoint.base_url);
  const auto body = chat_request_body(endpoint, prompt_text).dump();
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::duration<double>(endpoint.timeout_s));

  httplib::Client client(url.host, url.port);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  CompletionResult result;
  const auto start = std::chrono::steady_clock::now();
  const int max_attempts = endpoint.max_retries + 1;

  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    result.attempt_count = attempt;
    auto res = client.Post(url.path_prefix + "/api/chat", body, "application/json");

    if (!res) {
      result.status = TransportStatus::RetryableFailure;
      result.http_status = 0;
      result.error = "transport error: " + httplib::to_string(res.error());
    } else if (res->status >= 200 && res->status < 300) {
      auto parsed = nlohmann::json::parse(res->body, nullptr, false);
      auto text = parsed.is_discarded() ? std::nullopt : extract_chat_content(parsed);
      result.http_status = res->status;
      if (text) {
        result.status = TransportStatus::Ok;
        result.raw_text = std::move(text);
        result.error.clear();
      } else {
        result.status = TransportStatus::FatalFailure;
        result.error = "unexpected response body: " + res->body;
      }
      break;
    } else {
      result.http_status = res->status;
      result.error = res->body;
      result.status =
          retryable_http(res->status) ? TransportStatus::RetryableFailure : TransportStatus::FatalFailure;
      if (result.status == TransportStatus::FatalFailure) break;
    }

    if (attempt < max_attempts) std::this_thread::sleep_for(backoff_delay(endpoint, attempt));
  }

  // Retries exhausted.
  if (result.status == TransportStatus::RetryableFailure) result.status = TransportStatus::FatalFailure;

  result.latency_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return result;
}

// ---------------------------------------------------------------------------

MockPolicy MockPolicy::parse(std::string_view spec) {
  MockPolicy p;
  std::string name(spec);
  std::string arg;
  if (auto colon = spec.find(':'); colon != std::string_view::npos) {
    name = std::string(spec.substr(0, colon));
    arg = std::string(spec.substr(colon + 1));
  }
  auto need_arg = [&](auto convert) {
    if (arg.empty()) throw ConfigError("mock policy '" + name + "' needs an argument");
    try {
      std::size_t used = 0;
      auto v = convert(arg, &used);
      if (used != arg.size()) throw std::invalid_argument(arg);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("bad argument for mock policy '" + name + "': " + arg);
    }
  };
  auto to_int = [](const std::string& s, std::size_t* used) { return std::stoi(s, used); };
  auto to_double = [](const std::string& s, std::size_t* used) { return std::stod(s, used); };

  if (name == "perfect_oracle") {
    p.kind = MockKind::PerfectOracle;
  } else if (name == "single_winner_only") {
    p.kind = MockKind::SingleWinnerOnly;
  } else if (name == "over_recommender") {
    p.kind = MockKind::OverRecommender;
    p.extra = arg.empty() ? 1 : need_arg(to_int);
  } else if (name == "amnesiac") {
    p.kind = MockKind::Amnesiac;
    p.visible_ratings = need_arg(to_int);
  } else if (name == "malformed_json") {
    p.kind = MockKind::MalformedJson;
    p.rate = arg.empty() ? 0.5 : need_arg(to_double);
  } else {
    throw ConfigError("unknown mock policy '" + name + "'");
  }
  if (p.extra < 0 || p.visible_ratings < 0 || p.rate < 0.0 || p.rate > 1.0)
    throw ConfigError("mock policy argument out of range: " + std::string(spec));
  if (!arg.empty() && (p.kind == MockKind::PerfectOracle || p.kind == MockKind::SingleWinnerOnly))
    throw ConfigError("mock policy '" + name + "' takes no argument");
  return p;
}

MockPolicy MockPolicy::from_json(const nlohmann::json& j) {
  if (j.is_string()) return parse(j.get<std::string>());
  if (!j.is_object() || !j.contains("policy") || !j["policy"].is_string())
    throw ConfigError("mock policy must be a string or an object with a \"policy\" key");
  MockPolicy p = parse(j["policy"].get<std::string>());
  try {
    if (j.contains("extra")) p.extra = j["extra"].get<int>();
    if (j.contains("visible_ratings")) p.visible_ratings = j["visible_ratings"].get<int>();
    if (j.contains("rate")) p.rate = j["rate"].get<double>();
    if (j.contains("seed")) p.seed = j["seed"].get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad mock policy field: ") + e.what());
  }
  if (p.extra < 0 || p.visible_ratings < 0 || p.rate < 0.0 || p.rate > 1.0)
    throw ConfigError("mock policy argument out of range");
  return p;
}

std::string MockPolicy::label() const {
  switch (kind) {
    case MockKind::PerfectOracle: return "perfect_oracle";
    case MockKind::SingleWinnerOnly: return "single_winner_only";
    case MockKind::OverRecommender: return "over_recommender:" + std::to_string(extra);
    case MockKind::Amnesiac: return "amnesiac:" + std::to_string(visible_ratings);
    case MockKind::MalformedJson: {
      std::ostringstream os;
      os << "malformed_json:" << rate;
      return os.str();
    }
  }
  return "?";
}

nlohmann::ordered_json MockPolicy::to_json() const {
  nlohmann::ordered_json j;
  j["policy"] = label();
  j["seed"] = seed;
  return j;
}

namespace {

Score aggregate(const std::vector<Rating>& values, const StrategySpec& strategy) {
  Score acc = strategy.kind == StrategyKind::APP ? 0 : values.front();
  for (std::size_t k = 0; k < values.size(); ++k) {
    const Score r = values[k];
    switch (strategy.kind) {
      case StrategyKind::ADD: if (k) acc += r; break;
      case StrategyKind::APP: acc += r >= strategy.approval_threshold; break;
      case StrategyKind::LMS: acc = std::min(acc, r); break;
      case StrategyKind::MPL: acc = std::max(acc, r); break;
    }
  }
  return acc;
}

struct Choice {
  std::vector<std::string> winners;
  std::vector<std::string> ranking;
};

// The strategy applied to the first `visible` ratings in per-item reading
// order (all of item_1's ratings, then item_2's, ...). Items with no visible
// rating are never winners and rank last in index order.
Choice truncated_choice(const GroupScenario& s, const StrategySpec& strategy, long long visible) {
  const auto g = static_cast<long long>(s.group_size);
  std::vector<std::pair<Score, std::size_t>> seen;
  std::vector<std::size_t> hidden;
  for (std::size_t i = 0; i < s.item_ids.size(); ++i) {
    const long long shown = std::clamp(visible - static_cast<long long>(i) * g, 0LL, g);
    if (shown == 0) {
      hidden.push_back(i);
      continue;
    }
    std::vector<Rating> values;
    for (long long u = 0; u < shown; ++u) values.push_back(s.at(static_cast<std::size_t>(u), i));
    seen.emplace_back(aggregate(values, strategy), i);
  }
  std::stable_sort(seen.begin(), seen.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  Choice c;
  for (const auto& [score, i] : seen) {
    if (score == seen.front().first) c.winners.push_back(s.item_ids[i]);
    c.ranking.push_back(s.item_ids[i]);
  }
  std::sort(c.winners.begin(), c.winners.end(), [&](const auto& a, const auto& b) {
    return std::find(s.item_ids.begin(), s.item_ids.end(), a) <
           std::find(s.item_ids.begin(), s.item_ids.end(), b);
  });
  for (auto i : hidden) c.ranking.push_back(s.item_ids[i]);
  return c;
}

std::uint64_t mock_draw_seed(const MockPolicy& policy, const PromptBundle& prompt) {
  return mix_seed(policy.seed, stable_hash(prompt.scenario_id + "|" + prompt.condition.label() + "|" +
                                           std::string(to_string(prompt.format))));
}

}  // namespace

CompletionResult mock_complete(const MockPolicy& policy, const PromptBundle& prompt,
                               const GroupScenario& scenario, const StrategySpec& strategy) {
  const auto gold = gold_label(scenario, strategy);
  const bool ranked = prompt.requested_k > 0;
  auto head = [](std::vector<std::string> v, std::size_t n) {
    if (v.size() > n) v.resize(n);
    return v;
  };
  const auto k = static_cast<std::size_t>(prompt.requested_k);

  std::vector<std::string> items;
  switch (policy.kind) {
    case MockKind::PerfectOracle:
    case MockKind::MalformedJson:
      items = ranked ? head(gold.ranking, k) : gold.winners;
      break;
    case MockKind::SingleWinnerOnly: {
      SeededRng rng(mock_draw_seed(policy, prompt));
      items = {gold.winners[static_cast<std::size_t>(
          rng.uniform(0, static_cast<std::int64_t>(gold.winners.size()) - 1))]};
      break;
    }
    case MockKind::OverRecommender: {
      items = ranked ? head(gold.ranking, k) : gold.winners;
      // Next-best items from the ranking that are not already listed.
      int added = 0;
      for (const auto& id : gold.ranking) {
        if (added == policy.extra) break;
        if (std::find(items.begin(), items.end(), id) != items.end()) continue;
        items.push_back(id);
        ++added;
      }
      break;
    }
    case MockKind::Amnesiac: {
      auto c = truncated_choice(scenario, strategy, policy.visible_ratings);
      items = ranked ? head(c.ranking, k) : c.winners;
      break;
    }
  }

  if (!prompt.title_map.empty())
    for (auto& id : items) id = prompt.title_map.at(id);

  std::optional<std::string> explanation;
  if (prompt.condition.with_explanation)
    explanation = "Applying " + std::string(to_string(strategy.kind)) +
                  " to every option gives the recommended choice.";
  std::string text = format_answer(strategy, items, explanation);

  if (policy.kind == MockKind::MalformedJson) {
    SeededRng rng(mix_seed(mock_draw_seed(policy, prompt), 0x6d616cULL));
    if (rng.unit() < policy.rate) {
      switch (rng.uniform(0, 2)) {
        case 0: text = text.substr(0, text.size() / 2); break;  // truncated object
        case 1: text = "I think the group should go with " + items.front() + "."; break;
        default: text = "{\"strategy\": \"" + std::string(to_string(strategy.kind)) + "\"}"; break;
      }
    } else if (rng.uniform(0, 1) == 0) {
      text = "```json\n" + text + "\n```";
    } else {
      text = "Here is the result of applying the strategy:\n" + text + "\nHope this helps!";
    }
  }

  CompletionResult r;
  r.status = TransportStatus::Ok;
  r.raw_text = std::move(text);
  r.attempt_count = 1;
  r.http_status = 200;
  return r;
}

// ---------------------------------------------------------------------------

HttpChatModel::HttpChatModel(ModelEndpoint endpoint)
    : endpoint_(std::move(endpoint)),
      in_flight_(std::make_unique<std::counting_semaphore<>>(endpoint_.max_in_flight)) {
  endpoint_.validate();
}

nlohmann::ordered_json HttpChatModel::describe() const {
  nlohmann::ordered_json j;
  j["name"] = endpoint_.name;
  j["base_url"] = endpoint_.base_url;
  j["timeout_s"] = endpoint_.timeout_s;
  j["max_retries"] = endpoint_.max_retries;
  j["max_in_flight"] = endpoint_.max_in_flight;
  j["temperature"] = endpoint_.decode.temperature;
  j["max_tokens"] = endpoint_.decode.max_tokens;
  return j;
}

CompletionResult HttpChatModel::complete(const PromptBundle& prompt, const GroupScenario&) {
  in_flight_->acquire();
  struct Release {
    std::counting_semaphore<>& s;
    ~Release() { s.release(); }
  } release{*in_flight_};
  return grpbench::complete(endpoint_, prompt);
}

MockChatModel::MockChatModel(std::string name, MockPolicy policy)
    : name_(std::move(name)), policy_(policy) {
  if (name_.empty()) throw ConfigError("mock model name must be non-empty");
}

nlohmann::ordered_json MockChatModel::describe() const {
  nlohmann::ordered_json j;
  j["name"] = name_;
  j["mock"] = policy_.to_json();
  return j;
}

CompletionResult MockChatModel::complete(const PromptBundle& prompt, const GroupScenario& scenario) {
  return mock_complete(policy_, prompt, scenario, prompt.strategy);
}

}  // namespace grpbench
