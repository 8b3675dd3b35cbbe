#include "grpbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace grpbench {

namespace {

constexpr FailureCategory kAllCategories[] = {
    FailureCategory::None,         FailureCategory::NoJsonFound, FailureCategory::MissingKeys,
    FailureCategory::UnknownItems, FailureCategory::EmptyList,   FailureCategory::TransportFailure};

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
};

MeanSd population_stats(const std::vector<double>& xs) {
  MeanSd out;
  if (xs.empty()) return out;
  double sum = 0.0;
  for (double x : xs) sum += x;
  out.mean = sum / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - out.mean) * (x - out.mean);
  out.sd = std::sqrt(ss / static_cast<double>(xs.size()));
  return out;
}

bool numeric_key(std::string_view key) {
  return key == "complexity" || key == "group_size" || key == "num_items";
}

std::string key_of(const EvalRecord& r, std::string_view key) {
  if (key == "model") return r.model;
  if (key == "complexity") return std::to_string(r.complexity);
  if (key == "strategy") return std::string(to_string(r.strategy));
  if (key == "condition") return r.condition;
  if (key == "format") return r.format;
  if (key == "group_size") return std::to_string(r.group_size);
  if (key == "num_items") return std::to_string(r.num_items);
  throw std::invalid_argument("unknown grouping key '" + std::string(key) + "'");
}

}  // namespace

std::string_view to_string(FailureCategory f) {
  switch (f) {
    case FailureCategory::None: return "none";
    case FailureCategory::NoJsonFound: return "no_json_found";
    case FailureCategory::MissingKeys: return "missing_keys";
    case FailureCategory::UnknownItems: return "unknown_items";
    case FailureCategory::EmptyList: return "empty_list";
    case FailureCategory::TransportFailure: return "transport_failure";
  }
  return "?";
}

FailureCategory failure_category_from_string(std::string_view name) {
  for (auto f : kAllCategories)
    if (to_string(f) == name) return f;
  throw std::invalid_argument("unknown failure category '" + std::string(name) + "'");
}

FailureCategory to_category(ParseFailure f) {
  switch (f) {
    case ParseFailure::None: return FailureCategory::None;
    case ParseFailure::NoJsonFound: return FailureCategory::NoJsonFound;
    case ParseFailure::MissingKeys: return FailureCategory::MissingKeys;
    case ParseFailure::UnknownItems: return FailureCategory::UnknownItems;
    case ParseFailure::EmptyList: return FailureCategory::EmptyList;
  }
  return FailureCategory::NoJsonFound;
}

std::string_view to_string(NdcgRelevance mode) {
  return mode == NdcgRelevance::Graded ? "graded" : "binary";
}

NdcgRelevance ndcg_relevance_from_string(std::string_view name) {
  if (name == "graded") return NdcgRelevance::Graded;
  if (name == "binary") return NdcgRelevance::Binary;
  throw ConfigError("unknown NDCG relevance mode '" + std::string(name) + "'");
}

std::string EvalRecord::key() const {
  return scenario_id + "|" + model + "|" + condition + "|" + format;
}

nlohmann::ordered_json to_json(const EvalRecord& r) {
  nlohmann::ordered_json j;
  j["scenario_id"] = r.scenario_id;
  j["model"] = r.model;
  j["strategy"] = to_string(r.strategy);
  j["approval_threshold"] = r.approval_threshold ? nlohmann::ordered_json(*r.approval_threshold)
                                                 : nlohmann::ordered_json(nullptr);
  j["condition"] = r.condition;
  j["format"] = r.format;
  j["group_size"] = r.group_size;
  j["num_items"] = r.num_items;
  j["complexity"] = r.complexity;
  j["parsed_items"] = r.parsed_items;
  j["gold_winners"] = r.gold_winners;
  j["correct"] = r.correct;
  j["list_length"] = r.list_length;
  j["ndcg5"] = r.ndcg5 ? nlohmann::ordered_json(*r.ndcg5) : nlohmann::ordered_json(nullptr);
  j["ndcg10"] = r.ndcg10 ? nlohmann::ordered_json(*r.ndcg10) : nlohmann::ordered_json(nullptr);
  j["failure"] = to_string(r.failure);
  j["unknown_items"] = r.unknown_items;
  j["near_miss_count"] = r.near_miss_count;
  j["duplicate_items"] = r.duplicate_items;
  j["latency_ms"] = r.latency_ms;
  j["attempts"] = r.attempts;
  j["transport_error"] = r.transport_error;
  j["explanation"] = r.explanation ? nlohmann::ordered_json(*r.explanation)
                                   : nlohmann::ordered_json(nullptr);
  j["raw_text"] = r.raw_text;
  return j;
}

EvalRecord record_from_json(const nlohmann::json& j) {
  EvalRecord r;
  try {
    j.at("scenario_id").get_to(r.scenario_id);
    j.at("model").get_to(r.model);
    auto kind = parse_strategy_kind(j.at("strategy").get<std::string>());
    if (!kind) throw std::invalid_argument("unknown strategy");
    r.strategy = *kind;
    if (!j.at("approval_threshold").is_null()) r.approval_threshold = j["approval_threshold"].get<Rating>();
    j.at("condition").get_to(r.condition);
    j.at("format").get_to(r.format);
    j.at("group_size").get_to(r.group_size);
    j.at("num_items").get_to(r.num_items);
    j.at("complexity").get_to(r.complexity);
    j.at("parsed_items").get_to(r.parsed_items);
    j.at("gold_winners").get_to(r.gold_winners);
    j.at("correct").get_to(r.correct);
    j.at("list_length").get_to(r.list_length);
    if (!j.at("ndcg5").is_null()) r.ndcg5 = j["ndcg5"].get<double>();
    if (!j.at("ndcg10").is_null()) r.ndcg10 = j["ndcg10"].get<double>();
    r.failure = failure_category_from_string(j.at("failure").get<std::string>());
    j.at("unknown_items").get_to(r.unknown_items);
    j.at("near_miss_count").get_to(r.near_miss_count);
    j.at("duplicate_items").get_to(r.duplicate_items);
    j.at("latency_ms").get_to(r.latency_ms);
    j.at("attempts").get_to(r.attempts);
    j.at("transport_error").get_to(r.transport_error);
    if (!j.at("explanation").is_null()) r.explanation = j["explanation"].get<std::string>();
    j.at("raw_text").get_to(r.raw_text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("malformed result record: ") + e.what());
  }
  return r;
}

bool overlap_correct(const ParsedRecommendation& parsed, const GoldResult& gold) {
  if (!parsed.ok()) return false;
  return std::any_of(parsed.items.begin(), parsed.items.end(), [&](const std::string& id) {
    return std::find(gold.winners.begin(), gold.winners.end(), id) != gold.winners.end();
  });
}

double ndcg_at_k(const std::vector<std::string>& ranked, const GroupScenario& scenario,
                 const StrategySpec& strategy, int k, NdcgRelevance mode) {
  if (k < 1) throw std::invalid_argument("ndcg_at_k: k must be >= 1");
  const auto gold = gold_label(scenario, strategy);
  const auto depth = static_cast<std::size_t>(std::min(k, scenario.num_items));

  std::unordered_map<std::string, double> relevance;
  if (mode == NdcgRelevance::Graded) {
    for (std::size_t i = 0; i < scenario.item_ids.size(); ++i)
      relevance[scenario.item_ids[i]] = static_cast<double>(gold.scores[i]);
  } else {
    for (std::size_t i = 0; i < depth; ++i) relevance[gold.ranking[i]] = 1.0;
  }

  std::vector<double> ideal;
  for (const auto& id : gold.ranking) ideal.push_back(relevance.count(id) ? relevance[id] : 0.0);
  std::sort(ideal.begin(), ideal.end(), std::greater<>());

  double idcg = 0.0;
  for (std::size_t i = 0; i < depth; ++i) idcg += ideal[i] / std::log2(static_cast<double>(i) + 2.0);
  if (idcg == 0.0) {
    // Every item is irrelevant, so any ordering of distinct scenario items is
    // ideal. Anything else (short, repeated or unknown entries) scores 0.
    if (ranked.size() < depth) return 0.0;
    std::unordered_set<std::string> distinct;
    for (std::size_t i = 0; i < depth; ++i)
      if (!relevance.count(ranked[i]) || !distinct.insert(ranked[i]).second) return 0.0;
    return 1.0;
  }

  double dcg = 0.0;
  std::unordered_set<std::string> seen;
  const auto limit = std::min(ranked.size(), static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < limit; ++i) {
    auto it = relevance.find(ranked[i]);
    if (it == relevance.end() || !seen.insert(ranked[i]).second) continue;
    dcg += it->second / std::log2(static_cast<double>(i) + 2.0);
  }
  return dcg / idcg;
}

EvalRecord evaluate_completion(const GroupScenario& scenario, const PromptBundle& prompt,
                               const std::string& model, const CompletionResult& completion,
                               NdcgRelevance mode) {
  EvalRecord r;
  r.scenario_id = scenario.scenario_id;
  r.model = model;
  r.strategy = prompt.strategy.kind;
  if (prompt.strategy.kind == StrategyKind::APP) r.approval_threshold = prompt.strategy.approval_threshold;
  r.condition = prompt.condition.label();
  r.format = std::string(to_string(prompt.format));
  r.group_size = scenario.group_size;
  r.num_items = scenario.num_items;
  r.complexity = scenario.complexity;
  r.latency_ms = completion.latency_ms;
  r.attempts = completion.attempt_count;

  const auto gold = gold_label(scenario, prompt.strategy);
  r.gold_winners = gold.winners;
  const bool ranked = prompt.requested_k > 0;

  if (completion.status != TransportStatus::Ok || !completion.raw_text) {
    r.failure = FailureCategory::TransportFailure;
    r.transport_error = completion.error;
    if (ranked) r.ndcg5 = r.ndcg10 = 0.0;
    return r;
  }

  r.raw_text = *completion.raw_text;
  const auto parsed = parse_response(r.raw_text, scenario, prompt.title_map);
  r.failure = to_category(parsed.failure);
  r.parsed_items = parsed.items;
  r.unknown_items = parsed.unknown_items;
  r.near_miss_count = parsed.near_miss_count;
  r.duplicate_items = parsed.had_duplicates;
  r.explanation = parsed.explanation_text;
  r.correct = overlap_correct(parsed, gold);
  r.list_length = parsed.ok() ? static_cast<int>(parsed.items.size()) : 0;
  if (ranked) {
    r.ndcg5 = ndcg_at_k(parsed.positional_items, scenario, prompt.strategy, 5, mode);
    r.ndcg10 = ndcg_at_k(parsed.positional_items, scenario, prompt.strategy, 10, mode);
  }
  return r;
}

std::vector<ListLengthStats> list_length_stats(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw std::invalid_argument("list_length_stats: no records");
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_model;
  for (const auto& r : records) {
    auto& [lengths, gold] = by_model[r.model];
    if (r.failure != FailureCategory::None) continue;
    lengths.push_back(r.list_length);
    gold.push_back(static_cast<double>(r.gold_winners.size()));
  }
  std::vector<ListLengthStats> out;
  for (const auto& [model, series] : by_model) {
    const auto m = population_stats(series.first);
    const auto g = population_stats(series.second);
    out.push_back({model, static_cast<int>(series.first.size()), m.mean, m.sd, g.mean, g.sd});
  }
  return out;
}

ListLengthStats gold_list_length(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw std::invalid_argument("gold_list_length: no records");
  std::map<std::string, double> per_scenario;
  for (const auto& r : records) per_scenario.emplace(r.scenario_id, static_cast<double>(r.gold_winners.size()));
  std::vector<double> xs;
  for (const auto& [id, n] : per_scenario) xs.push_back(n);
  const auto g = population_stats(xs);
  return {"Ground_truth", static_cast<int>(xs.size()), g.mean, g.sd, g.mean, g.sd};
}

double MetricsSummary::failure_rate() const {
  int failed = 0;
  for (const auto& [name, count] : failures) failed += count;
  return n == 0 ? 0.0 : static_cast<double>(failed) / n;
}

std::string MetricsSummary::key_value(std::string_view name) const {
  for (const auto& [k, v] : key)
    if (k == name) return v;
  throw std::invalid_argument("summary has no key '" + std::string(name) + "'");
}

std::vector<MetricsSummary> summarize(const std::vector<EvalRecord>& records,
                                      const std::vector<std::string>& keys) {
  for (const auto& k : keys)
    if (std::find(std::begin(kGroupingKeys), std::end(kGroupingKeys), k) == std::end(kGroupingKeys))
      throw std::invalid_argument("unknown grouping key '" + k + "'");
  if (records.empty()) throw std::invalid_argument("summarize: no records");

  // Sort key: numeric keys compare as integers, the rest lexicographically.
  using SortKey = std::vector<std::pair<long long, std::string>>;
  std::map<SortKey, std::vector<const EvalRecord*>> groups;
  for (const auto& r : records) {
    SortKey sk;
    for (const auto& k : keys) {
      auto v = key_of(r, k);
      sk.emplace_back(numeric_key(k) ? std::stoll(v) : 0LL, std::move(v));
    }
    groups[std::move(sk)].push_back(&r);
  }

  std::vector<MetricsSummary> out;
  for (const auto& [sk, members] : groups) {
    MetricsSummary s;
    for (std::size_t i = 0; i < keys.size(); ++i) s.key.emplace_back(keys[i], sk[i].second);
    s.n = static_cast<int>(members.size());
    std::vector<double> lengths, n5, n10;
    for (const auto* r : members) {
      s.n_correct += r->correct;
      if (r->failure == FailureCategory::None) lengths.push_back(r->list_length);
      else ++s.failures[std::string(to_string(r->failure))];
      if (r->ndcg5 && r->ndcg10) {
        n5.push_back(*r->ndcg5);
        n10.push_back(*r->ndcg10);
      }
    }
    s.accuracy = static_cast<double>(s.n_correct) / s.n;
    s.n_parsed = static_cast<int>(lengths.size());
    const auto ls = population_stats(lengths);
    s.mean_list_length = ls.mean;
    s.sd_list_length = ls.sd;
    s.n_ndcg = static_cast<int>(n5.size());
    if (!n5.empty()) {
      s.mean_ndcg5 = population_stats(n5).mean;
      s.mean_ndcg10 = population_stats(n10).mean;
    }
    out.push_back(std::move(s));
  }
  return out;
}

void canonical_sort(std::vector<EvalRecord>& records) {
  std::sort(records.begin(), records.end(), [](const EvalRecord& a, const EvalRecord& b) {
    return std::tie(a.scenario_id, a.model, a.condition, a.format) <
           std::tie(b.scenario_id, b.model, b.condition, b.format);
  });
}

std::vector<EvalRecord> read_records_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open results file " + path.string());
  std::vector<EvalRecord> records;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    // A torn final line from an interrupted run is dropped; resume redoes it.
    if (j.is_discarded()) {
      if (in.peek() == std::char_traits<char>::eof()) break;
      throw ConfigError("results line " + std::to_string(lineno) + " is not valid JSON");
    }
    records.push_back(record_from_json(j));
  }
  return records;
}

}  // namespace grpbench
