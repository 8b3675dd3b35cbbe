#include "grpbench/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

namespace grpbench {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kStrategyTag = 0x7374726174ULL;  // "strat"

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

template <typename T>
T field(const nlohmann::json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config field '") + key + "' has the wrong type");
  }
}

void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                         const std::string& where) {
  for (const auto& [k, v] : j.items())
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
      throw ConfigError("unknown key '" + k + "' in " + where);
}

CorpusConfig corpus_config_from_json(const nlohmann::json& j) {
  reject_unknown_keys(j,
                      {"total_groups", "group_sizes", "item_counts", "rating_min", "rating_max",
                       "master_seed", "stratified"},
                      "corpus.generate");
  CorpusConfig c;
  c.total_groups = field(j, "total_groups", c.total_groups);
  c.group_sizes = field(j, "group_sizes", c.group_sizes);
  c.item_counts = field(j, "item_counts", c.item_counts);
  c.range.min = field(j, "rating_min", c.range.min);
  c.range.max = field(j, "rating_max", c.range.max);
  c.master_seed = field(j, "master_seed", c.master_seed);
  c.stratified = field(j, "stratified", c.stratified);
  c.validate();
  return c;
}

nlohmann::ordered_json corpus_config_to_json(const CorpusConfig& c) {
  nlohmann::ordered_json j;
  j["total_groups"] = c.total_groups;
  j["group_sizes"] = c.group_sizes;
  j["item_counts"] = c.item_counts;
  j["rating_min"] = c.range.min;
  j["rating_max"] = c.range.max;
  j["master_seed"] = c.master_seed;
  j["stratified"] = c.stratified;
  return j;
}

EndpointConfig endpoint_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("each endpoint must be a JSON object");
  EndpointConfig e;
  e.name = field<std::string>(j, "name", "");
  if (e.name.empty()) throw ConfigError("endpoint without a name");
  if (j.contains("mock")) {
    reject_unknown_keys(j, {"name", "mock"}, "endpoint '" + e.name + "'");
    e.mock = MockPolicy::from_json(j["mock"]);
    return e;
  }
  reject_unknown_keys(j,
                      {"name", "base_url", "timeout_s", "max_retries", "max_in_flight", "temperature",
                       "max_tokens", "backoff_initial_s", "backoff_max_s"},
                      "endpoint '" + e.name + "'");
  ModelEndpoint m;
  m.name = e.name;
  m.base_url = field(j, "base_url", m.base_url);
  m.timeout_s = field(j, "timeout_s", m.timeout_s);
  m.max_retries = field(j, "max_retries", m.max_retries);
  m.max_in_flight = field(j, "max_in_flight", m.max_in_flight);
  m.decode.temperature = field(j, "temperature", m.decode.temperature);
  m.decode.max_tokens = field(j, "max_tokens", m.decode.max_tokens);
  m.backoff_initial_s = field(j, "backoff_initial_s", m.backoff_initial_s);
  m.backoff_max_s = field(j, "backoff_max_s", m.backoff_max_s);
  e.http = with_env_overrides(std::move(m));
  e.http->validate();
  return e;
}

nlohmann::ordered_json endpoint_to_json(const EndpointConfig& e) {
  nlohmann::ordered_json j;
  j["name"] = e.name;
  if (e.mock) {
    j["mock"] = e.mock->to_json();
  } else if (e.http) {
    j["base_url"] = e.http->base_url;
    j["timeout_s"] = e.http->timeout_s;
    j["max_retries"] = e.http->max_retries;
    j["max_in_flight"] = e.http->max_in_flight;
    j["temperature"] = e.http->decode.temperature;
    j["max_tokens"] = e.http->decode.max_tokens;
    j["backoff_initial_s"] = e.http->backoff_initial_s;
    j["backoff_max_s"] = e.http->backoff_max_s;
  }
  return j;
}

RatingRange config_range(const RunConfig& c) {
  return c.corpus_config ? c.corpus_config->range : RatingRange{};
}

struct Cell {
  std::size_t scenario;
  std::size_t endpoint;
  std::size_t condition;
  std::size_t format;
};

bool default_cell(const PromptCondition& c, ScenarioFormat f) {
  return c.is_baseline() && !c.ranked_topk && f == ScenarioFormat::JsonItem;
}

}  // namespace

std::unique_ptr<ChatModel> EndpointConfig::instantiate() const {
  if (mock) return std::make_unique<MockChatModel>(name, *mock);
  if (http) return std::make_unique<HttpChatModel>(*http);
  throw ConfigError("endpoint '" + name + "' has neither an address nor a mock policy");
}

void RunConfig::validate() const {
  if (corpus_path.has_value() == corpus_config.has_value())
    throw ConfigError("config needs exactly one corpus source (path or generate)");
  if (corpus_config) corpus_config->validate();
  if (endpoints.empty()) throw ConfigError("config needs at least one endpoint");
  if (conditions.empty()) throw ConfigError("config needs at least one condition");
  if (formats.empty()) throw ConfigError("config needs at least one format");
  std::set<std::string> names;
  for (const auto& e : endpoints) {
    if (!names.insert(e.name).second) throw ConfigError("duplicate endpoint name '" + e.name + "'");
    if (e.http.has_value() == e.mock.has_value())
      throw ConfigError("endpoint '" + e.name + "' needs exactly one of an address or a mock");
    if (e.http) e.http->validate();
  }
  std::set<std::string> labels;
  for (const auto& c : conditions) {
    c.validate();
    if (!labels.insert(c.label()).second) throw ConfigError("duplicate condition " + c.label());
  }
  if (std::set(formats.begin(), formats.end()).size() != formats.size())
    throw ConfigError("duplicate format");
  StrategySpec{StrategyKind::APP, approval_threshold}.validate(config_range(*this));
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (sweep_items < 1) throw ConfigError("sweep_items must be >= 1");
  if (output_dir.empty()) throw ConfigError("output_dir must be set");
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  reject_unknown_keys(j,
                      {"corpus", "endpoints", "conditions", "formats", "strategy_seed",
                       "approval_threshold", "icl_seed", "titles_path", "ndcg_relevance",
                       "output_dir", "resume", "full_sweep", "sweep_items", "workers"},
                      "run config");
  RunConfig c;
  if (!j.contains("corpus") || !j["corpus"].is_object()) throw ConfigError("config needs a 'corpus' object");
  const auto& corpus = j["corpus"];
  reject_unknown_keys(corpus, {"path", "generate"}, "corpus");
  if (corpus.contains("path")) c.corpus_path = field<std::string>(corpus, "path", "");
  if (corpus.contains("generate")) c.corpus_config = corpus_config_from_json(corpus["generate"]);

  if (!j.contains("endpoints") || !j["endpoints"].is_array())
    throw ConfigError("config needs an 'endpoints' array");
  for (const auto& e : j["endpoints"]) c.endpoints.push_back(endpoint_from_json(e));

  if (j.contains("conditions")) {
    c.conditions.clear();
    for (const auto& label : field<std::vector<std::string>>(j, "conditions", {}))
      c.conditions.push_back(PromptCondition::parse(label));
  }
  if (j.contains("formats")) {
    c.formats.clear();
    for (const auto& name : field<std::vector<std::string>>(j, "formats", {})) {
      auto f = parse_scenario_format(name);
      if (!f) throw ConfigError("unknown format '" + name + "'");
      c.formats.push_back(*f);
    }
  }
  c.strategy_seed = field(j, "strategy_seed", c.strategy_seed);
  c.approval_threshold = field(j, "approval_threshold", c.approval_threshold);
  c.icl_seed = field(j, "icl_seed", c.icl_seed);
  if (auto p = field<std::string>(j, "titles_path", ""); !p.empty()) c.titles_path = p;
  c.ndcg_relevance = ndcg_relevance_from_string(field<std::string>(j, "ndcg_relevance", "graded"));
  c.output_dir = field<std::string>(j, "output_dir", c.output_dir.string());
  c.resume = field(j, "resume", c.resume);
  c.full_sweep = field(j, "full_sweep", c.full_sweep);
  c.sweep_items = field(j, "sweep_items", c.sweep_items);
  c.workers = field(j, "workers", c.workers);
  c.validate();
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config file " + path.string() + " is not valid JSON");
  // A run manifest carries its config snapshot under "config".
  if (j.is_object() && j.contains("config") && j.contains("tool_version")) return from_json(j["config"]);
  return from_json(j);
}

nlohmann::ordered_json RunConfig::to_json() const {
  nlohmann::ordered_json j;
  if (corpus_path) j["corpus"]["path"] = corpus_path->string();
  else if (corpus_config) j["corpus"]["generate"] = corpus_config_to_json(*corpus_config);
  j["endpoints"] = nlohmann::ordered_json::array();
  for (const auto& e : endpoints) j["endpoints"].push_back(endpoint_to_json(e));
  j["conditions"] = nlohmann::ordered_json::array();
  for (const auto& c : conditions) j["conditions"].push_back(c.label());
  j["formats"] = nlohmann::ordered_json::array();
  for (auto f : formats) j["formats"].push_back(to_string(f));
  j["strategy_seed"] = strategy_seed;
  j["approval_threshold"] = approval_threshold;
  j["icl_seed"] = icl_seed;
  j["titles_path"] = titles_path ? nlohmann::ordered_json(titles_path->string()) : nlohmann::ordered_json(nullptr);
  j["ndcg_relevance"] = to_string(ndcg_relevance);
  j["output_dir"] = output_dir.string();
  j["resume"] = resume;
  j["full_sweep"] = full_sweep;
  j["sweep_items"] = sweep_items;
  j["workers"] = workers;
  return j;
}

std::map<std::string, StrategySpec> assign_strategies(const std::vector<GroupScenario>& corpus,
                                                      std::uint64_t seed, Rating approval_threshold) {
  std::map<std::string, StrategySpec> out;
  for (const auto& s : corpus) {
    SeededRng rng(mix_seed(mix_seed(seed, kStrategyTag), stable_hash(s.scenario_id)));
    const auto kind = kAllStrategies[rng.uniform(0, 3)];
    out[s.scenario_id] = StrategySpec{kind, approval_threshold};
  }
  return out;
}

nlohmann::ordered_json RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["tool_version"] = tool_version;
  j["config"] = config;
  j["corpus_fingerprint"] = corpus_fingerprint;
  j["corpus_size"] = corpus_size;
  j["strategies"] = strategies;
  j["icl_bank_ids"] = icl_bank_ids;
  j["models"] = models;
  j["started_at"] = started_at;
  j["finished_at"] = finished_at;
  return j;
}

std::vector<GroupScenario> load_corpus(const RunConfig& config) {
  auto corpus = config.corpus_path ? read_corpus_jsonl(*config.corpus_path)
                                   : generate_corpus(*config.corpus_config);
  if (corpus.empty()) throw ConfigError("corpus is empty");
  return corpus;
}

RunOutcome run(const RunConfig& config, const RunHooks& hooks) {
  config.validate();
  const auto range = config_range(config);
  const auto corpus = load_corpus(config);

  std::vector<std::shared_ptr<ChatModel>> models = hooks.models;
  if (models.empty()) {
    for (const auto& e : config.endpoints) models.push_back(e.instantiate());
  } else if (models.size() != config.endpoints.size()) {
    throw ConfigError("model override count does not match endpoint count");
  }

  const bool need_titles =
      std::any_of(config.conditions.begin(), config.conditions.end(),
                  [](const PromptCondition& c) { return c.with_domain_cues; });
  TitleBank titles;
  if (need_titles) {
    titles = config.titles_path ? TitleBank::load(*config.titles_path) : TitleBank::bundled();
    int max_items = 0;
    for (const auto& s : corpus) max_items = std::max(max_items, s.num_items);
    if (static_cast<int>(titles.size()) < max_items)
      throw ConfigError("title bank has " + std::to_string(titles.size()) + " titles, corpus needs " +
                        std::to_string(max_items));
  }

  const auto strategies = assign_strategies(corpus, config.strategy_seed, config.approval_threshold);

  std::map<StrategyKind, IclBank> icl_banks;
  const bool need_icl = std::any_of(config.conditions.begin(), config.conditions.end(),
                                    [](const PromptCondition& c) { return c.with_icl; });
  if (need_icl)
    for (auto kind : kAllStrategies)
      icl_banks.emplace(kind, make_icl_bank({kind, config.approval_threshold}, config.icl_seed, range));

  // Cells in canonical order: scenario, then model, condition, format.
  std::vector<Cell> cells;
  for (std::size_t s = 0; s < corpus.size(); ++s)
    for (std::size_t e = 0; e < models.size(); ++e)
      for (std::size_t c = 0; c < config.conditions.size(); ++c)
        for (std::size_t f = 0; f < config.formats.size(); ++f) {
          if (!config.full_sweep && !default_cell(config.conditions[c], config.formats[f]) &&
              corpus[s].num_items != config.sweep_items)
            continue;
          cells.push_back({s, e, c, f});
        }

  auto cell_key = [&](const Cell& cell) {
    return corpus[cell.scenario].scenario_id + "|" + models[cell.endpoint]->name() + "|" +
           config.conditions[cell.condition].label() + "|" +
           std::string(to_string(config.formats[cell.format]));
  };

  fs::create_directories(config.output_dir);
  RunOutcome outcome;
  outcome.results_path = config.output_dir / "results.jsonl";
  outcome.manifest_path = config.output_dir / "manifest.json";
  outcome.cells_total = static_cast<int>(cells.size());

  if (config.corpus_config) write_corpus_jsonl(corpus, config.output_dir / "corpus.jsonl");

  std::vector<EvalRecord> existing;
  if (fs::exists(outcome.results_path)) {
    if (!config.resume)
      throw ConfigError(outcome.results_path.string() + " already exists; pass resume to continue it");
    existing = read_records_jsonl(outcome.results_path);
  }
  std::unordered_set<std::string> done;
  for (const auto& r : existing) done.insert(r.key());

  // Rewrite the surviving records first so a torn trailing line is dropped.
  {
    std::ofstream out(outcome.results_path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + outcome.results_path.string());
    for (const auto& r : existing) out << to_json(r).dump() << '\n';
  }

  RunManifest& manifest = outcome.manifest;
  manifest.config = config.to_json();
  manifest.corpus_size = static_cast<int>(corpus.size());
  {
    std::ostringstream os;
    write_corpus_jsonl(corpus, os);
    manifest.corpus_fingerprint = stable_hash(os.str());
  }
  for (const auto& [id, spec] : strategies) manifest.strategies[id] = std::string(to_string(spec.kind));
  for (const auto& [kind, bank] : icl_banks)
    manifest.icl_bank_ids[std::string(to_string(kind))] = bank.scenario_ids();
  for (const auto& m : models) manifest.models.push_back(m->describe());
  manifest.started_at = utc_now();

  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < cells.size(); ++i)
    if (!done.count(cell_key(cells[i]))) pending.push_back(i);
  outcome.records_skipped = static_cast<int>(cells.size() - pending.size());

  const std::size_t budget = hooks.stop_after ? std::min<std::size_t>(pending.size(), *hooks.stop_after)
                                              : pending.size();

  std::ofstream appender(outcome.results_path, std::ios::binary | std::ios::app);
  std::mutex append_mutex;
  std::atomic<std::size_t> next{0};
  std::atomic<int> written{0};
  std::atomic<int> transport_failures{0};

  auto worker = [&] {
    for (std::size_t n = next++; n < budget; n = next++) {
      const Cell& cell = cells[pending[n]];
      const auto& scenario = corpus[cell.scenario];
      const auto& strategy = strategies.at(scenario.scenario_id);
      const auto& condition = config.conditions[cell.condition];
      const IclBank* bank = condition.with_icl ? &icl_banks.at(strategy.kind) : nullptr;
      const auto prompt = build_prompt(scenario, strategy, config.formats[cell.format], condition, bank,
                                       condition.with_domain_cues ? &titles : nullptr);
      auto& model = *models[cell.endpoint];
      const auto completion = model.complete(prompt, scenario);
      const auto record = evaluate_completion(scenario, prompt, model.name(), completion, config.ndcg_relevance);
      if (record.failure == FailureCategory::TransportFailure) ++transport_failures;

      const auto line = to_json(record).dump();
      std::lock_guard lock(append_mutex);
      appender << line << '\n';
      appender.flush();
      ++written;
    }
  };

  const int n_threads = std::max(1, std::min<int>(config.workers, static_cast<int>(budget)));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  appender.close();

  outcome.records_written = written;
  outcome.transport_failures = transport_failures;
  outcome.interrupted = budget < pending.size();
  if (outcome.interrupted) return outcome;

  // Compact into canonical cell order; records for cells outside this config
  // keep their relative order at the end.
  auto records = read_records_jsonl(outcome.results_path);
  std::unordered_map<std::string, std::size_t> order;
  for (std::size_t i = 0; i < cells.size(); ++i) order.emplace(cell_key(cells[i]), i);
  std::stable_sort(records.begin(), records.end(), [&](const EvalRecord& a, const EvalRecord& b) {
    auto ia = order.find(a.key()), ib = order.find(b.key());
    const auto ka = ia == order.end() ? cells.size() : ia->second;
    const auto kb = ib == order.end() ? cells.size() : ib->second;
    return ka < kb;
  });
  const auto tmp = outcome.results_path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    for (const auto& r : records) out << to_json(r).dump() << '\n';
  }
  fs::rename(tmp, outcome.results_path);

  manifest.finished_at = utc_now();
  std::ofstream(outcome.manifest_path, std::ios::binary) << manifest.to_json().dump(2) << '\n';
  return outcome;
}

}  // namespace grpbench
