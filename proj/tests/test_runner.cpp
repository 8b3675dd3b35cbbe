#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <set>

#include "grpbench/runner.hpp"
#include "support/fake_server.hpp"
#include "support/fixtures.hpp"

using namespace grpbench;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig mock_config(const fs::path& out, int groups, std::vector<std::string> mocks = {"perfect_oracle"}) {
  RunConfig c;
  CorpusConfig corpus;
  corpus.total_groups = groups;
  c.corpus_config = corpus;
  for (std::size_t i = 0; i < mocks.size(); ++i)
    c.endpoints.push_back({"mock" + std::to_string(i), std::nullopt, MockPolicy::parse(mocks[i])});
  c.output_dir = out;
  return c;
}

// Wraps a model and counts calls.
class CountingModel final : public ChatModel {
 public:
  explicit CountingModel(std::string name) : inner_(name, MockPolicy{}), name_(std::move(name)) {}
  const std::string& name() const override { return name_; }
  bool is_mock() const override { return true; }
  nlohmann::ordered_json describe() const override { return inner_.describe(); }
  CompletionResult complete(const PromptBundle& p, const GroupScenario& s) override {
    ++calls;
    return inner_.complete(p, s);
  }
  std::atomic<int> calls{0};

 private:
  MockChatModel inner_;
  std::string name_;
};

}  // namespace

TEST_CASE("strategy assignment is total, uniform and order-independent") {
  CorpusConfig c;
  c.total_groups = 10000;
  auto corpus = generate_corpus(c);
  const auto a = assign_strategies(corpus, 1);
  REQUIRE(a.size() == corpus.size());
  std::map<StrategyKind, int> counts;
  for (const auto& [id, spec] : a) ++counts[spec.kind];
  for (auto kind : kAllStrategies) {
    INFO(to_string(kind));
    CHECK(std::abs(counts[kind] / 10000.0 - 0.25) <= 0.02);
  }

  std::reverse(corpus.begin(), corpus.end());
  const auto b = assign_strategies(corpus, 1);
  CHECK(std::equal(a.begin(), a.end(), b.begin(), [](const auto& x, const auto& y) {
    return x.first == y.first && x.second == y.second;
  }));
  const auto other = assign_strategies(corpus, 2);
  int same = 0;
  for (const auto& [id, spec] : a) same += other.at(id) == spec;
  CHECK(same < 4000);
}

TEST_CASE("oracle end-to-end gives perfect accuracy") {
  fixtures::TempDir dir;
  auto cfg = mock_config(dir / "out", 200);
  const auto outcome = run(cfg);
  CHECK_FALSE(outcome.interrupted);
  CHECK(outcome.cells_total == 200);
  CHECK(outcome.records_written == 200);
  const auto records = read_records_jsonl(outcome.results_path);
  REQUIRE(records.size() == 200);
  for (const auto& r : records) {
    CHECK(r.correct);
    CHECK(r.failure == FailureCategory::None);
  }
  CHECK(fs::exists(outcome.manifest_path));
  CHECK(fs::exists(dir / "out" / "corpus.jsonl"));
}

TEST_CASE("every format and condition on every scenario with full_sweep") {
  fixtures::TempDir dir;
  auto cfg = mock_config(dir / "out", 60);
  cfg.full_sweep = true;
  cfg.conditions = standard_conditions();
  for (const auto& c : standard_conditions(10)) cfg.conditions.push_back(c);
  cfg.formats = {kAllFormats[0], kAllFormats[1], kAllFormats[2]};
  const auto outcome = run(cfg);
  const auto records = read_records_jsonl(outcome.results_path);
  CHECK(records.size() == 60u * 8 * 3);
  std::set<std::string> keys;
  for (const auto& r : records) {
    keys.insert(r.key());
    CHECK(r.correct);
    if (r.condition.find("+top") != std::string::npos) {
      REQUIRE(r.ndcg5.has_value());
      CHECK(*r.ndcg5 == doctest::Approx(1.0));
      CHECK(*r.ndcg10 == doctest::Approx(1.0));
    }
  }
  CHECK(keys.size() == records.size());
}

TEST_CASE("non-default cells are limited to the sweep item count") {
  fixtures::TempDir dir;
  auto cfg = mock_config(dir / "out", 120);
  cfg.conditions = standard_conditions();
  cfg.formats = {ScenarioFormat::JsonItem, ScenarioFormat::DataframeText};
  const auto corpus = load_corpus(cfg);
  const auto fifty = std::count_if(corpus.begin(), corpus.end(), [](const auto& s) { return s.num_items == 50; });
  const auto outcome = run(cfg);
  CHECK(outcome.cells_total == static_cast<int>(corpus.size() + fifty * 7));
  for (const auto& r : read_records_jsonl(outcome.results_path))
    if (r.condition != "baseline" || r.format != "json_item") CHECK(r.num_items == 50);
}

TEST_CASE("resume after an interruption matches a fresh run") {
  fixtures::TempDir dir;
  auto fresh_cfg = mock_config(dir / "fresh", 80, {"perfect_oracle", "single_winner_only"});
  fresh_cfg.conditions = {PromptCondition{}, PromptCondition::parse("icl")};
  run(fresh_cfg);
  const auto fresh = slurp(dir / "fresh" / "results.jsonl");

  auto cfg = fresh_cfg;
  cfg.output_dir = dir / "resumed";
  RunHooks hooks;
  hooks.stop_after = 37;
  auto first = run(cfg, hooks);
  CHECK(first.interrupted);
  CHECK(first.records_written == 37);
  CHECK_FALSE(fs::exists(first.manifest_path));

  // Simulate a kill mid-write.
  std::ofstream(first.results_path, std::ios::binary | std::ios::app) << R"({"scenario_id":"grp_0)";

  CHECK_THROWS_AS(run(cfg), ConfigError);  // results exist, resume not set
  cfg.resume = true;
  auto second = run(cfg);
  CHECK_FALSE(second.interrupted);
  CHECK(second.records_skipped == 37);
  CHECK(second.records_written == second.cells_total - 37);

  const auto records = read_records_jsonl(second.results_path);
  std::set<std::string> keys;
  for (const auto& r : records) keys.insert(r.key());
  CHECK(keys.size() == records.size());
  CHECK(records.size() == static_cast<std::size_t>(second.cells_total));
  CHECK(slurp(second.results_path) == fresh);
}

TEST_CASE("parallel workers produce the same bytes as a serial run") {
  fixtures::TempDir dir;
  auto cfg = mock_config(dir / "serial", 120, {"perfect_oracle", "malformed_json:0.3", "amnesiac:100"});
  cfg.conditions = standard_conditions();
  cfg.formats = {kAllFormats[0], kAllFormats[1], kAllFormats[2]};
  run(cfg);
  cfg.output_dir = dir / "parallel";
  cfg.workers = 4;
  run(cfg);
  CHECK(slurp(dir / "serial" / "results.jsonl") == slurp(dir / "parallel" / "results.jsonl"));
}

TEST_CASE("replaying a manifest reproduces the results") {
  fixtures::TempDir dir;
  auto cfg = mock_config(dir / "a", 50, {"over_recommender:2"});
  cfg.conditions = {PromptCondition::parse("domain_cues"), PromptCondition::parse("baseline+top10")};
  cfg.strategy_seed = 99;
  cfg.full_sweep = true;
  const auto outcome = run(cfg);

  auto replay = RunConfig::load(outcome.manifest_path);
  replay.output_dir = dir / "b";
  run(replay);
  CHECK(slurp(dir / "a" / "results.jsonl") == slurp(dir / "b" / "results.jsonl"));

  const auto manifest = nlohmann::json::parse(slurp(outcome.manifest_path));
  CHECK(manifest["tool_version"] == std::string(kToolVersion));
  CHECK(manifest["corpus_size"] == 50);
  CHECK(manifest["strategies"].size() == 50);
}

TEST_CASE("the corpus file is never modified") {
  fixtures::TempDir dir;
  CorpusConfig cc;
  cc.total_groups = 40;
  const auto corpus_path = dir / "corpus.jsonl";
  write_corpus_jsonl(generate_corpus(cc), corpus_path);
  const auto before = slurp(corpus_path);
  const auto mtime = fs::last_write_time(corpus_path);

  RunConfig cfg;
  cfg.corpus_path = corpus_path;
  cfg.endpoints.push_back({"oracle", std::nullopt, MockPolicy{}});
  cfg.output_dir = dir / "out";
  run(cfg);
  CHECK(slurp(corpus_path) == before);
  CHECK(fs::last_write_time(corpus_path) == mtime);
  CHECK_FALSE(fs::exists(dir / "out" / "corpus.jsonl"));
}

TEST_CASE("configuration errors abort before any model call") {
  fixtures::TempDir dir;
  auto model = std::make_shared<CountingModel>("mock0");
  RunHooks hooks;
  hooks.models = {model};

  auto expect_config_error = [&](RunConfig cfg) {
    CHECK_THROWS_AS(run(cfg, hooks), ConfigError);
    CHECK(model->calls == 0);
  };

  auto base = mock_config(dir / "out", 10);
  auto c = base;
  c.corpus_path = dir / "x.jsonl";  // both sources
  expect_config_error(c);
  c = base;
  c.endpoints.clear();
  expect_config_error(c);
  c = base;
  c.approval_threshold = 11;
  expect_config_error(c);
  c = base;
  c.conditions = {PromptCondition{}, PromptCondition{}};
  expect_config_error(c);
  c = base;
  PromptCondition stacked;
  stacked.with_icl = stacked.with_domain_cues = true;
  c.conditions = {stacked};
  expect_config_error(c);
  c = base;
  {
    std::ofstream(dir / "few_titles.txt") << "Heat (1995)\nFargo (1996)\n";
  }
  c.titles_path = dir / "few_titles.txt";
  c.conditions = {PromptCondition::parse("domain_cues")};
  expect_config_error(c);
  c = base;
  c.corpus_config.reset();
  c.corpus_path = dir / "missing.jsonl";
  expect_config_error(c);

  CHECK(run(base, hooks).records_written == 10);
  CHECK(model->calls == 10);
}

TEST_CASE("config files are strict") {
  const auto good = nlohmann::json::parse(R"({
    "corpus": {"generate": {"total_groups": 20, "master_seed": 5}},
    "endpoints": [{"name": "phi4", "base_url": "http://127.0.0.1:11434", "max_retries": 1},
                  {"name": "oracle", "mock": "perfect_oracle"}],
    "conditions": ["baseline", "icl", "baseline+top10"],
    "formats": ["json_item", "dataframe"],
    "approval_threshold": 6,
    "output_dir": "out"
  })");
  const auto cfg = RunConfig::from_json(good);
  CHECK(cfg.corpus_config->total_groups == 20);
  CHECK(cfg.endpoints.size() == 2);
  CHECK(cfg.endpoints[0].http->max_retries == 1);
  CHECK(cfg.endpoints[1].mock.has_value());
  CHECK(cfg.conditions.size() == 3);
  CHECK(cfg.approval_threshold == 6);
  CHECK(RunConfig::from_json(cfg.to_json()).to_json() == cfg.to_json());

  auto bad = good;
  bad["colour"] = "blue";
  CHECK_THROWS_AS(RunConfig::from_json(bad), ConfigError);
  bad = good;
  bad["endpoints"][0]["temprature"] = 0.2;
  CHECK_THROWS_AS(RunConfig::from_json(bad), ConfigError);
  bad = good;
  bad["formats"] = {"xml"};
  CHECK_THROWS_AS(RunConfig::from_json(bad), ConfigError);
  bad = good;
  bad["approval_threshold"] = "seven";
  CHECK_THROWS_AS(RunConfig::from_json(bad), ConfigError);
  bad = good;
  bad.erase("corpus");
  CHECK_THROWS_AS(RunConfig::from_json(bad), ConfigError);
}

TEST_CASE("an unreachable endpoint is recorded and the run continues") {
  fixtures::TempDir dir;
  auto cfg = mock_config(dir / "out", 6);
  ModelEndpoint e;
  e.name = "down";
  e.base_url = "http://127.0.0.1:" + std::to_string(fixtures::closed_port());
  e.max_retries = 1;
  e.backoff_initial_s = 0.001;
  e.timeout_s = 2;
  cfg.endpoints.push_back({"down", e, std::nullopt});
  const auto outcome = run(cfg);
  CHECK(outcome.transport_failures == 6);
  const auto records = read_records_jsonl(outcome.results_path);
  CHECK(records.size() == 12);
  for (const auto& r : records) {
    if (r.model == "down") {
      CHECK(r.failure == FailureCategory::TransportFailure);
      CHECK(r.attempts == 2);
      CHECK_FALSE(r.correct);
    } else {
      CHECK(r.correct);
    }
  }
}

TEST_CASE("a live endpoint is scored like any other model") {
  fixtures::TempDir dir;
  fixtures::FakeChatServer server([](const nlohmann::json&, httplib::Response& res) {
    fixtures::FakeChatServer::reply(res, "```json\n{\"strategy\":\"ADD\",\"recommendation\":[\"item_1\"]}\n```");
  });
  auto cfg = mock_config(dir / "out", 30);
  cfg.endpoints.clear();
  ModelEndpoint e;
  e.name = "fake";
  e.base_url = server.url();
  cfg.endpoints.push_back({"fake", e, std::nullopt});
  const auto outcome = run(cfg);
  CHECK(server.requests() == 30);
  for (const auto& r : read_records_jsonl(outcome.results_path)) {
    CHECK(r.failure == FailureCategory::None);
    CHECK(r.parsed_items == std::vector<std::string>{"item_1"});
    CHECK(r.correct == (std::find(r.gold_winners.begin(), r.gold_winners.end(), "item_1") != r.gold_winners.end()));
  }
}

TEST_CASE("report tables") {
  fixtures::TempDir dir;
  auto cfg = mock_config(dir / "out", 300, {"perfect_oracle", "amnesiac:100"});
  cfg.conditions = standard_conditions();
  cfg.conditions.push_back(PromptCondition::parse("baseline+top10"));
  cfg.formats = {kAllFormats[0], kAllFormats[1], kAllFormats[2]};
  const auto outcome = run(cfg);
  const auto records = read_records_jsonl(outcome.results_path);
  const auto tables = build_report(records);

  std::map<std::string, ReportTable> by_name;
  for (const auto& t : tables) by_name[t.name] = t;
  for (const char* name : {"corpus_distribution", "accuracy_by_model", "accuracy_by_complexity",
                           "accuracy_by_strategy", "conditions", "formats", "list_length", "ndcg", "failures"})
    CHECK(by_name.count(name) == 1);

  // distribution: 3 sizes + total, 4 item counts + total
  const auto& dist = by_name["corpus_distribution"];
  CHECK(dist.rows.size() == 4);
  CHECK(dist.header.size() == 6);
  CHECK(dist.rows.back().back() == "300");

  // one point per distinct complexity per model
  std::set<int> complexities;
  for (const auto& r : records) complexities.insert(r.complexity);
  const auto& fig = by_name["accuracy_by_complexity"];
  CHECK(fig.rows.size() == 2 * complexities.size());
  for (const auto& row : fig.rows)
    if (row[0] == "mock0") CHECK(row[3] == "1.000");

  // format table: 3 complexities x 3 formats per model
  const auto& formats = by_name["formats"];
  CHECK(formats.header == std::vector<std::string>{"model", "complexity", "json_item", "json_user", "dataframe"});
  CHECK(formats.rows.size() == 6);
  for (const auto& row : formats.rows)
    if (row[0] == "mock0")
      for (int i = 2; i < 5; ++i) CHECK(row[i] == "1.000");

  const auto& cond = by_name["conditions"];
  CHECK(cond.header.size() == 6);
  CHECK(cond.rows.size() == 8);

  const auto& ndcg = by_name["ndcg"];
  CHECK(ndcg.rows.size() == 3);
  for (const auto& row : ndcg.rows) {
    CHECK(row[1] == "1.00");
    CHECK(row[2] == "1.00");
  }

  // amnesiac accuracy falls at 400 ratings
  for (const auto& row : fig.rows)
    if (row[0] == "mock1") {
      if (std::stoi(row[1]) <= 100) CHECK(row[3] == "1.000");
      if (row[1] == "400") CHECK(std::stod(row[3]) < 1.0);
    }

  const auto files = report(outcome.results_path, dir / "report");
  CHECK(files.size() == 2 * tables.size() + 1);
  for (const auto& f : files) CHECK(fs::exists(f));
  CHECK(slurp(dir / "report" / "formats.csv").rfind("model,complexity,json_item,json_user,dataframe\n", 0) == 0);
}

TEST_CASE("empty results are an explicit error") {
  fixtures::TempDir dir;
  CHECK_THROWS_AS(build_report({}), EmptyReportError);
  std::ofstream(dir / "empty.jsonl").close();
  CHECK_THROWS_AS(report(dir / "empty.jsonl", dir / "r"), EmptyReportError);
  CHECK_THROWS_AS(report(dir / "missing.jsonl", dir / "r"), EmptyReportError);
}
