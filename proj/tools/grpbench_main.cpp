// grpbench: generate scenario corpora, run models against them, and report.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "grpbench/runner.hpp"

using namespace grpbench;

namespace {

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string part; std::getline(ss, part, ',');)
    if (!part.empty()) out.push_back(part);
  return out;
}

std::vector<int> split_ints(const std::string& s) {
  std::vector<int> out;
  for (const auto& p : split_csv(s)) {
    try {
      out.push_back(std::stoi(p));
    } catch (const std::exception&) {
      throw ConfigError("not an integer: " + p);
    }
  }
  return out;
}

StrategySpec strategy_arg(const std::string& name, Rating threshold) {
  auto kind = parse_strategy_kind(name);
  if (!kind) throw ConfigError("unknown strategy '" + name + "' (expected ADD, APP, LMS or MPL)");
  return {*kind, threshold};
}

std::pair<std::string, std::string> name_value(const std::string& arg) {
  auto eq = arg.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("expected NAME=VALUE, got '" + arg + "'");
  return {arg.substr(0, eq), arg.substr(eq + 1)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Benchmark harness for social choice aggregation by chat models"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  // gen-corpus
  auto* gen = app.add_subcommand("gen-corpus", "Generate a seeded scenario corpus as JSON Lines");
  CorpusConfig corpus_cfg;
  std::string gen_out, gen_sizes = "2,4,8", gen_items = "5,10,25,50", gen_titles;
  gen->add_option("-o,--out", gen_out, "Output JSONL path")->required();
  gen->add_option("-n,--total", corpus_cfg.total_groups, "Number of scenarios")->capture_default_str();
  gen->add_option("-s,--seed", corpus_cfg.master_seed, "Master seed")->capture_default_str();
  gen->add_option("--group-sizes", gen_sizes, "Comma-separated group sizes")->capture_default_str();
  gen->add_option("--item-counts", gen_items, "Comma-separated item counts")->capture_default_str();
  gen->add_option("--rating-min", corpus_cfg.range.min)->capture_default_str();
  gen->add_option("--rating-max", corpus_cfg.range.max)->capture_default_str();
  gen->add_flag("--stratified", corpus_cfg.stratified, "Equal counts per (size, items) cell");
  gen->add_option("--named-items", gen_titles,
                  "Use names from this newline-delimited file as item ids instead of item_N");

  // run
  auto* run_cmd = app.add_subcommand("run", "Run models over a corpus and record results");
  std::string run_config, run_corpus, run_out, run_formats, run_conditions, run_titles;
  std::vector<std::string> run_endpoints, run_mocks;
  std::optional<Rating> run_threshold;
  std::optional<std::uint64_t> run_strategy_seed;
  std::optional<int> run_workers;
  bool run_resume = false, run_full = false;
  run_cmd->add_option("-c,--config", run_config, "Run config file or a previous run's manifest.json");
  run_cmd->add_option("--corpus", run_corpus, "Corpus JSONL (overrides the config's corpus)");
  run_cmd->add_option("-o,--out-dir", run_out, "Output directory");
  run_cmd->add_option("--endpoint", run_endpoints, "NAME=http://host:port model endpoint (repeatable)");
  run_cmd->add_option("--mock", run_mocks, "NAME=policy mock model, e.g. oracle=perfect_oracle (repeatable)");
  run_cmd->add_option("--formats", run_formats, "Comma-separated: json_item,json_user,dataframe");
  run_cmd->add_option("--conditions", run_conditions,
                      "Comma-separated: baseline,explanation,icl,domain_cues (suffix +top10 for ranked)");
  run_cmd->add_option("--threshold", run_threshold, "Approval threshold for APP");
  run_cmd->add_option("--strategy-seed", run_strategy_seed, "Seed for per-scenario strategy assignment");
  run_cmd->add_option("--titles", run_titles, "Movie title file for domain cues");
  run_cmd->add_option("-j,--workers", run_workers, "Concurrent cells");
  run_cmd->add_flag("--resume", run_resume, "Continue an interrupted run in the output directory");
  run_cmd->add_flag("--full-sweep", run_full, "Run every condition/format on every scenario");

  // report
  auto* rep = app.add_subcommand("report", "Derive CSV and Markdown tables from results");
  std::string rep_results, rep_out;
  ReportOptions rep_opts;
  rep->add_option("-r,--results", rep_results, "results.jsonl")->required();
  rep->add_option("-o,--out", rep_out, "Report directory")->required();
  rep->add_option("--focus-items", rep_opts.focus_items, "Item count of the condition/format subset")
      ->capture_default_str();

  // icl-bank
  auto* icl = app.add_subcommand("icl-bank", "Print the three solved in-context examples for a strategy");
  std::string icl_strategy, icl_out;
  Rating icl_threshold = 7;
  std::uint64_t icl_seed = kDefaultIclSeed;
  icl->add_option("--strategy", icl_strategy, "ADD, APP, LMS or MPL")->required();
  icl->add_option("--threshold", icl_threshold)->capture_default_str();
  icl->add_option("-s,--seed", icl_seed)->capture_default_str();
  icl->add_option("-o,--out", icl_out, "Write JSON here instead of stdout");

  // render-prompt
  auto* rp = app.add_subcommand("render-prompt", "Print the prompt for one scenario of a corpus");
  std::string rp_corpus, rp_id, rp_strategy, rp_format = "json_item", rp_condition = "baseline", rp_titles;
  Rating rp_threshold = 7;
  rp->add_option("--corpus", rp_corpus)->required();
  rp->add_option("--scenario", rp_id, "scenario_id (default: first)");
  rp->add_option("--strategy", rp_strategy)->required();
  rp->add_option("--threshold", rp_threshold)->capture_default_str();
  rp->add_option("--format", rp_format)->capture_default_str();
  rp->add_option("--condition", rp_condition)->capture_default_str();
  rp->add_option("--titles", rp_titles);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfigError;
  }

  try {
    if (*gen) {
      corpus_cfg.group_sizes = split_ints(gen_sizes);
      corpus_cfg.item_counts = split_ints(gen_items);
      if (!gen_titles.empty()) {
        corpus_cfg.anonymize_items = false;
        corpus_cfg.item_names = TitleBank::load(gen_titles).titles();
      }
      const auto corpus = generate_corpus(corpus_cfg);
      write_corpus_jsonl(corpus, std::filesystem::path(gen_out));
      std::cerr << "wrote " << corpus.size() << " scenarios to " << gen_out << '\n';
      return kExitOk;
    }

    if (*run_cmd) {
      RunConfig cfg;
      if (!run_config.empty()) {
        cfg = RunConfig::load(run_config);
      } else {
        cfg.output_dir = "results";
      }
      if (!run_corpus.empty()) {
        cfg.corpus_path = run_corpus;
        cfg.corpus_config.reset();
      }
      if (!run_endpoints.empty() || !run_mocks.empty()) {
        cfg.endpoints.clear();
        for (const auto& arg : run_endpoints) {
          auto [name, url] = name_value(arg);
          ModelEndpoint m;
          m.name = name;
          m.base_url = url;
          cfg.endpoints.push_back({name, with_env_overrides(m), std::nullopt});
        }
        for (const auto& arg : run_mocks) {
          auto [name, policy] = name_value(arg);
          cfg.endpoints.push_back({name, std::nullopt, MockPolicy::parse(policy)});
        }
      }
      if (!run_formats.empty()) {
        cfg.formats.clear();
        for (const auto& f : split_csv(run_formats)) {
          auto parsed = parse_scenario_format(f);
          if (!parsed) throw ConfigError("unknown format '" + f + "'");
          cfg.formats.push_back(*parsed);
        }
      }
      if (!run_conditions.empty()) {
        cfg.conditions.clear();
        for (const auto& c : split_csv(run_conditions)) cfg.conditions.push_back(PromptCondition::parse(c));
      }
      if (run_threshold) cfg.approval_threshold = *run_threshold;
      if (run_strategy_seed) cfg.strategy_seed = *run_strategy_seed;
      if (run_workers) cfg.workers = *run_workers;
      if (!run_titles.empty()) cfg.titles_path = run_titles;
      if (!run_out.empty()) cfg.output_dir = run_out;
      if (run_resume) cfg.resume = true;
      if (run_full) cfg.full_sweep = true;

      const auto outcome = run(cfg);
      std::cerr << "cells: " << outcome.cells_total << ", new records: " << outcome.records_written
                << ", resumed: " << outcome.records_skipped
                << ", transport failures: " << outcome.transport_failures << '\n'
                << "results: " << outcome.results_path.string() << '\n'
                << "manifest: " << outcome.manifest_path.string() << '\n';
      return outcome.transport_failures > 0 ? kExitTransportExhausted : kExitOk;
    }

    if (*rep) {
      for (const auto& p : report(rep_results, rep_out, rep_opts)) std::cout << p.string() << '\n';
      return kExitOk;
    }

    if (*icl) {
      const auto bank = make_icl_bank(strategy_arg(icl_strategy, icl_threshold), icl_seed);
      const auto text = to_json(bank).dump(2);
      if (icl_out.empty()) {
        std::cout << text << '\n';
      } else {
        std::ofstream(icl_out, std::ios::binary) << text << '\n';
      }
      return kExitOk;
    }

    if (*rp) {
      const auto corpus = read_corpus_jsonl(std::filesystem::path(rp_corpus));
      if (corpus.empty()) throw ConfigError("corpus is empty");
      auto it = rp_id.empty() ? corpus.begin()
                              : std::find_if(corpus.begin(), corpus.end(),
                                             [&](const GroupScenario& s) { return s.scenario_id == rp_id; });
      if (it == corpus.end()) throw ConfigError("no scenario '" + rp_id + "' in corpus");
      const auto strategy = strategy_arg(rp_strategy, rp_threshold);
      const auto format = parse_scenario_format(rp_format);
      if (!format) throw ConfigError("unknown format '" + rp_format + "'");
      const auto condition = PromptCondition::parse(rp_condition);
      const auto bank = make_icl_bank(strategy);
      const auto titles = rp_titles.empty() ? TitleBank::bundled() : TitleBank::load(rp_titles);
      std::cout << build_prompt(*it, strategy, *format, condition, &bank, &titles).prompt_text << '\n';
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const EmptyReportError& e) {
    std::cerr << "empty report: " << e.what() << '\n';
    return kExitEmptyReport;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUnexpected;
  }
  return kExitUnexpected;
}
