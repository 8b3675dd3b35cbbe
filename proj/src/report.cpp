#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "grpbench/runner.hpp"

namespace grpbench {

namespace fs = std::filesystem;

namespace {

const std::string kMissing = "-";

std::string fixed(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string base_condition(const std::string& label) { return label.substr(0, label.find('+')); }
bool ranked_condition(const std::string& label) { return label.find('+') != std::string::npos; }

using Filter = std::function<bool(const EvalRecord&)>;

std::vector<EvalRecord> select(const std::vector<EvalRecord>& records, const Filter& keep) {
  std::vector<EvalRecord> out;
  std::copy_if(records.begin(), records.end(), std::back_inserter(out), keep);
  return out;
}

bool main_run(const EvalRecord& r) { return r.condition == "baseline" && r.format == "json_item"; }

std::vector<std::string> models_of(const std::vector<EvalRecord>& records) {
  std::set<std::string> names;
  for (const auto& r : records) names.insert(r.model);
  return {names.begin(), names.end()};
}

// accuracy (and n) of the records matching `keep`, or "-" when none match.
std::string accuracy_cell(const std::vector<EvalRecord>& records, const Filter& keep) {
  int n = 0, correct = 0;
  for (const auto& r : records)
    if (keep(r)) {
      ++n;
      correct += r.correct;
    }
  return n == 0 ? kMissing : fixed(static_cast<double>(correct) / n);
}

std::string csv_escape(const std::string& v) {
  if (v.find_first_of(",\"\n") == std::string::npos) return v;
  std::string out = "\"";
  for (char c : v) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

ReportTable corpus_distribution(const std::vector<EvalRecord>& records) {
  std::map<std::string, std::pair<int, int>> scenarios;
  for (const auto& r : records) scenarios.emplace(r.scenario_id, std::make_pair(r.group_size, r.num_items));
  std::set<int> sizes, items;
  std::map<std::pair<int, int>, int> counts;
  for (const auto& [id, cell] : scenarios) {
    sizes.insert(cell.first);
    items.insert(cell.second);
    ++counts[cell];
  }

  ReportTable t{"corpus_distribution", "Scenario distribution by group size and number of items", {"", }, {}};
  for (int i : items) t.header.push_back(std::to_string(i) + " items");
  t.header.push_back("Total");
  std::map<int, int> col_total;
  for (int g : sizes) {
    std::vector<std::string> row{std::to_string(g) + " members"};
    int total = 0;
    for (int i : items) {
      const int c = counts[{g, i}];
      row.push_back(std::to_string(c));
      total += c;
      col_total[i] += c;
    }
    row.push_back(std::to_string(total));
    t.rows.push_back(std::move(row));
  }
  std::vector<std::string> last{"Total"};
  for (int i : items) last.push_back(std::to_string(col_total[i]));
  last.push_back(std::to_string(scenarios.size()));
  t.rows.push_back(std::move(last));
  return t;
}

ReportTable accuracy_by_complexity(const std::vector<EvalRecord>& records) {
  ReportTable t{"accuracy_by_complexity", "Accuracy by group complexity (baseline prompt, json_item)",
                {"model", "complexity", "n", "accuracy"}, {}};
  const auto base = select(records, main_run);
  if (base.empty()) return t;
  for (const auto& s : summarize(base, {"model", "complexity"}))
    t.rows.push_back({s.key_value("model"), s.key_value("complexity"), std::to_string(s.n), fixed(s.accuracy)});
  return t;
}

ReportTable accuracy_by_model(const std::vector<EvalRecord>& records) {
  ReportTable t{"accuracy_by_model", "Overall accuracy per model (baseline prompt, json_item)",
                {"model", "n", "accuracy", "failure_rate", "near_misses"}, {}};
  const auto base = select(records, main_run);
  if (base.empty()) return t;
  for (const auto& s : summarize(base, {"model"})) {
    int near = 0;
    for (const auto& r : base)
      if (r.model == s.key_value("model")) near += r.near_miss_count;
    t.rows.push_back({s.key_value("model"), std::to_string(s.n), fixed(s.accuracy), fixed(s.failure_rate()),
                      std::to_string(near)});
  }
  return t;
}

ReportTable accuracy_by_strategy(const std::vector<EvalRecord>& records) {
  const auto base = select(records, main_run);
  const auto models = models_of(base);
  ReportTable t{"accuracy_by_strategy", "Accuracy per aggregation strategy (baseline prompt, json_item)",
                {"strategy"}, {}};
  for (const auto& m : models) t.header.push_back(m);
  t.header.push_back("all");
  for (auto kind : kAllStrategies) {
    const std::string name(to_string(kind));
    std::vector<std::string> row{name};
    for (const auto& m : models)
      row.push_back(accuracy_cell(base, [&](const EvalRecord& r) { return r.model == m && r.strategy == kind; }));
    row.push_back(accuracy_cell(base, [&](const EvalRecord& r) { return r.strategy == kind; }));
    t.rows.push_back(std::move(row));
  }
  return t;
}

ReportTable condition_comparison(const std::vector<EvalRecord>& records, const ReportOptions& opt) {
  const auto pool = select(records, [&](const EvalRecord& r) {
    return r.format == "json_item" && !ranked_condition(r.condition) && r.num_items == opt.focus_items;
  });
  std::vector<std::string> conditions;
  for (const char* c : {"baseline", "explanation", "icl", "domain_cues"})
    if (std::any_of(pool.begin(), pool.end(), [&](const EvalRecord& r) { return r.condition == c; }))
      conditions.emplace_back(c);

  ReportTable t{"conditions", "Accuracy by prompt condition (" + std::to_string(opt.focus_items) +
                                  "-item scenarios, json_item)",
                {"model", "complexity"}, {}};
  for (const auto& c : conditions) t.header.push_back(c);
  for (const auto& m : models_of(pool)) {
    auto row_for = [&](const std::string& label, const Filter& in_row) {
      std::vector<std::string> row{m, label};
      for (const auto& c : conditions)
        row.push_back(accuracy_cell(pool, [&](const EvalRecord& r) {
          return r.model == m && r.condition == c && in_row(r);
        }));
      t.rows.push_back(std::move(row));
    };
    for (int cx : opt.focus_complexities)
      row_for(std::to_string(cx), [cx](const EvalRecord& r) { return r.complexity == cx; });
    row_for("overall", [](const EvalRecord&) { return true; });
  }
  return t;
}

ReportTable format_comparison(const std::vector<EvalRecord>& records, const ReportOptions& opt) {
  const auto pool = select(records, [&](const EvalRecord& r) {
    return r.condition == "baseline" && r.num_items == opt.focus_items;
  });
  ReportTable t{"formats", "Accuracy by scenario format (baseline prompt, " + std::to_string(opt.focus_items) +
                               "-item scenarios)",
                {"model", "complexity", "json_item", "json_user", "dataframe"}, {}};
  for (const auto& m : models_of(pool))
    for (int cx : opt.focus_complexities) {
      std::vector<std::string> row{m, std::to_string(cx) + " ratings"};
      for (const char* f : {"json_item", "json_user", "dataframe"})
        row.push_back(accuracy_cell(pool, [&](const EvalRecord& r) {
          return r.model == m && r.format == f && r.complexity == cx;
        }));
      t.rows.push_back(std::move(row));
    }
  return t;
}

ReportTable list_length_table(const std::vector<EvalRecord>& records) {
  ReportTable t{"list_length", "Mean length (SD) of the recommendation list (baseline prompt, json_item)",
                {"Ground_truth"}, {}};
  const auto base = select(records, main_run);
  if (base.empty()) return t;
  const auto stats = list_length_stats(base);
  const auto gold = gold_list_length(base);
  std::vector<std::string> row{fixed(gold.mean, 2) + " (" + fixed(gold.sd, 2) + ")"};
  for (const auto& s : stats) {
    t.header.push_back(s.model);
    row.push_back(s.n == 0 ? kMissing : fixed(s.mean, 2) + " (" + fixed(s.sd, 2) + ")");
  }
  t.rows.push_back(std::move(row));
  return t;
}

ReportTable ndcg_table(const std::vector<EvalRecord>& records, const ReportOptions& opt) {
  const auto pool = select(records, [&](const EvalRecord& r) {
    return ranked_condition(r.condition) && base_condition(r.condition) == "baseline" &&
           r.format == "json_item" && r.num_items == opt.focus_items && r.ndcg5 && r.ndcg10;
  });
  const auto models = models_of(pool);
  ReportTable t{"ndcg", "Mean NDCG of ranked recommendations (" + std::to_string(opt.focus_items) +
                            "-item scenarios)",
                {"complexity"}, {}};
  for (const auto& m : models) {
    t.header.push_back(m + " nDCG@5");
    t.header.push_back(m + " nDCG@10");
  }
  for (int cx : opt.focus_complexities) {
    std::vector<std::string> row{std::to_string(cx) + " ratings"};
    for (const auto& m : models) {
      double s5 = 0, s10 = 0;
      int n = 0;
      for (const auto& r : pool)
        if (r.model == m && r.complexity == cx) {
          s5 += *r.ndcg5;
          s10 += *r.ndcg10;
          ++n;
        }
      row.push_back(n ? fixed(s5 / n, 2) : kMissing);
      row.push_back(n ? fixed(s10 / n, 2) : kMissing);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

ReportTable failure_table(const std::vector<EvalRecord>& records) {
  ReportTable t{"failures", "Failure categories per model, condition and format",
                {"model", "condition", "format", "n", "failure_rate", "no_json_found", "missing_keys",
                 "unknown_items", "empty_list", "transport_failure"},
                {}};
  for (const auto& s : summarize(records, {"model", "condition", "format"})) {
    auto count = [&](const char* k) {
      auto it = s.failures.find(k);
      return std::to_string(it == s.failures.end() ? 0 : it->second);
    };
    t.rows.push_back({s.key_value("model"), s.key_value("condition"), s.key_value("format"),
                      std::to_string(s.n), fixed(s.failure_rate()), count("no_json_found"),
                      count("missing_keys"), count("unknown_items"), count("empty_list"),
                      count("transport_failure")});
  }
  return t;
}

}  // namespace

std::string ReportTable::to_csv() const {
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) os << ',';
      os << csv_escape(cells[i] == kMissing ? "" : cells[i]);
    }
    os << '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  return os.str();
}

std::string ReportTable::to_markdown() const {
  std::ostringstream os;
  os << "### " << title << "\n\n|";
  for (const auto& h : header) os << ' ' << h << " |";
  os << "\n|";
  for (std::size_t i = 0; i < header.size(); ++i) os << (i == 0 ? " --- |" : " ---: |");
  os << '\n';
  for (const auto& r : rows) {
    os << '|';
    for (const auto& c : r) os << ' ' << c << " |";
    os << '\n';
  }
  if (rows.empty()) os << "\n_No matching records._\n";
  return os.str();
}

std::vector<ReportTable> build_report(const std::vector<EvalRecord>& records, const ReportOptions& options) {
  if (records.empty()) throw EmptyReportError("no result records to report on");
  return {
      corpus_distribution(records),
      accuracy_by_model(records),
      accuracy_by_complexity(records),
      accuracy_by_strategy(records),
      condition_comparison(records, options),
      format_comparison(records, options),
      list_length_table(records),
      ndcg_table(records, options),
      failure_table(records),
  };
}

std::vector<fs::path> report(const fs::path& results_path, const fs::path& out_dir,
                             const ReportOptions& options) {
  if (!fs::exists(results_path)) throw EmptyReportError("results file " + results_path.string() + " does not exist");
  const auto records = read_records_jsonl(results_path);
  const auto tables = build_report(records, options);

  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  std::ostringstream combined;
  combined << "# Evaluation report\n\nSource: `" << results_path.filename().string() << "` (" << records.size()
           << " records)\n\n";
  for (const auto& t : tables) {
    const auto csv = out_dir / (t.name + ".csv");
    const auto md = out_dir / (t.name + ".md");
    std::ofstream(csv, std::ios::binary) << t.to_csv();
    std::ofstream(md, std::ios::binary) << t.to_markdown();
    written.push_back(csv);
    written.push_back(md);
    combined << t.to_markdown() << '\n';
  }
  combined << "---\n\nAccuracy counts unparseable and failed replies as incorrect. Standard deviations are "
              "population (divide by n). NDCG relevance follows the run's ndcg_relevance setting "
              "(graded: the strategy's aggregate score).\n";
  const auto summary = out_dir / "report.md";
  std::ofstream(summary, std::ios::binary) << combined.str();
  written.push_back(summary);
  return written;
}

}  // namespace grpbench
