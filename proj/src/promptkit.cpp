#include "grpbench/promptkit.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>
#include <stdexcept>

#include "prompt_templates.hpp"
#include "titles_resource.hpp"

namespace grpbench {

namespace {

constexpr std::uint64_t kTitleTag = 0x7469746c65ULL;  // "title"
constexpr std::uint64_t kIclTag = 0x69636cULL;         // "icl"
constexpr int kIclItems = 50;
constexpr int kIclSizes[] = {2, 4, 8};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
    s.replace(pos, from.size(), to);
}

// Domain cues rename the item vocabulary of the prompt text.
std::string with_domain_vocabulary(std::string text) {
  replace_all(text, "item", "movie");
  replace_all(text, "Item", "Movie");
  return text;
}

const std::regex& anonymous_item_pattern() {
  static const std::regex re("item_[0-9]+", std::regex::icase);
  return re;
}

std::string dataframe_text(const GroupScenario& s) {
  const std::string index_header = "UserId";
  std::size_t index_width = index_header.size();
  for (const auto& u : s.user_ids) index_width = std::max(index_width, u.size());

  std::vector<std::size_t> widths(s.item_ids.size());
  for (std::size_t i = 0; i < s.item_ids.size(); ++i) {
    widths[i] = s.item_ids[i].size();
    for (const auto& row : s.ratings)
      widths[i] = std::max(widths[i], std::to_string(row[i]).size());
  }

  auto pad_left = [](const std::string& v, std::size_t w) {
    return std::string(w > v.size() ? w - v.size() : 0, ' ') + v;
  };
  auto pad_right = [](const std::string& v, std::size_t w) {
    return v + std::string(w > v.size() ? w - v.size() : 0, ' ');
  };

  std::ostringstream os;
  os << pad_right(index_header, index_width);
  for (std::size_t i = 0; i < s.item_ids.size(); ++i) os << "  " << pad_left(s.item_ids[i], widths[i]);
  for (std::size_t u = 0; u < s.user_ids.size(); ++u) {
    os << '\n' << pad_right(s.user_ids[u], index_width);
    for (std::size_t i = 0; i < s.item_ids.size(); ++i)
      os << "  " << pad_left(std::to_string(s.ratings[u][i]), widths[i]);
  }
  return os.str();
}

}  // namespace

std::string_view to_string(ScenarioFormat format) {
  switch (format) {
    case ScenarioFormat::JsonItem: return "json_item";
    case ScenarioFormat::JsonUser: return "json_user";
    case ScenarioFormat::DataframeText: return "dataframe";
  }
  return "?";
}

std::optional<ScenarioFormat> parse_scenario_format(std::string_view name) {
  for (auto f : kAllFormats)
    if (to_string(f) == name) return f;
  return std::nullopt;
}

void PromptCondition::validate() const {
  const int modifiers = int{with_explanation} + int{with_icl} + int{with_domain_cues};
  if (modifiers > 1)
    throw ConfigError("prompt conditions are applied to the baseline one at a time, not stacked");
  if (ranked_topk && *ranked_topk < 1) throw ConfigError("ranked top-k must be >= 1");
}

std::string PromptCondition::label() const {
  std::string base = with_explanation  ? "explanation"
                     : with_icl        ? "icl"
                     : with_domain_cues ? "domain_cues"
                                        : "baseline";
  if (ranked_topk) base += "+top" + std::to_string(*ranked_topk);
  return base;
}

PromptCondition PromptCondition::parse(std::string_view label) {
  PromptCondition c;
  std::string_view base = label;
  if (auto plus = label.find('+'); plus != std::string_view::npos) {
    base = label.substr(0, plus);
    auto rest = label.substr(plus + 1);
    if (rest.substr(0, 3) != "top" || rest.size() == 3)
      throw ConfigError("unknown condition suffix in '" + std::string(label) + "'");
    int k = 0;
    for (char ch : rest.substr(3)) {
      if (!std::isdigit(static_cast<unsigned char>(ch)))
        throw ConfigError("bad top-k in condition '" + std::string(label) + "'");
      k = k * 10 + (ch - '0');
    }
    c.ranked_topk = k;
  }
  if (base == "explanation") c.with_explanation = true;
  else if (base == "icl") c.with_icl = true;
  else if (base == "domain_cues") c.with_domain_cues = true;
  else if (base != "baseline") throw ConfigError("unknown condition '" + std::string(label) + "'");
  c.validate();
  return c;
}

std::vector<PromptCondition> standard_conditions(std::optional<int> ranked_topk) {
  std::vector<PromptCondition> out(4);
  out[1].with_explanation = true;
  out[2].with_icl = true;
  out[3].with_domain_cues = true;
  for (auto& c : out) c.ranked_topk = ranked_topk;
  return out;
}

TitleBank::TitleBank(std::vector<std::string> titles) {
  std::set<std::string> seen;
  for (auto& raw : titles) {
    auto t = trim(raw);
    if (t.empty()) continue;
    if (std::regex_search(t, anonymous_item_pattern()))
      throw ConfigError("title looks like an anonymous item id: " + t);
    if (!seen.insert(lower(t)).second) continue;
    titles_.push_back(std::move(t));
  }
}

TitleBank TitleBank::bundled() {
  std::vector<std::string> lines;
  std::istringstream in{std::string(resources::kBundledTitles)};
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return TitleBank(std::move(lines));
}

TitleBank TitleBank::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open title file " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return TitleBank(std::move(lines));
}

TitleMap TitleBank::assign(const GroupScenario& scenario) const {
  if (titles_.size() < scenario.item_ids.size())
    throw ConfigError("title bank has " + std::to_string(titles_.size()) +
                      " titles, scenario needs " + std::to_string(scenario.item_ids.size()));
  std::vector<std::string> pool = titles_;
  SeededRng rng(mix_seed(scenario.seed, kTitleTag));
  rng.shuffle(pool);
  TitleMap map;
  for (std::size_t i = 0; i < scenario.item_ids.size(); ++i) map[scenario.item_ids[i]] = pool[i];
  return map;
}

std::vector<std::string> IclBank::scenario_ids() const {
  std::vector<std::string> ids;
  for (const auto& e : examples) ids.push_back(e.scenario.scenario_id);
  return ids;
}

IclBank make_icl_bank(const StrategySpec& strategy, std::uint64_t seed, RatingRange range) {
  strategy.validate(range);
  IclBank bank{strategy, seed, {}};
  for (int size : kIclSizes) {
    const auto scenario_seed = mix_seed(mix_seed(seed, kIclTag), static_cast<std::uint64_t>(size));
    auto s = generate_scenario(size, kIclItems, scenario_seed, range,
                               "icl_" + std::to_string(size) + "x" + std::to_string(kIclItems));
    auto gold = gold_label(s, strategy);
    bank.examples.push_back({std::move(s), std::move(gold)});
  }
  return bank;
}

nlohmann::ordered_json to_json(const IclBank& bank) {
  nlohmann::ordered_json j;
  j["strategy"] = to_string(bank.strategy.kind);
  if (bank.strategy.kind == StrategyKind::APP) j["approval_threshold"] = bank.strategy.approval_threshold;
  j["seed"] = bank.seed;
  j["examples"] = nlohmann::ordered_json::array();
  for (const auto& e : bank.examples) {
    auto entry = to_json(e.scenario);
    entry["winners"] = e.gold.winners;
    entry["ranking"] = e.gold.ranking;
    j["examples"].push_back(std::move(entry));
  }
  return j;
}

GroupScenario apply_titles(const GroupScenario& scenario, const TitleMap& titles) {
  GroupScenario out = scenario;
  for (auto& id : out.item_ids) {
    auto it = titles.find(id);
    if (it == titles.end()) throw ConfigError("no title for " + id);
    id = it->second;
  }
  return out;
}

std::string serialize_scenario(const GroupScenario& scenario, ScenarioFormat format) {
  switch (format) {
    case ScenarioFormat::JsonItem: {
      nlohmann::ordered_json j = nlohmann::ordered_json::object();
      for (std::size_t i = 0; i < scenario.item_ids.size(); ++i) {
        auto col = nlohmann::ordered_json::array();
        for (const auto& row : scenario.ratings) col.push_back(row[i]);
        j[scenario.item_ids[i]] = std::move(col);
      }
      return j.dump();
    }
    case ScenarioFormat::JsonUser: {
      nlohmann::ordered_json j = nlohmann::ordered_json::object();
      for (std::size_t u = 0; u < scenario.user_ids.size(); ++u) {
        nlohmann::ordered_json row = nlohmann::ordered_json::object();
        for (std::size_t i = 0; i < scenario.item_ids.size(); ++i)
          row[scenario.item_ids[i]] = scenario.ratings[u][i];
        j[scenario.user_ids[u]] = std::move(row);
      }
      return j.dump();
    }
    case ScenarioFormat::DataframeText:
      return dataframe_text(scenario);
  }
  throw std::logic_error("unhandled scenario format");
}

std::string render_template(std::string_view tpl, const std::map<std::string, std::string>& values) {
  static const std::regex placeholder(R"(\{([a-z_]+)\})");
  std::string out;
  std::string text(tpl);
  auto last = text.cbegin();
  for (std::sregex_iterator it(text.begin(), text.end(), placeholder), end; it != end; ++it) {
    const auto& m = *it;
    auto found = values.find(m[1].str());
    if (found == values.end())
      throw std::invalid_argument("template placeholder without value: " + m[0].str());
    out.append(last, m[0].first);
    out += found->second;
    last = m[0].second;
  }
  out.append(last, text.cend());
  return out;
}

std::string strategy_explanation(const StrategySpec& strategy) {
  switch (strategy.kind) {
    case StrategyKind::ADD: return templates::kExplainADD;
    case StrategyKind::APP:
      return render_template(templates::kExplainAPP,
                             {{"threshold", std::to_string(strategy.approval_threshold)}});
    case StrategyKind::LMS: return templates::kExplainLMS;
    case StrategyKind::MPL: return templates::kExplainMPL;
  }
  throw std::logic_error("unhandled strategy");
}

std::string format_answer(const StrategySpec& strategy, const std::vector<std::string>& items,
                          const std::optional<std::string>& explanation) {
  nlohmann::ordered_json j;
  j["strategy"] = to_string(strategy.kind);
  j["recommendation"] = items;
  if (explanation) j["explanation"] = *explanation;
  return j.dump();
}

PromptBundle build_prompt(const GroupScenario& scenario, const StrategySpec& strategy,
                          ScenarioFormat format, const PromptCondition& condition,
                          const IclBank* icl_bank, const TitleBank* title_bank) {
  condition.validate();

  PromptBundle bundle;
  bundle.strategy = strategy;
  bundle.format = format;
  bundle.condition = condition;
  bundle.scenario_id = scenario.scenario_id;

  if (condition.with_icl) {
    if (icl_bank == nullptr || icl_bank->examples.size() != 3)
      throw ConfigError("in-context learning prompt needs a bank of three solved examples");
    if (!(icl_bank->strategy == strategy))
      throw ConfigError("in-context examples were solved with a different strategy");
    bundle.icl_example_ids = icl_bank->scenario_ids();
  }

  const GroupScenario* shown = &scenario;
  GroupScenario titled;
  if (condition.with_domain_cues) {
    if (title_bank == nullptr) throw ConfigError("domain cues need a title bank");
    bundle.title_map = title_bank->assign(scenario);
    titled = apply_titles(scenario, bundle.title_map);
    shown = &titled;
  }

  auto text = [&](std::string_view raw) {
    return condition.with_domain_cues ? with_domain_vocabulary(std::string(raw)) : std::string(raw);
  };

  bundle.scenario_block = serialize_scenario(*shown, format);

  std::string intro;
  switch (format) {
    case ScenarioFormat::JsonItem: intro = templates::kIntroJsonItem; break;
    case ScenarioFormat::JsonUser: intro = templates::kIntroJsonUser; break;
    case ScenarioFormat::DataframeText: intro = templates::kIntroDataframe; break;
  }

  const std::map<std::string, std::string> values{
      {"strategy_code", std::string(to_string(strategy.kind))}};

  std::vector<std::string> parts;
  parts.push_back(text(templates::kTaskFraming));
  parts.push_back(text(templates::kStrategyHeader) + "\n" + text(strategy_explanation(strategy)));
  parts.push_back(text(intro) + "\n" + bundle.scenario_block);

  if (condition.ranked_topk) {
    bundle.requested_k = std::min(*condition.ranked_topk, scenario.num_items);
    parts.push_back(render_template(text(templates::kRankedInstruction),
                                    {{"k", std::to_string(bundle.requested_k)}}));
  } else {
    parts.push_back(text(templates::kTieInstruction));
  }

  if (condition.with_explanation) {
    parts.push_back(render_template(text(templates::kOutputContractExplained), values));
    parts.push_back(std::string(templates::kExplanationRequest) + " " +
                    templates::kExplanationPlacement);
  } else {
    parts.push_back(render_template(text(templates::kOutputContract), values));
  }

  if (condition.with_icl) {
    std::string block = templates::kIclHeader;
    for (const auto& ex : icl_bank->examples) {
      std::vector<std::string> answer = ex.gold.winners;
      if (condition.ranked_topk) {
        answer = ex.gold.ranking;
        answer.resize(static_cast<std::size_t>(std::min(*condition.ranked_topk, ex.scenario.num_items)));
      }
      block += "\n\n" + render_template(templates::kIclExample,
                                        {{"group_table", serialize_scenario(ex.scenario, ScenarioFormat::JsonItem)},
                                         {"correct_output", format_answer(strategy, answer)}});
    }
    parts.push_back(std::move(block));
  }

  std::string prompt;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) prompt += "\n\n";
    prompt += parts[i];
  }
  bundle.prompt_text = std::move(prompt);
  return bundle;
}

}  // namespace grpbench
