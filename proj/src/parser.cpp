#include "grpbench/parser.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace grpbench {

namespace {

std::string fold(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  std::string out(s.substr(b, e - b + 1));
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// Index one past the '}' closing the object opened at `open`, honouring
// string literals, or npos when the object never closes.
std::size_t matching_brace(std::string_view text, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (c == '\\') ++i;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{') ++depth;
    else if (c == '}' && --depth == 0) return i + 1;
  }
  return std::string_view::npos;
}

}  // namespace

std::string_view to_string(ParseFailure failure) {
  switch (failure) {
    case ParseFailure::None: return "none";
    case ParseFailure::NoJsonFound: return "no_json_found";
    case ParseFailure::MissingKeys: return "missing_keys";
    case ParseFailure::UnknownItems: return "unknown_items";
    case ParseFailure::EmptyList: return "empty_list";
  }
  return "?";
}

std::optional<ParseFailure> parse_failure_from_string(std::string_view name) {
  for (auto f : {ParseFailure::None, ParseFailure::NoJsonFound, ParseFailure::MissingKeys,
                 ParseFailure::UnknownItems, ParseFailure::EmptyList})
    if (to_string(f) == name) return f;
  return std::nullopt;
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

ParsedRecommendation parse_response(std::string_view raw_text, const GroupScenario& scenario,
                                    const TitleMap& titles) {
  ParsedRecommendation out;

  std::optional<nlohmann::json> chosen;
  bool saw_object = false;
  for (auto open = raw_text.find('{'); open != std::string_view::npos;
       open = raw_text.find('{', open + 1)) {
    const auto close = matching_brace(raw_text, open);
    if (close == std::string_view::npos) continue;
    auto j = nlohmann::json::parse(raw_text.substr(open, close - open), nullptr, false);
    if (j.is_discarded() || !j.is_object()) continue;
    saw_object = true;
    if (j.contains("recommendation")) {
      chosen = std::move(j);
      break;
    }
  }
  if (!chosen) {
    out.failure = saw_object ? ParseFailure::MissingKeys : ParseFailure::NoJsonFound;
    return out;
  }

  const auto& obj = *chosen;
  if (auto it = obj.find("strategy"); it != obj.end())
    out.strategy_echo = it->is_string() ? it->get<std::string>() : it->dump();
  if (auto it = obj.find("explanation"); it != obj.end())
    out.explanation_text = it->is_string() ? it->get<std::string>() : it->dump();

  const auto& rec = obj["recommendation"];
  std::vector<std::string> names;
  if (rec.is_string()) {
    names.push_back(rec.get<std::string>());
  } else if (rec.is_array()) {
    for (const auto& v : rec) names.push_back(v.is_string() ? v.get<std::string>() : v.dump());
  } else {
    out.failure = ParseFailure::MissingKeys;
    return out;
  }
  if (names.empty()) {
    out.failure = ParseFailure::EmptyList;
    return out;
  }

  std::unordered_map<std::string, std::string> lookup;
  if (titles.empty()) {
    for (const auto& id : scenario.item_ids) lookup.emplace(fold(id), id);
  } else {
    for (const auto& [id, title] : titles) lookup.emplace(fold(title), id);
  }

  std::unordered_set<std::string> taken;
  for (const auto& name : names) {
    auto it = lookup.find(fold(name));
    if (it == lookup.end()) {
      out.positional_items.push_back(name);
      out.unknown_items.push_back(name);
      const auto folded = fold(name);
      const bool near = std::any_of(lookup.begin(), lookup.end(), [&](const auto& kv) {
        return edit_distance(folded, kv.first) <= 2;
      });
      out.near_miss_count += near;
      continue;
    }
    out.positional_items.push_back(it->second);
    if (taken.insert(it->second).second) out.items.push_back(it->second);
    else out.had_duplicates = true;
  }

  out.failure = out.unknown_items.empty() ? ParseFailure::None : ParseFailure::UnknownItems;
  return out;
}

}  // namespace grpbench
