#include "grpbench/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_set>

namespace grpbench {

namespace {

// Tags keep the seed streams for different purposes apart.
constexpr std::uint64_t kCellTag = 0x63656c6cULL;  // "cell"
constexpr std::uint64_t kNameTag = 0x6e616d65ULL;  // "name"

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string seed_scenario_id(std::uint64_t seed) {
  std::ostringstream os;
  os << "scn_" << std::hex << std::setw(16) << std::setfill('0') << seed;
  return os.str();
}

}  // namespace

void RatingRange::validate() const {
  if (min >= max) {
    throw ConfigError("rating range must satisfy rating_min < rating_max (got " +
                      std::to_string(min) + ".." + std::to_string(max) + ")");
  }
}

void CorpusConfig::validate() const {
  if (total_groups < 1) throw ConfigError("total_groups must be >= 1");
  if (group_sizes.empty() || item_counts.empty())
    throw ConfigError("group_sizes and item_counts must be non-empty");
  for (int g : group_sizes)
    if (g < 1) throw ConfigError("group sizes must be >= 1");
  for (int n : item_counts)
    if (n < 1) throw ConfigError("item counts must be >= 1");
  range.validate();
  if (!anonymize_items) {
    const int needed = *std::max_element(item_counts.begin(), item_counts.end());
    if (static_cast<int>(std::set(item_names.begin(), item_names.end()).size()) < needed)
      throw ConfigError("non-anonymized corpus needs at least " + std::to_string(needed) +
                        " distinct item names");
  }
}

void validate_scenario(const GroupScenario& s) {
  auto fail = [&](const std::string& why) {
    throw ConfigError("scenario '" + s.scenario_id + "': " + why);
  };
  if (s.group_size < 1 || s.num_items < 1) fail("empty rating matrix");
  if (static_cast<int>(s.user_ids.size()) != s.group_size) fail("user_ids size != group_size");
  if (static_cast<int>(s.item_ids.size()) != s.num_items) fail("item_ids size != num_items");
  if (static_cast<int>(s.ratings.size()) != s.group_size) fail("ratings row count != group_size");
  for (const auto& row : s.ratings)
    if (static_cast<int>(row.size()) != s.num_items) fail("ratings column count != num_items");
  if (s.complexity != s.group_size * s.num_items) fail("complexity != group_size * num_items");
  if (std::set(s.user_ids.begin(), s.user_ids.end()).size() != s.user_ids.size())
    fail("duplicate user id");
  if (std::set(s.item_ids.begin(), s.item_ids.end()).size() != s.item_ids.size())
    fail("duplicate item id");
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(a) ^ (b + 0x632be59bd9b4e019ULL));
}

std::uint64_t stable_hash(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

SeededRng::SeededRng(std::uint64_t seed) : engine_(seed) {}

std::int64_t SeededRng::uniform(std::int64_t lo, std::int64_t hi) {
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  if (span == 0) return lo + static_cast<std::int64_t>(engine_());  // full 64-bit range
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % span;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return lo + static_cast<std::int64_t>(x % span);
}

double SeededRng::unit() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

GroupScenario generate_scenario(int group_size, int num_items, std::uint64_t seed,
                                RatingRange range, std::string scenario_id) {
  if (group_size < 1 || num_items < 1)
    throw ConfigError("group size and item count must both be >= 1");
  range.validate();

  GroupScenario s;
  s.scenario_id = scenario_id.empty() ? seed_scenario_id(seed) : std::move(scenario_id);
  s.group_size = group_size;
  s.num_items = num_items;
  s.complexity = group_size * num_items;
  s.seed = seed;

  SeededRng rng(seed);

  // Pseudonymous five-digit user ids; re-draw on collision.
  std::unordered_set<std::int64_t> taken;
  s.user_ids.reserve(group_size);
  while (static_cast<int>(s.user_ids.size()) < group_size) {
    auto digits = rng.uniform(10000, 99999);
    if (taken.insert(digits).second) s.user_ids.push_back("user_" + std::to_string(digits));
  }

  s.item_ids.reserve(num_items);
  for (int i = 1; i <= num_items; ++i) s.item_ids.push_back("item_" + std::to_string(i));

  s.ratings.assign(group_size, std::vector<Rating>(num_items));
  for (auto& row : s.ratings)
    for (auto& r : row) r = static_cast<Rating>(rng.uniform(range.min, range.max));

  return s;
}

std::string corpus_scenario_id(int index) {
  std::ostringstream os;
  os << "grp_" << std::setw(5) << std::setfill('0') << index;
  return os.str();
}

std::vector<GroupScenario> generate_corpus(const CorpusConfig& config) {
  config.validate();
  const auto n_sizes = config.group_sizes.size();
  const auto n_cells = n_sizes * config.item_counts.size();

  std::vector<GroupScenario> corpus;
  corpus.reserve(config.total_groups);
  for (int idx = 0; idx < config.total_groups; ++idx) {
    const std::uint64_t seed = mix_seed(config.master_seed, static_cast<std::uint64_t>(idx));
    std::size_t cell;
    if (config.stratified) {
      cell = static_cast<std::size_t>(idx) % n_cells;
    } else {
      SeededRng cell_rng(mix_seed(seed, kCellTag));
      cell = static_cast<std::size_t>(cell_rng.uniform(0, static_cast<std::int64_t>(n_cells) - 1));
    }
    const int size = config.group_sizes[cell % n_sizes];
    const int items = config.item_counts[cell / n_sizes];
    auto s = generate_scenario(size, items, seed, config.range, corpus_scenario_id(idx));
    if (!config.anonymize_items) {
      std::vector<std::string> names(config.item_names);
      std::sort(names.begin(), names.end());
      names.erase(std::unique(names.begin(), names.end()), names.end());
      SeededRng name_rng(mix_seed(seed, kNameTag));
      name_rng.shuffle(names);
      s.item_ids.assign(names.begin(), names.begin() + items);
    }
    corpus.push_back(std::move(s));
  }
  return corpus;
}

nlohmann::ordered_json to_json(const GroupScenario& s) {
  nlohmann::ordered_json j;
  j["scenario_id"] = s.scenario_id;
  j["user_ids"] = s.user_ids;
  j["item_ids"] = s.item_ids;
  j["ratings"] = s.ratings;
  j["group_size"] = s.group_size;
  j["num_items"] = s.num_items;
  j["complexity"] = s.complexity;
  j["seed"] = s.seed;
  return j;
}

GroupScenario scenario_from_json(const nlohmann::json& j) {
  GroupScenario s;
  try {
    j.at("scenario_id").get_to(s.scenario_id);
    j.at("user_ids").get_to(s.user_ids);
    j.at("item_ids").get_to(s.item_ids);
    j.at("ratings").get_to(s.ratings);
    j.at("group_size").get_to(s.group_size);
    j.at("num_items").get_to(s.num_items);
    j.at("complexity").get_to(s.complexity);
    j.at("seed").get_to(s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed scenario record: ") + e.what());
  }
  validate_scenario(s);
  return s;
}

void write_corpus_jsonl(const std::vector<GroupScenario>& corpus, std::ostream& out) {
  for (const auto& s : corpus) out << to_json(s).dump() << '\n';
}

void write_corpus_jsonl(const std::vector<GroupScenario>& corpus,
                        const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write corpus file " + path.string());
  write_corpus_jsonl(corpus, out);
}

std::vector<GroupScenario> read_corpus_jsonl(std::istream& in) {
  std::vector<GroupScenario> corpus;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw ConfigError("corpus line " + std::to_string(lineno) + " is not valid JSON");
    corpus.push_back(scenario_from_json(j));
  }
  std::set<std::string> ids;
  for (const auto& s : corpus)
    if (!ids.insert(s.scenario_id).second)
      throw ConfigError("duplicate scenario_id in corpus: " + s.scenario_id);
  return corpus;
}

std::vector<GroupScenario> read_corpus_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open corpus file " + path.string());
  return read_corpus_jsonl(in);
}

}  // namespace grpbench
