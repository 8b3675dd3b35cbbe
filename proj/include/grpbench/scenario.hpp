#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <string_view>
#include <utility>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace grpbench {

/// Raised for any invalid user-supplied configuration (ranges, grids,
/// missing resources). Callers map it to the configuration exit code.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Rating = int;

/// One group: a users x items integer rating matrix plus identifiers.
/// ratings[u][i] is the rating of user_ids[u] for item_ids[i].
struct GroupScenario {
  std::string scenario_id;
  std::vector<std::string> user_ids;
  std::vector<std::string> item_ids;
  std::vector<std::vector<Rating>> ratings;
  int group_size = 0;
  int num_items = 0;
  int complexity = 0;
  std::uint64_t seed = 0;

  const Rating& at(std::size_t user, std::size_t item) const { return ratings[user][item]; }

  bool operator==(const GroupScenario&) const = default;
};

struct RatingRange {
  Rating min = 0;
  Rating max = 10;

  void validate() const;
};

struct CorpusConfig {
  int total_groups = 1000;
  std::vector<int> group_sizes{2, 4, 8};
  std::vector<int> item_counts{5, 10, 25, 50};
  RatingRange range{};
  std::uint64_t master_seed = 20250101;
  // When false, item ids are real-world names sampled per scenario from
  // item_names instead of "item_1".."item_N".
  bool anonymize_items = true;
  std::vector<std::string> item_names;
  // Exactly total_groups / cells scenarios per cell (remainder spread in grid
  // order) instead of a uniform random draw per group.
  bool stratified = false;

  void validate() const;
};

/// Throws ConfigError when the scenario violates a structural invariant.
void validate_scenario(const GroupScenario& s);

/// Stable 64-bit mix of two values (splitmix64 finaliser over a combined
/// word). Used to derive per-scenario and per-purpose seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

/// Stable FNV-1a over bytes; independent of the standard library's std::hash.
std::uint64_t stable_hash(std::string_view text);

/// Uniform integer in [lo, hi] drawn from a 64-bit Mersenne Twister by
/// rejection sampling. Reproducible across standard library implementations,
/// which std::uniform_int_distribution is not.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);
  std::int64_t uniform(std::int64_t lo, std::int64_t hi);
  double unit();  // [0, 1)

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      auto j = static_cast<std::size_t>(uniform(0, static_cast<std::int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

GroupScenario generate_scenario(int group_size, int num_items, std::uint64_t seed,
                                RatingRange range = {}, std::string scenario_id = {});

std::vector<GroupScenario> generate_corpus(const CorpusConfig& config);

/// "grp_00042" style corpus identifier.
std::string corpus_scenario_id(int index);

nlohmann::ordered_json to_json(const GroupScenario& s);
GroupScenario scenario_from_json(const nlohmann::json& j);

void write_corpus_jsonl(const std::vector<GroupScenario>& corpus, std::ostream& out);
void write_corpus_jsonl(const std::vector<GroupScenario>& corpus, const std::filesystem::path& path);
std::vector<GroupScenario> read_corpus_jsonl(std::istream& in);
std::vector<GroupScenario> read_corpus_jsonl(const std::filesystem::path& path);

}  // namespace grpbench
