#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <random>
#include <string>

#include "grpbench/scenario.hpp"

namespace fixtures {

/// The worked two-user, five-item example group.
inline grpbench::GroupScenario table2() {
  grpbench::GroupScenario s;
  s.scenario_id = "table2";
  s.user_ids = {"user_57749", "user_78033"};
  s.item_ids = {"item_1", "item_2", "item_3", "item_4", "item_5"};
  s.ratings = {{4, 2, 2, 10, 9}, {10, 7, 3, 4, 7}};
  s.group_size = 2;
  s.num_items = 5;
  s.complexity = 10;
  s.seed = 57749;
  return s;
}

inline grpbench::GroupScenario from_matrix(std::vector<std::vector<int>> m, std::string id = "m") {
  grpbench::GroupScenario s;
  s.scenario_id = std::move(id);
  s.group_size = static_cast<int>(m.size());
  s.num_items = static_cast<int>(m[0].size());
  s.complexity = s.group_size * s.num_items;
  for (int u = 0; u < s.group_size; ++u) s.user_ids.push_back("user_" + std::to_string(10000 + u));
  for (int i = 1; i <= s.num_items; ++i) s.item_ids.push_back("item_" + std::to_string(i));
  s.ratings = std::move(m);
  return s;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            ("grpbench_test_" + std::to_string(stamp) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixtures
