#pragma once

// Independent reading of the four strategies, used only to cross-check the
// production oracle. Every item is compared pairwise against every other item
// straight from the procedure text; nothing is shared with src/aggregation.cpp.

#include <set>
#include <string>
#include <vector>

namespace naive {

using Matrix = std::vector<std::vector<int>>;  // [user][item]

enum class Rule { ADD, APP, LMS, MPL };

// "highest sum of all group members' ratings"
inline long sum_of(const Matrix& m, std::size_t item) {
  long s = 0;
  for (const auto& row : m) s += row[item];
  return s;
}

// "highest number of ratings above a predefined threshold" (at or above)
inline long approvals_of(const Matrix& m, std::size_t item, int threshold) {
  long c = 0;
  for (const auto& row : m)
    if (row[item] >= threshold) c = c + 1;
  return c;
}

// Lowest per-item rating: the largest v every member's rating reaches.
inline long floor_of(const Matrix& m, std::size_t item) {
  for (int v = 1000; v >= -1000; --v) {
    bool all = true;
    for (const auto& row : m) all = all && row[item] >= v;
    if (all) return v;
  }
  return -1001;
}

// "highest individual group member rating"
inline bool holds_global_max(const Matrix& m, std::size_t item) {
  int global = m[0][0];
  for (const auto& row : m)
    for (int r : row)
      if (r > global) global = r;
  for (const auto& row : m)
    if (row[item] == global) return true;
  return false;
}

/// Indices of winning items.
inline std::set<std::size_t> winners(const Matrix& m, Rule rule, int threshold = 0) {
  const std::size_t n = m[0].size();
  std::set<std::size_t> out;
  if (rule == Rule::MPL) {
    for (std::size_t i = 0; i < n; ++i)
      if (holds_global_max(m, i)) out.insert(i);
    return out;
  }
  auto value = [&](std::size_t i) {
    switch (rule) {
      case Rule::ADD: return sum_of(m, i);
      case Rule::APP: return approvals_of(m, i, threshold);
      default: return floor_of(m, i);
    }
  };
  for (std::size_t i = 0; i < n; ++i) {
    bool beaten = false;
    for (std::size_t j = 0; j < n; ++j)
      if (value(j) > value(i)) beaten = true;
    if (!beaten) out.insert(i);
  }
  return out;
}

}  // namespace naive
