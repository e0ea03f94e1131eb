#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "netsync/graph.hpp"

namespace fixtures {

// e1: v1->v2, e2: v2->v3, e3: v1->v3
inline netsync::Graph triangle() {
  const std::vector<std::pair<std::size_t, std::size_t>> e{{0, 1}, {1, 2}, {0, 2}};
  return netsync::Graph::from_pairs(3, e);
}

inline netsync::Graph single_edge() {
  const std::vector<std::pair<std::size_t, std::size_t>> e{{0, 1}};
  return netsync::Graph::from_pairs(2, e);
}

inline double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max({1e-300, std::abs(a), std::abs(b)});
}

}  // namespace fixtures
