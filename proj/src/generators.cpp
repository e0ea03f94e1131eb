#include "netsync/generators.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>
#include <vector>

#include "netsync/error.hpp"

namespace netsync {

double standard_normal(Rng& rng) {
  while (true) {
    const double u = 2.0 * uniform01(rng) - 1.0;
    const double v = 2.0 * uniform01(rng) - 1.0;
    const double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
  }
}

namespace generators {

using Pairs = std::vector<std::pair<std::size_t, std::size_t>>;

Graph path(std::size_t n) {
  Pairs edges;
  for (std::size_t v = 0; v + 1 < n; ++v) edges.emplace_back(v, v + 1);
  return Graph::from_pairs(n, edges);
}

Graph ring(std::size_t n) {
  if (n < 3) throw InputError("a ring needs at least 3 vertices");
  Pairs edges;
  for (std::size_t v = 0; v + 1 < n; ++v) edges.emplace_back(v, v + 1);
  edges.emplace_back(n - 1, 0);
  return Graph::from_pairs(n, edges);
}

Graph complete(std::size_t n) {
  Pairs edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) edges.emplace_back(i, j);
  }
  return Graph::from_pairs(n, edges);
}

Graph star(std::size_t n) {
  Pairs edges;
  for (std::size_t v = 1; v < n; ++v) edges.emplace_back(0, v);
  return Graph::from_pairs(n, edges);
}

Graph random_connected(Rng& rng, std::size_t n, std::size_t extra_edges) {
  if (n == 0) throw InputError("graph needs at least one vertex");
  const std::size_t max_edges = n * (n - 1) / 2;
  if (n - 1 + extra_edges > max_edges) {
    throw InputError("too many extra edges for a simple graph on " + std::to_string(n) +
                     " vertices");
  }

  Pairs tree;
  if (n == 2) {
    tree.emplace_back(0, 1);
  } else if (n > 2) {
    std::vector<std::size_t> code(n - 2);
    for (auto& c : code) c = uniform_index(rng, n);
    std::vector<std::size_t> degree(n, 1);
    for (auto c : code) ++degree[c];
    for (auto c : code) {
      const auto leaf = static_cast<std::size_t>(
          std::find(degree.begin(), degree.end(), std::size_t{1}) - degree.begin());
      tree.emplace_back(leaf, c);
      --degree[leaf];
      --degree[c];
    }
    std::vector<std::size_t> last;
    for (std::size_t v = 0; v < n; ++v) {
      if (degree[v] == 1) last.push_back(v);
    }
    tree.emplace_back(last.at(0), last.at(1));
  }

  std::set<std::pair<std::size_t, std::size_t>> used;
  for (auto [a, b] : tree) used.emplace(std::min(a, b), std::max(a, b));

  Pairs edges = tree;
  Pairs missing;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (!used.contains({i, j})) missing.emplace_back(i, j);
    }
  }
  for (std::size_t k = 0; k < extra_edges; ++k) {
    const auto pick = k + uniform_index(rng, missing.size() - k);
    std::swap(missing[k], missing[pick]);
    edges.push_back(missing[k]);
  }
  for (auto& [a, b] : edges) {
    if (rng() & 1U) std::swap(a, b);
  }
  return Graph::from_pairs(n, edges);
}

}  // namespace generators
}  // namespace netsync
