#include "netsync/graph.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

#include "netsync/error.hpp"
#include "netsync/linalg.hpp"

namespace netsync {

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent_[a] = b;
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
};

constexpr double kTwoPow53 = 9007199254740992.0;

}  // namespace

Graph::Graph(std::vector<std::string> vertices, std::span<const EdgeSpec> edges)
    : vertices_(std::move(vertices)) {
  for (std::size_t v = 0; v < vertices_.size(); ++v) {
    if (!vertex_lookup_.emplace(vertices_[v], v).second) {
      throw InputError("duplicate vertex id '" + vertices_[v] + "'");
    }
  }
  edges_.reserve(edges.size());
  for (const auto& spec : edges) {
    const auto s = vertex_lookup_.find(spec.source);
    const auto t = vertex_lookup_.find(spec.target);
    if (s == vertex_lookup_.end() || t == vertex_lookup_.end()) {
      throw InputError("edge '" + spec.id + "' references an unknown vertex");
    }
    if (s->second == t->second) {
      throw InputError("edge '" + spec.id + "' is a self-loop");
    }
    edges_.push_back(Edge{spec.id, s->second, t->second});
  }
  index();
}

Graph Graph::from_pairs(std::size_t vertex_count,
                        std::span<const std::pair<std::size_t, std::size_t>> edges) {
  std::vector<std::string> names;
  names.reserve(vertex_count);
  for (std::size_t v = 0; v < vertex_count; ++v) names.push_back("v" + std::to_string(v + 1));
  std::vector<EdgeSpec> specs;
  specs.reserve(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto [s, t] = edges[e];
    if (s >= vertex_count || t >= vertex_count) {
      throw InputError("edge endpoint out of range");
    }
    specs.push_back({"e" + std::to_string(e + 1), names[s], names[t]});
  }
  return Graph(std::move(names), specs);
}

void Graph::index() {
  edge_lookup_.clear();
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    if (!edge_lookup_.emplace(edges_[e].id, e).second) {
      throw InputError("duplicate edge id '" + edges_[e].id + "'");
    }
  }
  incidence_.assign(vertices_.size(), {});
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const auto& edge = edges_[e];
    incidence_[edge.source].push_back({e, edge.target, -1});
    incidence_[edge.target].push_back({e, edge.source, +1});
  }
}

std::size_t Graph::vertex_index(const std::string& id) const {
  const auto it = vertex_lookup_.find(id);
  if (it == vertex_lookup_.end()) throw InputError("unknown vertex '" + id + "'");
  return it->second;
}

std::size_t Graph::edge_index(const std::string& id) const {
  const auto it = edge_lookup_.find(id);
  if (it == edge_lookup_.end()) throw InputError("unknown edge '" + id + "'");
  return it->second;
}

Graph Graph::with_edge(std::size_t source, std::size_t target, std::string id) const {
  if (source >= vertex_count() || target >= vertex_count()) {
    throw InputError("edge endpoint out of range");
  }
  if (source == target) throw InputError("self-loops are not allowed");
  if (id.empty()) {
    std::size_t k = edges_.size() + 1;
    do {
      id = "e" + std::to_string(k++);
    } while (edge_lookup_.contains(id));
  }
  Graph out = *this;
  out.edges_.push_back(Edge{std::move(id), source, target});
  out.index();
  return out;
}

std::size_t Graph::component_count() const {
  DisjointSets sets(vertex_count());
  std::size_t components = vertex_count();
  for (const auto& e : edges_) {
    if (sets.unite(e.source, e.target)) --components;
  }
  return components;
}

bool Graph::bipartite() const {
  std::vector<int> colour(vertex_count(), -1);
  for (std::size_t start = 0; start < vertex_count(); ++start) {
    if (colour[start] >= 0) continue;
    colour[start] = 0;
    std::queue<std::size_t> queue;
    queue.push(start);
    while (!queue.empty()) {
      const auto v = queue.front();
      queue.pop();
      for (const auto& inc : incidence_[v]) {
        if (colour[inc.neighbor] < 0) {
          colour[inc.neighbor] = 1 - colour[v];
          queue.push(inc.neighbor);
        } else if (colour[inc.neighbor] == colour[v]) {
          return false;
        }
      }
    }
  }
  return true;
}

bool operator==(const Edge& a, const Edge& b) {
  return a.id == b.id && a.source == b.source && a.target == b.target;
}

bool operator==(const Graph& a, const Graph& b) {
  return a.vertices_ == b.vertices_ && a.edges_ == b.edges_;
}

// ---------------------------------------------------------------------------

Matrix IncidenceSet::reduced_laplacian() const {
  return reduced_incidence * reduced_incidence.transpose();
}

Matrix IncidenceSet::reduced_columns(std::span<const std::size_t> edges) const {
  Matrix out(reduced_incidence.rows(), static_cast<Eigen::Index>(edges.size()));
  for (std::size_t j = 0; j < edges.size(); ++j) {
    if (edges[j] >= edge_count()) throw InputError("edge index out of range");
    out.col(static_cast<Eigen::Index>(j)) =
        reduced_incidence.col(static_cast<Eigen::Index>(edges[j]));
  }
  return out;
}

std::size_t IncidenceSet::reduced_row(std::size_t v) const {
  if (v == reference || v >= vertex_count()) {
    throw InputError("vertex has no reduced row");
  }
  return v < reference ? v : v - 1;
}

Matrix IncidenceSet::expand(const Matrix& reduced) const {
  const auto n = static_cast<Eigen::Index>(vertex_count());
  const auto ref = static_cast<Eigen::Index>(reference);
  Matrix full = Matrix::Zero(n, reduced.cols());
  full.topRows(ref) = reduced.topRows(ref);
  full.bottomRows(n - ref - 1) = reduced.bottomRows(n - ref - 1);
  return full;
}

Matrix IncidenceSet::reduce(const Matrix& full) const {
  const auto n = static_cast<Eigen::Index>(vertex_count());
  const auto ref = static_cast<Eigen::Index>(reference);
  Matrix reduced(n - 1, full.cols());
  reduced.topRows(ref) = full.topRows(ref);
  reduced.bottomRows(n - ref - 1) = full.bottomRows(n - ref - 1);
  return reduced;
}

IncidenceSet build_incidence(const Graph& graph, std::size_t reference) {
  const auto n = graph.vertex_count();
  const auto m = graph.edge_count();
  if (n == 0) throw InputError("graph has no vertices");
  if (reference >= n) throw InputError("reference vertex out of range");

  IncidenceSet out;
  out.reference = reference;
  out.connected = graph.connected();
  out.incidence = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  out.adjacency = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t e = 0; e < m; ++e) {
    const auto& edge = graph.edge(e);
    const auto s = static_cast<Eigen::Index>(edge.source);
    const auto t = static_cast<Eigen::Index>(edge.target);
    const auto j = static_cast<Eigen::Index>(e);
    out.incidence(t, j) = 1.0;
    out.incidence(s, j) = -1.0;
    out.adjacency(s, t) += 1.0;
    out.adjacency(t, s) += 1.0;
  }
  out.degree = out.adjacency.rowwise().sum().asDiagonal();
  out.laplacian = out.degree - out.adjacency;
  out.reduced_incidence = out.reduce(out.incidence);
  return out;
}

IncidenceSet build_incidence(const Graph& graph, const std::string& reference) {
  return build_incidence(graph, graph.vertex_index(reference));
}

// ---------------------------------------------------------------------------

SpanningTreeCount spanning_tree_count(const Graph& graph) {
  if (!graph.connected()) {
    return {0.0, -std::numeric_limits<double>::infinity(), true};
  }
  if (graph.vertex_count() == 1) return {1.0, 0.0, true};
  const auto inc = build_incidence(graph, 0);
  const Matrix lw = inc.reduced_laplacian();
  const double log_value = linalg::SpdFactor(lw, "reduced Laplacian").log_determinant();
  const double det = linalg::determinant(lw);
  SpanningTreeCount out;
  out.log_value = log_value;
  if (det < kTwoPow53) {
    out.value = std::round(det);
    out.exact = true;
  } else {
    out.value = det;
    out.exact = false;
  }
  return out;
}

bool is_spanning_tree(const Graph& graph, std::span<const std::size_t> edges) {
  const auto n = graph.vertex_count();
  if (n == 0 || edges.size() + 1 != n) return false;
  DisjointSets sets(n);
  for (auto e : edges) {
    if (e >= graph.edge_count()) return false;
    if (!sets.unite(graph.edge(e).source, graph.edge(e).target)) return false;
  }
  return true;
}

std::vector<std::vector<std::size_t>> enumerate_spanning_trees(const Graph& graph,
                                                               std::size_t cap) {
  const auto n = graph.vertex_count();
  const auto m = graph.edge_count();
  if (m > kMaxEnumerationEdges) {
    throw InputError("spanning-tree enumeration supports at most " +
                     std::to_string(kMaxEnumerationEdges) + " edges");
  }
  std::vector<std::vector<std::size_t>> trees;
  if (n == 0 || !graph.connected()) return trees;
  const std::size_t k = n - 1;
  if (k == 0) {
    trees.emplace_back();
    return trees;
  }

  std::vector<std::size_t> pick(k);
  std::iota(pick.begin(), pick.end(), std::size_t{0});
  while (true) {
    if (is_spanning_tree(graph, pick)) {
      if (trees.size() == cap) {
        throw InputError("spanning-tree count exceeds cap of " + std::to_string(cap));
      }
      trees.push_back(pick);
    }
    // next k-combination of {0..m-1} in lexicographic order
    std::size_t i = k;
    while (i > 0 && pick[i - 1] == m - k + (i - 1)) --i;
    if (i == 0) break;
    ++pick[i - 1];
    for (std::size_t j = i; j < k; ++j) pick[j] = pick[j - 1] + 1;
  }
  return trees;
}

double weighted_tree_sum(const Graph& graph, std::span<const double> weights,
                         std::size_t reference) {
  if (weights.size() != graph.edge_count()) {
    throw InputError("weight count does not match edge count");
  }
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw InputError("edge weights must be finite and positive");
    }
  }
  if (!graph.connected()) return 0.0;
  if (graph.vertex_count() == 1) return 1.0;
  const auto inc = build_incidence(graph, reference);
  const Eigen::Map<const Vector> w(weights.data(), static_cast<Eigen::Index>(weights.size()));
  const Matrix lw = inc.reduced_incidence * w.asDiagonal() * inc.reduced_incidence.transpose();
  return linalg::SpdFactor(lw, "weighted reduced Laplacian").determinant();
}

double weighted_tree_sum(const Graph& graph, std::span<const double> weights) {
  return weighted_tree_sum(graph, weights, 0);
}

CycleBasis cycle_basis(const Graph& graph, std::size_t root) {
  const auto n = graph.vertex_count();
  const auto m = graph.edge_count();
  if (!graph.connected()) throw InputError("cycle basis requires a connected graph");
  if (root >= n) throw InputError("root vertex out of range");

  constexpr auto kNone = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> parent(n, kNone), parent_edge(n, kNone), depth(n, 0);
  std::vector<bool> seen(n, false), tree_edge(m, false);
  std::queue<std::size_t> queue;
  seen[root] = true;
  queue.push(root);
  while (!queue.empty()) {
    const auto v = queue.front();
    queue.pop();
    for (const auto& inc : graph.incidences(v)) {
      if (seen[inc.neighbor]) continue;
      seen[inc.neighbor] = true;
      parent[inc.neighbor] = v;
      parent_edge[inc.neighbor] = inc.edge;
      depth[inc.neighbor] = depth[v] + 1;
      tree_edge[inc.edge] = true;
      queue.push(inc.neighbor);
    }
  }

  CycleBasis out;
  for (std::size_t e = 0; e < m; ++e) {
    if (tree_edge[e]) continue;
    std::vector<int> z(m, 0);
    z[e] = 1;
    // Close the cycle with the tree path from t(e) back to s(e).
    auto up = graph.edge(e).target;
    auto down = graph.edge(e).source;
    std::vector<std::size_t> descent;
    while (depth[up] > depth[down]) {
      const auto f = parent_edge[up];
      z[f] += graph.edge(f).target == parent[up] ? 1 : -1;
      up = parent[up];
    }
    while (depth[down] > depth[up]) {
      descent.push_back(down);
      down = parent[down];
    }
    while (up != down) {
      const auto f = parent_edge[up];
      z[f] += graph.edge(f).target == parent[up] ? 1 : -1;
      up = parent[up];
      descent.push_back(down);
      down = parent[down];
    }
    for (auto a : descent) {
      const auto f = parent_edge[a];
      z[f] += graph.edge(f).target == a ? 1 : -1;
    }
    out.basis.push_back(std::move(z));
  }
  return out;
}

Matrix cocycle_projector(const IncidenceSet& incidence) {
  if (!incidence.connected) throw InputError("cocycle projector requires a connected graph");
  const auto& dw = incidence.reduced_incidence;
  const linalg::SpdFactor factor(incidence.reduced_laplacian(), "reduced Laplacian");
  return dw.transpose() * factor.solve(Matrix(dw));
}

}  // namespace netsync
