#pragma once

// Directed multigraphs and the incidence / Laplacian / spanning-tree algebra
// shared by every estimator.
//
// Index conventions: vertex i is the i-th declared vertex, edge j the j-th
// declared edge. The incidence matrix D is n x m with D(t(e), e) = +1 and
// D(s(e), e) = -1.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace netsync {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Edge {
  std::string id;
  std::size_t source;
  std::size_t target;
};

/// One end of an edge as seen from a vertex. `sign` is the incidence entry
/// D(vertex, edge): +1 when the vertex is the edge's target, -1 when it is
/// the source.
struct Incidence {
  std::size_t edge;
  std::size_t neighbor;
  int sign;
};

/// Immutable directed multigraph. Self-loops are rejected; parallel edges
/// are allowed.
class Graph {
 public:
  struct EdgeSpec {
    std::string id;
    std::string source;
    std::string target;
  };

  Graph() = default;
  Graph(std::vector<std::string> vertices, std::span<const EdgeSpec> edges);

  /// Vertices named v1..vn, edges e1..em in the given order.
  static Graph from_pairs(std::size_t vertex_count,
                          std::span<const std::pair<std::size_t, std::size_t>> edges);

  std::size_t vertex_count() const { return vertices_.size(); }
  std::size_t edge_count() const { return edges_.size(); }

  const std::string& vertex_id(std::size_t v) const { return vertices_.at(v); }
  const std::vector<std::string>& vertex_ids() const { return vertices_; }
  const Edge& edge(std::size_t e) const { return edges_.at(e); }
  const std::vector<Edge>& edges() const { return edges_; }

  /// Throws InputError for unknown ids.
  std::size_t vertex_index(const std::string& id) const;
  std::size_t edge_index(const std::string& id) const;

  std::span<const Incidence> incidences(std::size_t v) const { return incidence_.at(v); }
  std::size_t degree(std::size_t v) const { return incidence_.at(v).size(); }

  /// Copy of this graph with one more edge appended.
  Graph with_edge(std::size_t source, std::size_t target, std::string id = {}) const;

  std::size_t component_count() const;
  bool connected() const { return vertex_count() > 0 && component_count() == 1; }
  /// Two-colourable (every connected graph without odd cycles).
  bool bipartite() const;

  friend bool operator==(const Graph& a, const Graph& b);

 private:
  void index();

  std::vector<std::string> vertices_;
  std::vector<Edge> edges_;
  std::unordered_map<std::string, std::size_t> vertex_lookup_;
  std::unordered_map<std::string, std::size_t> edge_lookup_;
  std::vector<std::vector<Incidence>> incidence_;
};

bool operator==(const Edge& a, const Edge& b);

/// Incidence-derived matrices for a fixed reference vertex.
struct IncidenceSet {
  Matrix incidence;          // D, n x m
  Matrix reduced_incidence;  // D_W, (n-1) x m: D without the reference row
  Matrix adjacency;          // A, n x n (edge multiplicities, symmetric)
  Matrix degree;             // N, n x n diagonal
  Matrix laplacian;          // L = D D^T = N - A
  std::size_t reference = 0;
  bool connected = false;

  std::size_t vertex_count() const { return static_cast<std::size_t>(incidence.rows()); }
  std::size_t edge_count() const { return static_cast<std::size_t>(incidence.cols()); }

  /// L_W = D_W D_W^T.
  Matrix reduced_laplacian() const;
  /// D_W restricted to the given edge columns (D_WS).
  Matrix reduced_columns(std::span<const std::size_t> edges) const;
  /// Row of D_W belonging to vertex v (v != reference).
  std::size_t reduced_row(std::size_t v) const;
  /// Expand an (n-1)-row matrix to n rows with a zero reference row.
  Matrix expand(const Matrix& reduced) const;
  /// Drop the reference row.
  Matrix reduce(const Matrix& full) const;
};

IncidenceSet build_incidence(const Graph& graph, std::size_t reference = 0);
IncidenceSet build_incidence(const Graph& graph, const std::string& reference);

struct SpanningTreeCount {
  /// det of a Laplacian cofactor; rounded to the exact integer when < 2^53.
  double value = 0.0;
  /// Natural log of the count (-inf when disconnected).
  double log_value = 0.0;
  bool exact = true;
};

SpanningTreeCount spanning_tree_count(const Graph& graph);

/// Largest edge count accepted by enumerate_spanning_trees.
inline constexpr std::size_t kMaxEnumerationEdges = 24;

/// All spanning trees as sorted edge-index lists, in lexicographic order.
/// Throws InputError when m > kMaxEnumerationEdges or more than `cap` trees
/// exist.
std::vector<std::vector<std::size_t>> enumerate_spanning_trees(const Graph& graph,
                                                               std::size_t cap = 1'000'000);

/// True when the edges form a spanning tree of the graph.
bool is_spanning_tree(const Graph& graph, std::span<const std::size_t> edges);

/// Sum over spanning trees of the product of edge weights, computed as
/// det(D_W diag(w) D_W^T). Zero for disconnected graphs.
double weighted_tree_sum(const Graph& graph, std::span<const double> weights);
/// Same sum through an explicit cofactor: the reference row deleted is
/// `reference`. Lets callers cross-check the cofactor independence.
double weighted_tree_sum(const Graph& graph, std::span<const double> weights,
                         std::size_t reference);

struct CycleBasis {
  std::vector<std::vector<int>> basis;  // each of length m, entries in {-1,0,1}
  std::size_t dimension() const { return basis.size(); }
};

/// Fundamental cycles of a breadth-first spanning tree rooted at `root`.
/// Throws InputError for disconnected graphs.
CycleBasis cycle_basis(const Graph& graph, std::size_t root = 0);

/// Orthogonal projector onto the cocycle space: D_W^T L_W^{-1} D_W.
Matrix cocycle_projector(const IncidenceSet& incidence);

}  // namespace netsync
