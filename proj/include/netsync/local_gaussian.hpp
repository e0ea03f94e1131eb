#pragma once

// Nearest-neighbour Jacobi realization of the Gaussian ML estimator:
// each vertex repeatedly becomes the mean of what its neighbours predict its
// value to be, x_k <- (1/n_k) sum_{l ~ k} (x_l + r_(l,k)).

#include <cstddef>
#include <limits>
#include <optional>
#include <span>

#include "netsync/gaussian.hpp"
#include "netsync/graph.hpp"

namespace netsync::local {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Receives every vertex-value read made while computing a vertex update.
class AccessObserver {
 public:
  virtual ~AccessObserver() = default;
  virtual void on_read(std::size_t updating_vertex, std::size_t read_vertex) = 0;
};

struct JacobiState {
  RowMatrix x;  // n x d
  std::size_t iteration = 0;
  /// Edge-space max-norm of the latest update, ||D^T (x' - x)||_inf.
  double last_delta = std::numeric_limits<double>::infinity();
};

JacobiState initial_jacobi_state(const Graph& graph, std::size_t dimension);

/// A neighbour's current value seen across one incident edge. `sign` is the
/// incidence entry D(receiver, edge).
struct LinearNeighbor {
  std::span<const double> value;
  std::span<const double> measurement;
  int sign;
};

/// One vertex update: out = (1 - damping) own + damping * mean(value + sign * r).
void jacobi_vertex_update(std::span<const LinearNeighbor> neighbors, std::span<const double> own,
                          double damping, std::span<double> out);

/// One synchronous step over all vertices. `r` is m x d. Throws InputError on
/// an isolated vertex.
JacobiState jacobi_step(const Graph& graph, const Matrix& r, const JacobiState& state,
                        double damping = 1.0, AccessObserver* observer = nullptr);

struct JacobiOptions {
  double tol = 1e-9;
  /// 0 selects 10 n^2.
  std::size_t max_iter = 0;
  /// Unset: 1 (pure Jacobi), or 0.5 when the graph is bipartite and the
  /// undamped iteration would oscillate.
  std::optional<double> damping;
};

struct JacobiResult {
  gaussian::EstimateResult estimate;  // reference gauge
  std::size_t iterations = 0;
  bool converged = false;
  double final_delta = 0.0;
  double damping = 1.0;
};

/// Iterates from x = 0 until the edge-space increment drops below tol.
/// Non-convergence is reported through `converged`, not thrown.
JacobiResult jacobi_run(const Graph& graph, const IncidenceSet& incidence, const Matrix& r,
                        const JacobiOptions& options = {});

struct ConvergenceDiagnostics {
  double spectral_radius = 0.0;      // rho(N^{-1} A)
  double min_eigenvalue = 0.0;       // lambda_min(N^{-1} A)
  double subdominant_modulus = 0.0;  // largest |lambda| after the unit eigenvalue
  bool bipartite_hazard = false;     // lambda_min = -1 (to 1e-9)
};

ConvergenceDiagnostics convergence_diagnostics(const Graph& graph);

}  // namespace netsync::local
