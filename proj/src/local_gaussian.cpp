#include "netsync/local_gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "netsync/error.hpp"

namespace netsync::local {

JacobiState initial_jacobi_state(const Graph& graph, std::size_t dimension) {
  JacobiState state;
  state.x = RowMatrix::Zero(static_cast<Eigen::Index>(graph.vertex_count()),
                            static_cast<Eigen::Index>(dimension));
  return state;
}

void jacobi_vertex_update(std::span<const LinearNeighbor> neighbors, std::span<const double> own,
                          double damping, std::span<double> out) {
  if (neighbors.empty()) throw InputError("Jacobi update at an isolated vertex");
  const double inv = 1.0 / static_cast<double>(neighbors.size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    double sum = 0.0;
    for (const auto& nb : neighbors) sum += nb.value[j] + nb.sign * nb.measurement[j];
    out[j] = (1.0 - damping) * own[j] + damping * sum * inv;
  }
}

JacobiState jacobi_step(const Graph& graph, const Matrix& r, const JacobiState& state,
                        double damping, AccessObserver* observer) {
  const auto n = graph.vertex_count();
  const auto d = static_cast<std::size_t>(state.x.cols());
  if (static_cast<std::size_t>(r.rows()) != graph.edge_count() ||
      static_cast<std::size_t>(r.cols()) != d) {
    throw InputError("measurement matrix must be m x d");
  }
  if (!(damping > 0.0 && damping <= 1.0)) throw InputError("damping must lie in (0, 1]");

  // Row-major copy so each edge's measurement is a contiguous span.
  const RowMatrix rr = r;
  JacobiState next;
  next.x.resize(state.x.rows(), state.x.cols());
  next.iteration = state.iteration + 1;

  std::vector<LinearNeighbor> inbox;
  for (std::size_t v = 0; v < n; ++v) {
    inbox.clear();
    for (const auto& inc : graph.incidences(v)) {
      if (observer) observer->on_read(v, inc.neighbor);
      inbox.push_back({std::span<const double>(state.x.row(static_cast<Eigen::Index>(inc.neighbor)).data(), d),
                       std::span<const double>(rr.row(static_cast<Eigen::Index>(inc.edge)).data(), d),
                       inc.sign});
    }
    if (observer && damping < 1.0) observer->on_read(v, v);
    jacobi_vertex_update(inbox,
                         std::span<const double>(state.x.row(static_cast<Eigen::Index>(v)).data(), d),
                         damping,
                         std::span<double>(next.x.row(static_cast<Eigen::Index>(v)).data(), d));
  }

  double delta = 0.0;
  for (const auto& e : graph.edges()) {
    const auto s = static_cast<Eigen::Index>(e.source);
    const auto t = static_cast<Eigen::Index>(e.target);
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(d); ++j) {
      const double inc_t = next.x(t, j) - state.x(t, j);
      const double inc_s = next.x(s, j) - state.x(s, j);
      delta = std::max(delta, std::abs(inc_t - inc_s));
    }
  }
  next.last_delta = delta;
  return next;
}

JacobiResult jacobi_run(const Graph& graph, const IncidenceSet& incidence, const Matrix& r,
                        const JacobiOptions& options) {
  if (!graph.connected()) throw InputError("Jacobi estimation requires a connected graph");
  if (!(options.tol > 0.0)) throw InputError("tolerance must be positive");
  const auto n = graph.vertex_count();
  const std::size_t max_iter = options.max_iter > 0 ? options.max_iter : 10 * n * n;

  JacobiResult out;
  out.damping = options.damping.value_or(graph.bipartite() ? 0.5 : 1.0);

  JacobiState state = initial_jacobi_state(graph, static_cast<std::size_t>(r.cols()));
  while (state.iteration < max_iter) {
    state = jacobi_step(graph, r, state, out.damping);
    if (state.last_delta < options.tol) {
      out.converged = true;
      break;
    }
  }
  out.iterations = state.iteration;
  out.final_delta = state.last_delta;

  Matrix x = state.x;
  const Eigen::RowVectorXd ref = x.row(static_cast<Eigen::Index>(incidence.reference));
  x.rowwise() -= ref;
  out.estimate.x = x;
  out.estimate.omega = incidence.incidence.transpose() * x;
  out.estimate.residual = r - out.estimate.omega;
  out.estimate.reference = incidence.reference;
  return out;
}

ConvergenceDiagnostics convergence_diagnostics(const Graph& graph) {
  const auto n = graph.vertex_count();
  Matrix s = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t v = 0; v < n; ++v) {
    if (graph.degree(v) == 0) throw InputError("graph has an isolated vertex");
  }
  for (const auto& e : graph.edges()) {
    const double w = 1.0 / std::sqrt(static_cast<double>(graph.degree(e.source) *
                                                         graph.degree(e.target)));
    s(static_cast<Eigen::Index>(e.source), static_cast<Eigen::Index>(e.target)) += w;
    s(static_cast<Eigen::Index>(e.target), static_cast<Eigen::Index>(e.source)) += w;
  }
  // N^{-1/2} A N^{-1/2} is similar to N^{-1} A.
  Eigen::SelfAdjointEigenSolver<Matrix> eig(s, Eigen::EigenvaluesOnly);
  const Vector& ev = eig.eigenvalues();  // ascending

  ConvergenceDiagnostics out;
  out.spectral_radius = ev.cwiseAbs().maxCoeff();
  out.min_eigenvalue = ev(0);
  double sub = 0.0;
  for (Eigen::Index i = 0; i + 1 < ev.size(); ++i) sub = std::max(sub, std::abs(ev(i)));
  out.subdominant_modulus = sub;
  out.bipartite_hazard = std::abs(ev(0) + 1.0) < 1e-9;
  return out;
}

}  // namespace netsync::local
