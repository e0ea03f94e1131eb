#include "netsync/gaussian.hpp"

#include <cmath>
#include <string>

#include "netsync/error.hpp"
#include "netsync/linalg.hpp"

namespace netsync::gaussian {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

/// I_k (x) D_W.
Matrix block_incidence(const IncidenceSet& inc, std::size_t k) {
  return kron(Matrix::Identity(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)),
              inc.reduced_incidence);
}

Vector flatten(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

Matrix unflatten(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

void require_connected(const IncidenceSet& inc) {
  if (!inc.connected) throw InputError("estimation requires a connected graph");
}

EstimateResult finish(const IncidenceSet& inc, const Matrix& reduced_x, const Matrix& r) {
  EstimateResult out;
  out.x = inc.expand(reduced_x);
  out.omega = inc.incidence.transpose() * out.x;
  out.residual = r - out.omega;
  out.reference = inc.reference;
  return out;
}

}  // namespace

std::size_t model_dimension(const NoiseModel& noise, std::size_t edges) {
  return std::visit(Overloaded{
                        [](const IidScalar&) -> std::size_t { return 1; },
                        [](const DiagonalScalar&) -> std::size_t { return 1; },
                        [](const FullScalar&) -> std::size_t { return 1; },
                        [](const IidVector& v) -> std::size_t {
                          return static_cast<std::size_t>(v.covariance.rows());
                        },
                        [edges](const FullVector& v) -> std::size_t {
                          if (edges == 0) return 0;
                          return static_cast<std::size_t>(v.covariance.rows()) / edges;
                        },
                    },
                    noise);
}

void validate(const NoiseModel& noise, std::size_t edges, std::size_t dimension) {
  const auto m = static_cast<Eigen::Index>(edges);
  const auto d = static_cast<Eigen::Index>(dimension);
  std::visit(Overloaded{
                 [&](const IidScalar& v) {
                   if (dimension != 1) throw InputError("scalar noise model used with d > 1");
                   if (!(v.variance > 0.0) || !std::isfinite(v.variance)) {
                     throw InputError("variance must be finite and positive");
                   }
                 },
                 [&](const DiagonalScalar& v) {
                   if (dimension != 1) throw InputError("scalar noise model used with d > 1");
                   if (v.variances.size() != m) {
                     throw InputError("diagonal noise needs one variance per edge");
                   }
                   for (double s : v.variances) {
                     if (!(s > 0.0) || !std::isfinite(s)) {
                       throw InputError("variances must be finite and positive");
                     }
                   }
                 },
                 [&](const FullScalar& v) {
                   if (dimension != 1) throw InputError("scalar noise model used with d > 1");
                   if (v.covariance.rows() != m || v.covariance.cols() != m) {
                     throw InputError("covariance must be m x m");
                   }
                   linalg::require_spd(v.covariance, "edge covariance");
                 },
                 [&](const IidVector& v) {
                   if (v.covariance.rows() != d || v.covariance.cols() != d) {
                     throw InputError("per-edge covariance must be d x d");
                   }
                   linalg::require_spd(v.covariance, "per-edge covariance");
                 },
                 [&](const FullVector& v) {
                   if (v.covariance.rows() != m * d || v.covariance.cols() != m * d) {
                     throw InputError("covariance must be md x md");
                   }
                   linalg::require_spd(v.covariance, "edge covariance");
                 },
             },
             noise);
}

Matrix edge_covariance(const NoiseModel& noise, std::size_t edges, std::size_t dimension) {
  const auto m = static_cast<Eigen::Index>(edges);
  validate(noise, edges, dimension);
  return std::visit(Overloaded{
                        [&](const IidScalar& v) -> Matrix {
                          return v.variance * Matrix::Identity(m, m);
                        },
                        [&](const DiagonalScalar& v) -> Matrix { return v.variances.asDiagonal(); },
                        [&](const FullScalar& v) -> Matrix { return v.covariance; },
                        [&](const IidVector& v) -> Matrix {
                          return kron(v.covariance, Matrix::Identity(m, m));
                        },
                        [&](const FullVector& v) -> Matrix { return v.covariance; },
                    },
                    noise);
}

// ---------------------------------------------------------------------------

EstimateResult ml_estimate_iid(const IncidenceSet& incidence, const Vector& r, double variance) {
  require_connected(incidence);
  if (!(variance > 0.0) || !std::isfinite(variance)) {
    throw InputError("variance must be finite and positive");
  }
  if (static_cast<std::size_t>(r.size()) != incidence.edge_count()) {
    throw InputError("measurement count does not match edge count");
  }
  const linalg::SpdFactor lw(incidence.reduced_laplacian(), "reduced Laplacian");
  const Vector x = lw.solve(Vector(incidence.reduced_incidence * r));
  return finish(incidence, x, r);
}

EstimateResult ml_estimate_correlated(const IncidenceSet& incidence, const Vector& r,
                                      const Matrix& covariance) {
  require_connected(incidence);
  if (static_cast<std::size_t>(r.size()) != incidence.edge_count()) {
    throw InputError("measurement count does not match edge count");
  }
  validate(FullScalar{covariance}, incidence.edge_count(), 1);
  const linalg::SpdFactor rf(covariance, "edge covariance");
  const Matrix& dw = incidence.reduced_incidence;
  const Matrix rinv_dwt = rf.solve(Matrix(dw.transpose()));
  const Vector rinv_r = rf.solve(r);
  const linalg::SpdFactor fisher(dw * rinv_dwt, "weighted reduced Laplacian");
  const Vector x = fisher.solve(Vector(dw * rinv_r));
  return finish(incidence, x, r);
}

EstimateResult ml_estimate_vector(const IncidenceSet& incidence, const Matrix& r,
                                  const NoiseModel& noise) {
  require_connected(incidence);
  const auto m = incidence.edge_count();
  const auto d = static_cast<std::size_t>(r.cols());
  if (static_cast<std::size_t>(r.rows()) != m) {
    throw InputError("measurement count does not match edge count");
  }
  validate(noise, m, d);

  if (std::holds_alternative<IidVector>(noise)) {
    // F = R^{-1} (x) L_W decouples: each coordinate is a scalar problem.
    const linalg::SpdFactor lw(incidence.reduced_laplacian(), "reduced Laplacian");
    const Matrix x = lw.solve(Matrix(incidence.reduced_incidence * r));
    return finish(incidence, x, r);
  }
  if (!std::holds_alternative<FullVector>(noise)) {
    throw InputError("vector estimation needs an IidVector or FullVector noise model");
  }
  const Matrix& cov = std::get<FullVector>(noise).covariance;
  const linalg::SpdFactor rf(cov, "edge covariance");
  const Matrix b = block_incidence(incidence, d);
  const Matrix rinv_bt = rf.solve(Matrix(b.transpose()));
  const Vector rinv_r = rf.solve(flatten(r));
  const linalg::SpdFactor fisher(b * rinv_bt, "vector Fisher information");
  const Vector x = fisher.solve(Vector(b * rinv_r));
  return finish(incidence, unflatten(x, static_cast<Eigen::Index>(incidence.vertex_count() - 1),
                                     static_cast<Eigen::Index>(d)),
                r);
}

EstimateResult ml_estimate(const IncidenceSet& incidence, const Matrix& r,
                           const NoiseModel& noise) {
  return std::visit(
      Overloaded{
          [&](const IidScalar& v) {
            if (r.cols() != 1) throw InputError("scalar noise model used with d > 1");
            return ml_estimate_iid(incidence, r.col(0), v.variance);
          },
          [&](const DiagonalScalar& v) {
            if (r.cols() != 1) throw InputError("scalar noise model used with d > 1");
            validate(v, incidence.edge_count(), 1);
            return ml_estimate_correlated(incidence, r.col(0), v.variances.asDiagonal());
          },
          [&](const FullScalar& v) {
            if (r.cols() != 1) throw InputError("scalar noise model used with d > 1");
            return ml_estimate_correlated(incidence, r.col(0), v.covariance);
          },
          [&](const IidVector&) { return ml_estimate_vector(incidence, r, noise); },
          [&](const FullVector&) { return ml_estimate_vector(incidence, r, noise); },
      },
      noise);
}

EstimateResult to_mean_zero(EstimateResult estimate) {
  const Eigen::RowVectorXd mean = estimate.x.colwise().mean();
  estimate.x.rowwise() -= mean;
  estimate.gauge = Gauge::mean_zero;
  return estimate;
}

Vector mean_zero_gauge(const IncidenceSet& incidence, const Vector& r, double mu) {
  require_connected(incidence);
  if (!(mu > 0.0) || !std::isfinite(mu)) throw InputError("mu must be positive");
  if (static_cast<std::size_t>(r.size()) != incidence.edge_count()) {
    throw InputError("measurement count does not match edge count");
  }
  const auto n = static_cast<Eigen::Index>(incidence.vertex_count());
  const Matrix shifted =
      incidence.laplacian + (mu / static_cast<double>(n)) * Matrix::Ones(n, n);
  return linalg::SpdFactor(shifted, "shifted Laplacian")
      .solve(Vector(incidence.incidence * r));
}

double current_law_defect(const IncidenceSet& incidence, const Matrix& residual,
                          const NoiseModel& noise) {
  const auto m = static_cast<Eigen::Index>(incidence.edge_count());
  if (residual.rows() != m) throw InputError("residual size does not match edge count");
  if (std::holds_alternative<IidScalar>(noise)) {
    return (incidence.incidence * residual).cwiseAbs().maxCoeff();
  }
  const Matrix cov = edge_covariance(noise, incidence.edge_count(),
                                     static_cast<std::size_t>(residual.cols()));
  const Vector weighted = linalg::SpdFactor(cov, "edge covariance").solve(flatten(residual));
  const Matrix w = unflatten(weighted, m, residual.cols());
  return (incidence.incidence * w).cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------

double independent_tree_sum(const Graph& graph, std::span<const double> weights,
                            std::size_t avoid_reference) {
  if (graph.edge_count() <= kTreeEnumerationMaxEdges) {
    for (double w : weights) {
      if (!(w > 0.0) || !std::isfinite(w)) {
        throw InputError("edge weights must be finite and positive");
      }
    }
    double sum = 0.0;
    for (const auto& tree : enumerate_spanning_trees(graph)) {
      double product = 1.0;
      for (auto e : tree) product *= weights[e];
      sum += product;
    }
    return sum;
  }
  const auto n = graph.vertex_count();
  return weighted_tree_sum(graph, weights, (avoid_reference + 1) % n);
}

std::optional<double> multi_tree_determinant(const Graph& graph, const IncidenceSet& incidence,
                                             const Matrix& information, std::size_t coordinates,
                                             bool diagonal_pairs_only, std::size_t max_terms) {
  const auto m = incidence.edge_count();
  const auto k = coordinates;
  if (static_cast<std::size_t>(information.rows()) != m * k ||
      static_cast<std::size_t>(information.cols()) != m * k) {
    throw InputError("information matrix must be mk x mk");
  }
  if (m > kMaxEnumerationEdges) return std::nullopt;
  const auto trees = enumerate_spanning_trees(graph);
  if (trees.empty()) return 0.0;

  // Count terms without overflow.
  double multi_count = 1.0;
  for (std::size_t j = 0; j < k; ++j) multi_count *= static_cast<double>(trees.size());
  const double terms = diagonal_pairs_only ? multi_count : multi_count * multi_count;
  if (terms > static_cast<double>(max_terms)) return std::nullopt;

  std::vector<int> tree_sign(trees.size());
  for (std::size_t i = 0; i < trees.size(); ++i) {
    tree_sign[i] = static_cast<int>(std::lround(
        linalg::determinant(incidence.reduced_columns(trees[i]))));
  }

  struct MultiTree {
    std::vector<std::size_t> columns;
    int sign;
  };
  std::vector<MultiTree> multi;
  std::vector<std::size_t> odometer(k, 0);
  while (true) {
    MultiTree mt{{}, 1};
    for (std::size_t j = 0; j < k; ++j) {
      for (auto e : trees[odometer[j]]) mt.columns.push_back(j * m + e);
      mt.sign *= tree_sign[odometer[j]];
    }
    multi.push_back(std::move(mt));
    std::size_t j = 0;
    while (j < k && ++odometer[j] == trees.size()) odometer[j++] = 0;
    if (j == k) break;
  }

  double sum = 0.0;
  for (const auto& a : multi) {
    if (diagonal_pairs_only) {
      sum += linalg::determinant(linalg::select(information, a.columns, a.columns));
      continue;
    }
    for (const auto& b : multi) {
      sum += a.sign * b.sign *
             linalg::determinant(linalg::select(information, a.columns, b.columns));
    }
  }
  return sum;
}

FisherReport fisher_report(const Graph& graph, const IncidenceSet& incidence,
                           const NoiseModel& noise) {
  require_connected(incidence);
  const auto n = incidence.vertex_count();
  const auto m = incidence.edge_count();
  const Matrix& dw = incidence.reduced_incidence;
  const std::size_t d = model_dimension(noise, m);
  validate(noise, m, d);

  FisherReport out;
  const std::vector<double> ones(m, 1.0);
  std::visit(
      Overloaded{
          [&](const IidScalar& v) {
            out.fisher = incidence.reduced_laplacian() / v.variance;
            out.det_tree_formula = std::pow(v.variance, -static_cast<double>(n - 1)) *
                                   independent_tree_sum(graph, ones, incidence.reference);
          },
          [&](const DiagonalScalar& v) {
            const Vector w = v.variances.cwiseInverse();
            out.fisher = dw * w.asDiagonal() * dw.transpose();
            out.det_tree_formula = independent_tree_sum(
                graph, std::span<const double>(w.data(), m), incidence.reference);
          },
          [&](const FullScalar& v) {
            const Matrix rinv = linalg::SpdFactor(v.covariance, "edge covariance").inverse();
            out.fisher = dw * rinv * dw.transpose();
            if (m <= kCauchyBinetMaxEdges) {
              out.det_tree_formula = multi_tree_determinant(graph, incidence, rinv, 1, false);
            }
          },
          [&](const IidVector& v) {
            const Matrix rinv = linalg::SpdFactor(v.covariance, "per-edge covariance").inverse();
            out.fisher = kron(rinv, incidence.reduced_laplacian());
            const double trees = independent_tree_sum(graph, ones, incidence.reference);
            out.det_tree_formula = std::pow(trees, static_cast<double>(d)) /
                                   std::pow(linalg::determinant(v.covariance),
                                            static_cast<double>(n - 1));
          },
          [&](const FullVector& v) {
            const Matrix rinv = linalg::SpdFactor(v.covariance, "edge covariance").inverse();
            const Matrix b = block_incidence(incidence, d);
            out.fisher = b * rinv * b.transpose();
            if (m <= kCauchyBinetMaxEdges) {
              out.det_tree_formula = multi_tree_determinant(graph, incidence, rinv, d, false);
            }
          },
      },
      noise);
  out.fisher = 0.5 * (out.fisher + out.fisher.transpose());
  const linalg::SpdFactor factor(out.fisher, "Fisher information");
  out.det_direct = factor.determinant();
  out.estimator_covariance = factor.inverse();
  return out;
}

int alpha_sign(const Graph& graph, const IncidenceSet& incidence,
               std::span<const std::size_t> tree, std::span<const std::size_t> other) {
  if (!is_spanning_tree(graph, tree) || !is_spanning_tree(graph, other)) {
    throw InputError("alpha_sign needs two spanning trees");
  }
  const Matrix a = incidence.reduced_columns(tree);
  const Matrix b = incidence.reduced_columns(other);
  return static_cast<int>(std::lround(linalg::determinant(a * b.transpose())));
}

Vector tree_coordinates(const IncidenceSet& incidence, std::span<const std::size_t> tree,
                        const Vector& reduced_offsets) {
  return incidence.reduced_columns(tree).transpose() * reduced_offsets;
}

Vector offsets_from_tree(const IncidenceSet& incidence, std::span<const std::size_t> tree,
                         const Vector& nu) {
  const Matrix dws = incidence.reduced_columns(tree);
  if (dws.rows() != dws.cols() || std::abs(linalg::determinant(dws)) < 0.5) {
    throw InputError("edge set is not a spanning tree");
  }
  return dws.transpose().partialPivLu().solve(nu);
}

}  // namespace netsync::gaussian
