#include "netsync/abelian.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "netsync/error.hpp"
#include "netsync/linalg.hpp"

namespace netsync::abelian {

namespace {

void require_same_shape(const GroupElement& a, const GroupElement& b) {
  if (a.linear.size() != b.linear.size() || a.circular.size() != b.circular.size()) {
    throw InputError("group elements have different dimensions");
  }
}

void require_shape(const ProductData& data, std::size_t rows, std::size_t d, std::size_t q,
                   const char* what) {
  if (data.linear.rows() != static_cast<Eigen::Index>(rows) ||
      data.circular.rows() != static_cast<Eigen::Index>(rows) ||
      data.linear_dimension() != d || data.circular_dimension() != q) {
    throw InputError(std::string(what) + " does not match the problem dimensions");
  }
}

}  // namespace

GroupElement GroupElement::identity(std::size_t d, std::size_t q) {
  return {Vector::Zero(static_cast<Eigen::Index>(d)),
          ComplexVector::Ones(static_cast<Eigen::Index>(q))};
}

void GroupElement::validate() const {
  for (const auto& z : circular) {
    if (!(std::abs(std::abs(z) - 1.0) <= 1e-9)) {
      throw InputError("circular coordinates must have unit modulus");
    }
  }
  for (double v : linear) {
    if (!std::isfinite(v)) throw InputError("linear coordinates must be finite");
  }
}

GroupElement compose(const GroupElement& a, const GroupElement& b) {
  require_same_shape(a, b);
  return {a.linear + b.linear, a.circular.cwiseProduct(b.circular)};
}

GroupElement inverse(const GroupElement& a) { return {-a.linear, a.circular.conjugate()}; }

GroupElement difference(const GroupElement& a, const GroupElement& b) {
  return compose(a, inverse(b));
}

double distance(const GroupElement& a, const GroupElement& b) {
  require_same_shape(a, b);
  double out = 0.0;
  if (a.linear.size() > 0) out = (a.linear - b.linear).cwiseAbs().maxCoeff();
  if (a.circular.size() > 0) out = std::max(out, (a.circular - b.circular).cwiseAbs().maxCoeff());
  return out;
}

// ---------------------------------------------------------------------------

std::size_t ProductData::rows() const {
  return static_cast<std::size_t>(std::max(linear.rows(), circular.rows()));
}

GroupElement ProductData::row(std::size_t i) const {
  const auto r = static_cast<Eigen::Index>(i);
  return {linear.row(r).transpose(), circular.row(r).transpose()};
}

void ProductData::set_row(std::size_t i, const GroupElement& g) {
  const auto r = static_cast<Eigen::Index>(i);
  linear.row(r) = g.linear.transpose();
  circular.row(r) = g.circular.transpose();
}

ProductData ProductData::zeros(std::size_t rows, std::size_t d, std::size_t q) {
  const auto n = static_cast<Eigen::Index>(rows);
  return {Matrix::Zero(n, static_cast<Eigen::Index>(d)),
          ComplexMatrix::Ones(n, static_cast<Eigen::Index>(q))};
}

ProductData edge_differences(const Graph& graph, const ProductData& x) {
  require_shape(x, graph.vertex_count(), x.linear_dimension(), x.circular_dimension(),
                "vertex labels");
  auto out = ProductData::zeros(graph.edge_count(), x.linear_dimension(), x.circular_dimension());
  for (std::size_t e = 0; e < graph.edge_count(); ++e) {
    const auto& edge = graph.edge(e);
    out.set_row(e, difference(x.row(edge.target), x.row(edge.source)));
  }
  return out;
}

// ---------------------------------------------------------------------------

ProductNoiseModel ProductNoiseModel::uniform(std::size_t edges, std::size_t d, std::size_t q,
                                             double variance, double kappa) {
  const auto m = static_cast<Eigen::Index>(edges);
  ProductNoiseModel model{Matrix::Constant(m, static_cast<Eigen::Index>(d), variance),
                          Matrix::Constant(m, static_cast<Eigen::Index>(q), kappa)};
  model.validate(edges);
  return model;
}

void ProductNoiseModel::validate(std::size_t edges) const {
  const auto m = static_cast<Eigen::Index>(edges);
  if (variances.rows() != m || kappa.rows() != m) {
    throw InputError("product noise model needs one row per edge");
  }
  if (variances.cols() + kappa.cols() == 0) throw InputError("product space has no coordinates");
  for (double v : variances.reshaped()) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InputError("variances must be finite and positive");
  }
  for (double k : kappa.reshaped()) {
    if (!(k > 0.0) || !std::isfinite(k)) {
      throw InputError("concentrations must be finite and positive");
    }
  }
}

gaussian::NoiseModel ProductNoiseModel::linear_noise(std::size_t coordinate) const {
  const Vector col = variances.col(static_cast<Eigen::Index>(coordinate));
  if (col.size() > 0 && (col.array() == col(0)).all()) return gaussian::IidScalar{col(0)};
  return gaussian::DiagonalScalar{col};
}

circle::VonMisesModel ProductNoiseModel::circular_noise(std::size_t coordinate) const {
  return {kappa.col(static_cast<Eigen::Index>(coordinate))};
}

Matrix edge_fisher_block(const ProductNoiseModel& model, std::size_t edge) {
  const auto d = static_cast<Eigen::Index>(model.linear_dimension());
  const auto q = static_cast<Eigen::Index>(model.circular_dimension());
  const auto e = static_cast<Eigen::Index>(edge);
  Matrix block = Matrix::Zero(d + q, d + q);
  for (Eigen::Index j = 0; j < d; ++j) block(j, j) = 1.0 / model.variances(e, j);
  for (Eigen::Index j = 0; j < q; ++j) {
    block(d + j, d + j) = circle::edge_information(model.kappa(e, j));
  }
  return block;
}

// ---------------------------------------------------------------------------

ProductEstimate ml_estimate_product(const Graph& graph, const ProductData& r,
                                    const ProductNoiseModel& model, std::size_t reference,
                                    const circle::HybridOptions& options) {
  if (!graph.connected()) throw InputError("estimation requires a connected graph");
  const auto m = graph.edge_count();
  const auto n = graph.vertex_count();
  model.validate(m);
  const auto d = model.linear_dimension();
  const auto q = model.circular_dimension();
  require_shape(r, m, d, q, "edge data");
  const auto inc = build_incidence(graph, reference);

  ProductEstimate out;
  out.reference = reference;
  out.x = ProductData::zeros(n, d, q);
  out.linear_residual = Matrix::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d));
  out.linear_current_defect = Vector::Zero(static_cast<Eigen::Index>(d));
  out.circular_critical_defect = Vector::Zero(static_cast<Eigen::Index>(q));

  for (std::size_t j = 0; j < d; ++j) {
    const auto c = static_cast<Eigen::Index>(j);
    const auto noise = model.linear_noise(j);
    const Matrix rj = r.linear.col(c);
    const auto est = gaussian::ml_estimate(inc, rj, noise);
    out.x.linear.col(c) = est.x.col(0);
    out.linear_residual.col(c) = est.residual.col(0);
    out.linear_current_defect(c) = gaussian::current_law_defect(inc, est.residual, noise);
  }
  for (std::size_t j = 0; j < q; ++j) {
    const auto c = static_cast<Eigen::Index>(j);
    const ComplexVector rj = r.circular.col(c);
    const auto res = circle::ml_estimate(graph, rj, model.circular_noise(j), options);
    out.x.circular.col(c) = res.phases.aligned_to(reference).values();
    out.circular_critical_defect(c) = res.report.max_defect;
    out.circular_iterations.push_back(res.iterations);
    out.converged = out.converged && res.converged;
  }
  out.omega = edge_differences(graph, out.x);
  return out;
}

std::vector<double> coordinate_log_likelihoods(const Graph& graph, const ProductData& r,
                                               const ProductData& x,
                                               const ProductNoiseModel& model) {
  const auto m = graph.edge_count();
  model.validate(m);
  const auto d = model.linear_dimension();
  const auto q = model.circular_dimension();
  require_shape(r, m, d, q, "edge data");
  require_shape(x, graph.vertex_count(), d, q, "vertex labels");
  const ProductData omega = edge_differences(graph, x);

  std::vector<double> out;
  for (std::size_t j = 0; j < d; ++j) {
    const auto c = static_cast<Eigen::Index>(j);
    double sum = 0.0;
    for (Eigen::Index e = 0; e < static_cast<Eigen::Index>(m); ++e) {
      const double v = model.variances(e, c);
      const double res = r.linear(e, c) - omega.linear(e, c);
      sum -= 0.5 * (res * res / v + std::log(2.0 * std::numbers::pi * v));
    }
    out.push_back(sum);
  }
  for (std::size_t j = 0; j < q; ++j) {
    const auto c = static_cast<Eigen::Index>(j);
    out.push_back(circle::log_likelihood(graph, r.circular.col(c),
                                         circle::PhaseAssignment(x.circular.col(c)),
                                         model.circular_noise(j)));
  }
  return out;
}

double log_likelihood(const Graph& graph, const ProductData& r, const ProductData& x,
                      const ProductNoiseModel& model) {
  const auto m = graph.edge_count();
  model.validate(m);
  const auto d = static_cast<Eigen::Index>(model.linear_dimension());
  const auto q = static_cast<Eigen::Index>(model.circular_dimension());
  require_shape(r, m, model.linear_dimension(), model.circular_dimension(), "edge data");
  require_shape(x, graph.vertex_count(), model.linear_dimension(), model.circular_dimension(),
                "vertex labels");
  double sum = 0.0;
  for (std::size_t e = 0; e < m; ++e) {
    const auto ei = static_cast<Eigen::Index>(e);
    const auto& edge = graph.edge(e);
    // Residual element eps = r - omega, then the block density at eps.
    const GroupElement eps = difference(r.row(e), difference(x.row(edge.target), x.row(edge.source)));
    for (Eigen::Index j = 0; j < d; ++j) {
      const double v = model.variances(ei, j);
      sum -= 0.5 * (eps.linear(j) * eps.linear(j) / v + std::log(2.0 * std::numbers::pi * v));
    }
    for (Eigen::Index j = 0; j < q; ++j) {
      const double k = model.kappa(ei, j);
      sum += k * eps.circular(j).real() - std::log(2.0 * std::numbers::pi) -
             circle::log_bessel_i0(k);
    }
  }
  return sum;
}

// ---------------------------------------------------------------------------

FisherReport fisher_report_product(const Graph& graph, const ProductNoiseModel& model,
                                   std::size_t reference) {
  if (!graph.connected()) throw InputError("Fisher information requires a connected graph");
  const auto m = graph.edge_count();
  model.validate(m);
  const auto k = model.linear_dimension() + model.circular_dimension();
  const auto inc = build_incidence(graph, reference);
  const auto mi = static_cast<Eigen::Index>(m);
  const auto ki = static_cast<Eigen::Index>(k);
  const auto w = inc.reduced_incidence.rows();

  // Coordinate-major edge information: index c*m + e.
  Matrix info = Matrix::Zero(mi * ki, mi * ki);
  for (std::size_t e = 0; e < m; ++e) {
    const Matrix block = edge_fisher_block(model, e);
    for (Eigen::Index a = 0; a < ki; ++a) {
      for (Eigen::Index b = 0; b < ki; ++b) {
        info(a * mi + static_cast<Eigen::Index>(e), b * mi + static_cast<Eigen::Index>(e)) =
            block(a, b);
      }
    }
  }
  Matrix lift = Matrix::Zero(w * ki, mi * ki);
  for (Eigen::Index c = 0; c < ki; ++c) lift.block(c * w, c * mi, w, mi) = inc.reduced_incidence;

  FisherReport out;
  out.fisher = lift * info * lift.transpose();
  const linalg::SpdFactor factor(out.fisher, "Fisher information");
  out.det_direct = factor.determinant();
  out.estimator_covariance = factor.inverse();
  if (k <= kMultiTreeMaxCoordinates && m <= kMultiTreeMaxEdges) {
    out.det_tree_formula = gaussian::multi_tree_determinant(graph, inc, info, k, true);
  }
  return out;
}

double coordinate_tree_product(const Graph& graph, const ProductNoiseModel& model) {
  const auto m = graph.edge_count();
  model.validate(m);
  double product = 1.0;
  std::vector<double> w(m);
  for (std::size_t j = 0; j < model.linear_dimension(); ++j) {
    for (std::size_t e = 0; e < m; ++e) {
      w[e] = 1.0 / model.variances(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(j));
    }
    product *= weighted_tree_sum(graph, w);
  }
  for (std::size_t j = 0; j < model.circular_dimension(); ++j) {
    for (std::size_t e = 0; e < m; ++e) {
      w[e] = circle::edge_information(
          model.kappa(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(j)));
    }
    product *= weighted_tree_sum(graph, w);
  }
  return product;
}

}  // namespace netsync::abelian
