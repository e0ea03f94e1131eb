#include "netsync/circle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "netsync/error.hpp"
#include "netsync/gaussian.hpp"
#include "netsync/linalg.hpp"

namespace netsync::circle {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kUnitTolerance = 1e-9;

void require_unit(const ComplexVector& v, const char* what) {
  for (const auto& z : v) {
    if (!(std::abs(std::abs(z) - 1.0) <= kUnitTolerance)) {
      throw InputError(std::string(what) + " must have unit modulus");
    }
  }
}

void require_edges(const Graph& graph, const ComplexVector& r) {
  if (static_cast<std::size_t>(r.size()) != graph.edge_count()) {
    throw InputError("measurement count does not match edge count");
  }
  require_unit(r, "edge measurements");
}

Complex edge_rotation(Complex r, int sign) { return sign > 0 ? r : std::conj(r); }

// Series for I1/I0, accurate for moderate kappa.
double ratio_series(double kappa) {
  const double q = 0.25 * kappa * kappa;
  double term = 1.0;
  double i0 = 1.0;
  double i1 = 1.0;  // sum of term / (k + 1)
  for (int k = 1; k < 500; ++k) {
    term *= q / (static_cast<double>(k) * k);
    i0 += term;
    i1 += term / (k + 1);
    if (term < 1e-18 * i0) break;
  }
  return 0.5 * kappa * i1 / i0;
}

// Continued fraction I1/I0 = 1 / (2/k + 1 / (4/k + 1 / (6/k + ...))), modified Lentz.
double ratio_continued_fraction(double kappa) {
  constexpr double tiny = 1e-300;
  double f = 2.0 / kappa;
  double c = f;
  double d = 0.0;
  for (int j = 2; j < 200000; ++j) {
    const double b = 2.0 * j / kappa;
    d = b + d;
    if (std::abs(d) < tiny) d = tiny;
    c = b + 1.0 / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = c * d;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-17) break;
  }
  return 1.0 / f;
}

// Large-argument expansion of I1/I0.
double ratio_asymptotic(double kappa) {
  const double u = 1.0 / kappa;
  return 1.0 - u * (0.5 + u * (0.125 + u * (0.125 + u * (25.0 / 128.0 + u * (13.0 / 32.0)))));
}

}  // namespace

// ---------------------------------------------------------------------------

PhaseAssignment::PhaseAssignment(ComplexVector values) : values_(std::move(values)) {
  require_unit(values_, "phases");
  for (auto& z : values_) z /= std::abs(z);
}

PhaseAssignment PhaseAssignment::from_radians(std::span<const double> angles) {
  ComplexVector v(static_cast<Eigen::Index>(angles.size()));
  for (std::size_t i = 0; i < angles.size(); ++i) {
    if (!std::isfinite(angles[i])) throw InputError("phase angles must be finite");
    v(static_cast<Eigen::Index>(i)) = std::polar(1.0, angles[i]);
  }
  return PhaseAssignment(std::move(v));
}

std::vector<double> PhaseAssignment::radians() const {
  std::vector<double> out;
  out.reserve(size());
  for (const auto& z : values_) out.push_back(wrap_angle(std::arg(z)));
  return out;
}

PhaseAssignment PhaseAssignment::rotated(Complex unit) const {
  return PhaseAssignment(ComplexVector(values_ * unit));
}

PhaseAssignment PhaseAssignment::aligned_to(std::size_t vertex) const {
  return rotated(std::conj((*this)[vertex]));
}

double wrap_angle(double radians) {
  double w = std::fmod(radians, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  if (w >= kTwoPi) w = 0.0;
  return w;
}

VonMisesModel VonMisesModel::uniform(std::size_t edges, double kappa) {
  VonMisesModel model{Vector::Constant(static_cast<Eigen::Index>(edges), kappa)};
  model.validate(edges);
  return model;
}

void VonMisesModel::validate(std::size_t edges) const {
  if (static_cast<std::size_t>(kappa.size()) != edges) {
    throw InputError("von Mises model needs one concentration per edge");
  }
  for (double k : kappa) {
    if (!(k > 0.0) || !std::isfinite(k)) {
      throw InputError("concentrations must be finite and positive");
    }
  }
}

// ---------------------------------------------------------------------------

double bessel_ratio(double kappa) {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) {
    throw InputError("bessel_ratio needs a finite positive concentration");
  }
  if (kappa < 15.0) return ratio_series(kappa);
  if (kappa < 1000.0) return ratio_continued_fraction(kappa);
  return ratio_asymptotic(kappa);
}

double log_bessel_i0(double kappa) {
  if (!(kappa >= 0.0) || !std::isfinite(kappa)) {
    throw InputError("log_bessel_i0 needs a finite non-negative argument");
  }
  if (kappa < 700.0) return std::log(std::cyl_bessel_i(0.0, kappa));
  const double u = 1.0 / kappa;
  return kappa - 0.5 * std::log(kTwoPi * kappa) +
         std::log1p(u * (0.125 + u * (9.0 / 128.0 + u * (225.0 / 3072.0))));
}

double edge_information(double kappa) { return kappa * bessel_ratio(kappa); }

Complex von_mises_draw(Rng& rng, double kappa) {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) {
    throw InputError("von Mises sampling needs a finite positive concentration");
  }
  // Best & Fisher (1979) wrapped-Cauchy envelope; tau - 2 and tau - sqrt(2 tau)
  // written without cancellation for small kappa.
  const double root = std::sqrt(1.0 + 4.0 * kappa * kappa);
  const double tau = 1.0 + root;
  const double tau_minus_two = 4.0 * kappa * kappa / (root + 1.0);
  const double rho = tau * tau_minus_two / (tau + std::sqrt(2.0 * tau)) / (2.0 * kappa);
  const double s = (1.0 + rho * rho) / (2.0 * rho);
  while (true) {
    const double u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    const double u3 = uniform01(rng);
    const double z = std::cos(std::numbers::pi * u1);
    const double f = std::clamp((1.0 + s * z) / (s + z), -1.0, 1.0);
    const double c = kappa * (s - f);
    if (c * (2.0 - c) - u2 > 0.0 || std::log(c / u2) + 1.0 - c >= 0.0) {
      const double theta = (u3 > 0.5 ? 1.0 : -1.0) * std::acos(f);
      return std::polar(1.0, theta);
    }
  }
}

std::vector<Complex> von_mises_sample(Rng& rng, Complex mean, double kappa, std::size_t count) {
  if (!(std::abs(std::abs(mean) - 1.0) <= kUnitTolerance)) {
    throw InputError("mean direction must have unit modulus");
  }
  std::vector<Complex> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(mean * von_mises_draw(rng, kappa));
  return out;
}

// ---------------------------------------------------------------------------

ComplexVector edge_estimate(const Graph& graph, const PhaseAssignment& x) {
  if (x.size() != graph.vertex_count()) throw InputError("phase count does not match vertices");
  ComplexVector omega(static_cast<Eigen::Index>(graph.edge_count()));
  for (std::size_t e = 0; e < graph.edge_count(); ++e) {
    const auto& edge = graph.edge(e);
    omega(static_cast<Eigen::Index>(e)) = x[edge.target] * std::conj(x[edge.source]);
  }
  return omega;
}

double likelihood_constant(const VonMisesModel& model) {
  double c = 0.0;
  for (double k : model.kappa) c -= std::log(kTwoPi) + log_bessel_i0(k);
  return c;
}

double log_likelihood(const Graph& graph, const ComplexVector& r, const PhaseAssignment& x,
                      const VonMisesModel& model) {
  require_edges(graph, r);
  model.validate(graph.edge_count());
  const ComplexVector omega = edge_estimate(graph, x);
  double sum = 0.0;
  for (Eigen::Index e = 0; e < omega.size(); ++e) {
    sum += model.kappa(e) * std::real(std::conj(omega(e)) * r(e));
  }
  return sum + likelihood_constant(model);
}

FisherReport fisher_report_circle(const Graph& graph, const VonMisesModel& model,
                                  std::size_t reference) {
  if (!graph.connected()) throw InputError("Fisher information requires a connected graph");
  model.validate(graph.edge_count());
  const auto inc = build_incidence(graph, reference);
  std::vector<double> w(graph.edge_count());
  for (std::size_t e = 0; e < w.size(); ++e) {
    w[e] = edge_information(model.kappa(static_cast<Eigen::Index>(e)));
  }
  const Eigen::Map<const Vector> wv(w.data(), static_cast<Eigen::Index>(w.size()));

  FisherReport out;
  out.fisher = inc.reduced_incidence * wv.asDiagonal() * inc.reduced_incidence.transpose();
  const linalg::SpdFactor factor(out.fisher, "Fisher information");
  out.det_direct = factor.determinant();
  out.det_tree_formula = gaussian::independent_tree_sum(graph, w, reference);
  out.estimator_covariance = factor.inverse();
  return out;
}

// ---------------------------------------------------------------------------

ComplexMatrix AugmentedMatrices::q() const {
  const auto n = adjacency.rows();
  ComplexMatrix shifted = adjacency + beta * ComplexMatrix::Identity(n, n);
  return normalizer.cwiseInverse().cast<Complex>().asDiagonal() * shifted;
}

ComplexMatrix AugmentedMatrices::hermitian_form() const {
  const auto n = adjacency.rows();
  const Eigen::VectorXcd s = normalizer.cwiseSqrt().cwiseInverse().cast<Complex>();
  ComplexMatrix h = s.asDiagonal() * (adjacency + beta * ComplexMatrix::Identity(n, n)) *
                    s.asDiagonal();
  return 0.5 * (h + h.adjoint());
}

Vector AugmentedMatrices::q_eigenvalues() const {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(hermitian_form(), Eigen::EigenvaluesOnly);
  return eig.eigenvalues();
}

double AugmentedMatrices::gershgorin_lower_bound() const {
  return -1.0 + 2.0 * beta / normalizer.maxCoeff();
}

AugmentedMatrices build_q_matrix(const Graph& graph, const ComplexVector& r,
                                 const VonMisesModel& model, double beta) {
  require_edges(graph, r);
  model.validate(graph.edge_count());
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw InputError("beta must be non-negative");
  const auto n = static_cast<Eigen::Index>(graph.vertex_count());
  AugmentedMatrices out;
  out.beta = beta;
  out.adjacency = ComplexMatrix::Zero(n, n);
  out.normalizer = Vector::Constant(n, beta);
  for (std::size_t e = 0; e < graph.edge_count(); ++e) {
    const auto& edge = graph.edge(e);
    const auto s = static_cast<Eigen::Index>(edge.source);
    const auto t = static_cast<Eigen::Index>(edge.target);
    const double k = model.kappa(static_cast<Eigen::Index>(e));
    const Complex re = r(static_cast<Eigen::Index>(e));
    out.adjacency(t, s) += k * re;
    out.adjacency(s, t) += k * std::conj(re);
    out.normalizer(s) += k;
    out.normalizer(t) += k;
  }
  for (Eigen::Index v = 0; v < n; ++v) {
    if (!(out.normalizer(v) > 0.0)) throw InputError("graph has an isolated vertex");
  }
  return out;
}

EigenEstimate global_eigen_estimate(const Graph& graph, const ComplexVector& r,
                                    const VonMisesModel& model, EigenMatrix which, double beta) {
  if (!graph.connected()) throw InputError("eigenvector estimation requires a connected graph");
  const auto aug = build_q_matrix(graph, r, model, which == EigenMatrix::q ? beta : 0.0);
  const ComplexMatrix h = which == EigenMatrix::q ? aug.hermitian_form() : aug.adjacency;
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(h);
  if (eig.info() != Eigen::Success) throw NumericalError("Hermitian eigen-solve failed");
  const auto n = h.rows();

  EigenEstimate out;
  out.eigenvalue = eig.eigenvalues()(n - 1);
  out.eigengap = n > 1 ? out.eigenvalue - eig.eigenvalues()(n - 2)
                       : std::numeric_limits<double>::infinity();
  out.ambiguous = out.eigengap < 1e-10;
  ComplexVector y = eig.eigenvectors().col(n - 1);
  if (which == EigenMatrix::q) {
    y = aug.normalizer.cwiseSqrt().cwiseInverse().cast<Complex>().cwiseProduct(y);
  }
  y /= y.cwiseAbs().maxCoeff();
  ComplexVector x(n);
  for (Eigen::Index v = 0; v < n; ++v) {
    const double mag = std::abs(y(v));
    if (mag < 1e-12) {
      throw NumericalError("eigenvector component vanishes at vertex '" +
                           graph.vertex_id(static_cast<std::size_t>(v)) +
                           "'; phase undetermined");
    }
    x(v) = y(v) / mag;
  }
  out.phases = PhaseAssignment(std::move(x));
  out.eigenvector = std::move(y);
  return out;
}

// ---------------------------------------------------------------------------

AmplitudePhaseState initial_power_state(std::size_t vertices, Rng& rng) {
  AmplitudePhaseState s;
  s.a = Vector::Ones(static_cast<Eigen::Index>(vertices));
  s.x.resize(static_cast<Eigen::Index>(vertices));
  for (auto& z : s.x) z = std::polar(1.0, kTwoPi * uniform01(rng));
  return s;
}

AmplitudePhaseState state_from_phases(const PhaseAssignment& phases) {
  AmplitudePhaseState s;
  s.a = Vector::Ones(static_cast<Eigen::Index>(phases.size()));
  s.x = phases.values();
  return s;
}

Complex power_vertex_update(std::span<const PhaseNeighbor> neighbors, Complex own_y,
                            double normalizer, double beta) {
  Complex sum = beta * own_y;
  for (const auto& nb : neighbors) sum += nb.kappa * nb.y * nb.rotation;
  return sum / normalizer;
}

AmplitudePhaseState local_power_step(const Graph& graph, const ComplexVector& r,
                                     const VonMisesModel& model, const AmplitudePhaseState& state,
                                     double beta, local::AccessObserver* observer) {
  require_edges(graph, r);
  model.validate(graph.edge_count());
  const auto n = graph.vertex_count();
  if (static_cast<std::size_t>(state.x.size()) != n || static_cast<std::size_t>(state.a.size()) != n) {
    throw InputError("state size does not match vertex count");
  }
  AmplitudePhaseState next;
  next.a.resize(static_cast<Eigen::Index>(n));
  next.x.resize(static_cast<Eigen::Index>(n));
  next.iteration = state.iteration + 1;
  next.underflow = state.underflow;

  std::vector<PhaseNeighbor> inbox;
  for (std::size_t v = 0; v < n; ++v) {
    const auto vi = static_cast<Eigen::Index>(v);
    if (graph.degree(v) == 0) throw InputError("graph has an isolated vertex");
    inbox.clear();
    double normalizer = beta;
    for (const auto& inc : graph.incidences(v)) {
      if (observer) observer->on_read(v, inc.neighbor);
      const auto u = static_cast<Eigen::Index>(inc.neighbor);
      const double k = model.kappa(static_cast<Eigen::Index>(inc.edge));
      inbox.push_back({state.a(u) * state.x(u),
                       edge_rotation(r(static_cast<Eigen::Index>(inc.edge)), inc.sign), k});
      normalizer += k;
    }
    if (observer && beta > 0.0) observer->on_read(v, v);
    const Complex y = power_vertex_update(inbox, state.a(vi) * state.x(vi), normalizer, beta);
    const double mag = std::abs(y);
    if (!(mag >= kAmplitudeFloor)) {
      next.underflow = true;
      next.a(vi) = mag;
      next.x(vi) = state.x(vi);
    } else {
      next.a(vi) = mag;
      next.x(vi) = y / mag;
    }
  }
  return next;
}

PowerRunResult local_power_run(const Graph& graph, const ComplexVector& r,
                               const VonMisesModel& model, AmplitudePhaseState state,
                               const PowerRunOptions& options) {
  PowerRunResult out;
  for (std::size_t it = 0; it < options.max_iter; ++it) {
    AmplitudePhaseState next = local_power_step(graph, r, model, state, options.beta);
    const double moved = (next.x - state.x).cwiseAbs().maxCoeff();
    state = std::move(next);
    if (state.underflow) break;
    if (moved < options.tol) {
      out.converged = true;
      break;
    }
  }
  out.state = std::move(state);
  return out;
}

// ---------------------------------------------------------------------------

CriticalPointReport critical_point_report(const Graph& graph, const ComplexVector& r,
                                          const VonMisesModel& model,
                                          const PhaseAssignment& x) {
  require_edges(graph, r);
  model.validate(graph.edge_count());
  const auto n = graph.vertex_count();
  if (x.size() != n) throw InputError("phase count does not match vertices");
  CriticalPointReport out;
  out.defect.resize(static_cast<Eigen::Index>(n));
  out.rho.resize(static_cast<Eigen::Index>(n));
  for (std::size_t v = 0; v < n; ++v) {
    Complex sum = 0.0;
    for (const auto& inc : graph.incidences(v)) {
      sum += model.kappa(static_cast<Eigen::Index>(inc.edge)) * x[inc.neighbor] *
             edge_rotation(r(static_cast<Eigen::Index>(inc.edge)), inc.sign);
    }
    const Complex ratio = sum * std::conj(x[v]);
    out.defect(static_cast<Eigen::Index>(v)) = std::abs(ratio.imag());
    out.rho(static_cast<Eigen::Index>(v)) = ratio.real();
  }
  out.max_defect = n > 0 ? out.defect.maxCoeff() : 0.0;
  return out;
}

HybridVertexUpdate hybrid_vertex_update(std::span<const HybridNeighbor> neighbors, double own_a,
                                        Complex own_x, double previous_rho, double beta,
                                        double threshold) {
  Complex sum = 0.0;
  for (const auto& nb : neighbors) sum += nb.kappa * nb.x * nb.rotation;
  const Complex ratio = sum * std::conj(own_x);
  HybridVertexUpdate out{own_a, own_x, previous_rho, std::abs(ratio.imag()), false, false, false};
  if (out.defect < threshold) {
    out.held = true;
    if (ratio.real() > 0.0) out.rho = ratio.real();
    return out;
  }
  if (ratio.real() > 0.0) {
    out.rho = ratio.real();
  } else {
    out.anti_aligned = true;
  }
  const Complex y = (sum + beta * own_x) / (out.rho + beta);
  const double mag = std::abs(y);
  if (mag >= kAmplitudeFloor && mag <= 1.0 / kAmplitudeFloor) {
    out.a = mag;
    out.x = y / mag;
  } else {
    out.amplitude_out_of_range = true;
  }
  return out;
}

HybridResult hybrid_ml_refine(const Graph& graph, const ComplexVector& r,
                              const VonMisesModel& model, const AmplitudePhaseState& state,
                              const HybridOptions& options) {
  require_edges(graph, r);
  model.validate(graph.edge_count());
  const auto n = graph.vertex_count();
  if (static_cast<std::size_t>(state.x.size()) != n || static_cast<std::size_t>(state.a.size()) != n) {
    throw InputError("state size does not match vertex count");
  }
  if (!(options.threshold > 0.0)) throw InputError("threshold must be positive");

  // Previous weights start at N_v = sum of incident concentrations.
  Vector rho = Vector::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t e = 0; e < graph.edge_count(); ++e) {
    const double k = model.kappa(static_cast<Eigen::Index>(e));
    rho(static_cast<Eigen::Index>(graph.edge(e).source)) += k;
    rho(static_cast<Eigen::Index>(graph.edge(e).target)) += k;
  }

  Vector a = state.a;
  ComplexVector x = state.x;
  for (auto& z : x) z /= std::abs(z);
  HybridResult out;
  std::vector<HybridNeighbor> inbox;
  Vector next_a(a.size());
  ComplexVector next_x(x.size());
  bool fault = false;
  while (!fault) {
    bool all_held = true;
    for (std::size_t v = 0; v < n; ++v) {
      const auto vi = static_cast<Eigen::Index>(v);
      inbox.clear();
      for (const auto& inc : graph.incidences(v)) {
        const auto u = static_cast<Eigen::Index>(inc.neighbor);
        inbox.push_back({a(u), x(u), edge_rotation(r(static_cast<Eigen::Index>(inc.edge)), inc.sign),
                         model.kappa(static_cast<Eigen::Index>(inc.edge))});
      }
      const auto upd =
          hybrid_vertex_update(inbox, a(vi), x(vi), rho(vi), options.beta, options.threshold);
      next_a(vi) = upd.a;
      next_x(vi) = upd.x;
      rho(vi) = upd.rho;
      all_held = all_held && upd.held;
      if (upd.anti_aligned) ++out.anti_aligned_events;
      fault = fault || upd.amplitude_out_of_range;
    }
    if (all_held) {
      out.converged = true;
      break;
    }
    if (out.iterations == options.max_iter) break;
    a.swap(next_a);
    x.swap(next_x);
    ++out.iterations;
  }
  out.phases = PhaseAssignment(x);
  out.report = critical_point_report(graph, r, model, out.phases);
  return out;
}

HybridResult ml_estimate(const Graph& graph, const ComplexVector& r, const VonMisesModel& model,
                         const HybridOptions& options) {
  const auto start = global_eigen_estimate(graph, r, model, EigenMatrix::q, options.beta);
  return hybrid_ml_refine(graph, r, model, state_from_phases(start.phases), options);
}

double circular_error(const PhaseAssignment& estimate, const PhaseAssignment& truth,
                      std::size_t reference) {
  const auto n = truth.size();
  if (n < 2) throw InputError("circular error needs at least two vertices");
  if (estimate.size() != n) throw InputError("estimate and truth sizes differ");
  if (reference >= n) throw InputError("reference vertex out of range");
  Complex sum = 0.0;
  for (std::size_t v = 0; v < n; ++v) {
    if (v != reference) sum += estimate[v] * std::conj(truth[v]);
  }
  const double mean = std::abs(sum) / static_cast<double>(n - 1);
  return std::clamp(1.0 - mean * mean, 0.0, 1.0);
}

}  // namespace netsync::circle
