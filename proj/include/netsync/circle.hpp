#pragma once

// Phase alignment on the circle group under von Mises edge noise.
//
// A measurement on edge e is r_e = x_t(e) * eps_e * conj(x_s(e)), so the
// noiseless edge value is omega_e = x_t(e) conj(x_s(e)). Seen from vertex v,
// a neighbour u across edge e predicts x_v = x_u * r_e^{D(v,e)}.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "netsync/fisher.hpp"
#include "netsync/graph.hpp"
#include "netsync/local_gaussian.hpp"
#include "netsync/random.hpp"

namespace netsync::circle {

using Complex = std::complex<double>;
using ComplexVector = Eigen::VectorXcd;
using ComplexMatrix = Eigen::MatrixXcd;

/// Unit-modulus vertex (or edge) phases.
class PhaseAssignment {
 public:
  PhaseAssignment() = default;
  /// Throws InputError unless every |value| is 1 within 1e-9; values are
  /// renormalized to unit modulus.
  explicit PhaseAssignment(ComplexVector values);
  static PhaseAssignment from_radians(std::span<const double> angles);

  const ComplexVector& values() const { return values_; }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }
  Complex operator[](std::size_t i) const { return values_(static_cast<Eigen::Index>(i)); }

  /// Angles in [0, 2 pi).
  std::vector<double> radians() const;
  PhaseAssignment rotated(Complex unit) const;
  /// Rotated so the given vertex sits at phase 0.
  PhaseAssignment aligned_to(std::size_t vertex) const;

 private:
  ComplexVector values_;
};

/// Wraps an angle into [0, 2 pi).
double wrap_angle(double radians);

struct VonMisesModel {
  Vector kappa;  // per-edge concentration

  static VonMisesModel uniform(std::size_t edges, double kappa);
  /// Throws InputError unless there are `edges` finite positive values.
  void validate(std::size_t edges) const;
};

/// I1(kappa) / I0(kappa), the mean resultant length of von Mises noise.
double bessel_ratio(double kappa);
/// log I0(kappa), finite for every kappa >= 0.
double log_bessel_i0(double kappa);
/// Per-edge Fisher information kappa I1(kappa) / I0(kappa).
double edge_information(double kappa);

/// One von Mises draw with mean direction 1 (Best-Fisher rejection).
Complex von_mises_draw(Rng& rng, double kappa);
std::vector<Complex> von_mises_sample(Rng& rng, Complex mean, double kappa, std::size_t count);

/// Edge values omega_e = x_t(e) conj(x_s(e)).
ComplexVector edge_estimate(const Graph& graph, const PhaseAssignment& x);

/// sum_e kappa_e Re(conj(omega_e) r_e) + likelihood_constant(model).
double log_likelihood(const Graph& graph, const ComplexVector& r, const PhaseAssignment& x,
                      const VonMisesModel& model);
double likelihood_constant(const VonMisesModel& model);

/// Weighted Laplacian Fisher information with edge weights kappa I1/I0.
FisherReport fisher_report_circle(const Graph& graph, const VonMisesModel& model,
                                  std::size_t reference = 0);

/// N_aug = diag(sum of incident kappa) + beta and the Hermitian augmented
/// adjacency with A(t(e), s(e)) = kappa_e r_e, A(s(e), t(e)) = kappa_e conj(r_e).
struct AugmentedMatrices {
  Vector normalizer;  // N_aug diagonal
  ComplexMatrix adjacency;
  double beta = 0.0;

  /// Q = N_aug^{-1} (A + beta I).
  ComplexMatrix q() const;
  /// N_aug^{-1/2} (A + beta I) N_aug^{-1/2}; Hermitian, same spectrum as Q.
  ComplexMatrix hermitian_form() const;
  /// Eigenvalues of Q, ascending.
  Vector q_eigenvalues() const;
  /// Gershgorin lower bound -1 + 2 beta / (max N + beta).
  double gershgorin_lower_bound() const;
};

AugmentedMatrices build_q_matrix(const Graph& graph, const ComplexVector& r,
                                 const VonMisesModel& model, double beta = 0.0);

enum class EigenMatrix { q, a };

struct EigenEstimate {
  PhaseAssignment phases;
  double eigenvalue = 0.0;
  double eigengap = 0.0;
  /// Top two eigenvalues within 1e-10.
  bool ambiguous = false;
  ComplexVector eigenvector;  // y with Q y = lambda y (or A y = lambda y)
};

/// Dense eigen-solve for the largest eigenvalue; x_v = y_v / |y_v|. Throws
/// NumericalError when a component of y vanishes.
EigenEstimate global_eigen_estimate(const Graph& graph, const ComplexVector& r,
                                    const VonMisesModel& model, EigenMatrix which,
                                    double beta = 0.0);

struct AmplitudePhaseState {
  Vector a;         // amplitudes
  ComplexVector x;  // unit phases
  std::size_t iteration = 0;
  bool underflow = false;

  ComplexVector y() const { return a.cast<Complex>().cwiseProduct(x); }
};

/// a = 1, phases uniform from `rng`.
AmplitudePhaseState initial_power_state(std::size_t vertices, Rng& rng);
/// a = 1, the given phases.
AmplitudePhaseState state_from_phases(const PhaseAssignment& phases);

/// A neighbour's weighted prediction across one edge: y = a_u x_u and
/// rotation = r_e^{D(v,e)}.
struct PhaseNeighbor {
  Complex y;
  Complex rotation;
  double kappa;
};

/// y_v' = (sum kappa y rotation + beta y_v) / normalizer.
Complex power_vertex_update(std::span<const PhaseNeighbor> neighbors, Complex own_y,
                            double normalizer, double beta);

/// Amplitudes below this are reported as underflow.
inline constexpr double kAmplitudeFloor = 1e-300;

/// One synchronous application of Q to y = a x, without normalization.
AmplitudePhaseState local_power_step(const Graph& graph, const ComplexVector& r,
                                     const VonMisesModel& model, const AmplitudePhaseState& state,
                                     double beta = 0.0,
                                     local::AccessObserver* observer = nullptr);

struct PowerRunOptions {
  double beta = 0.0;
  std::size_t max_iter = 5000;
  /// Stop once every vertex moved less than this (radians-scale chord).
  double tol = 1e-12;
};

struct PowerRunResult {
  AmplitudePhaseState state;
  bool converged = false;
  PhaseAssignment phases() const { return PhaseAssignment(state.x); }
};

PowerRunResult local_power_run(const Graph& graph, const ComplexVector& r,
                               const VonMisesModel& model, AmplitudePhaseState state,
                               const PowerRunOptions& options = {});

struct CriticalPointReport {
  Vector defect;  // |Im((A x)_v / x_v)|
  Vector rho;     // Re((A x)_v / x_v)
  double max_defect = 0.0;
};

CriticalPointReport critical_point_report(const Graph& graph, const ComplexVector& r,
                                          const VonMisesModel& model,
                                          const PhaseAssignment& x);

/// Neighbour data for the hybrid update.
struct HybridNeighbor {
  double a;
  Complex x;
  Complex rotation;
  double kappa;
};

struct HybridVertexUpdate {
  double a;
  Complex x;
  double rho;       // weight used: Re((A x)_v / x_v), or the previous one if not positive
  double defect;    // |Im((A x)_v / x_v)| at the current iterate
  bool held;        // defect already below threshold; state unchanged
  bool anti_aligned;
  bool amplitude_out_of_range = false;  // |y| outside [floor, 1/floor]; state kept
};

/// y' = (sum kappa x_u rot + beta x_v) / (rho + beta). Only phases enter the
/// sum; a' = |y'| >= 1 shrinks back to 1 as the vertex approaches a critical
/// point.
HybridVertexUpdate hybrid_vertex_update(std::span<const HybridNeighbor> neighbors, double own_a,
                                        Complex own_x, double previous_rho, double beta,
                                        double threshold);

struct HybridOptions {
  double threshold = 1e-9;
  std::size_t max_iter = 20000;
  double beta = 0.0;
};

struct HybridResult {
  PhaseAssignment phases;
  CriticalPointReport report;
  std::size_t iterations = 0;
  bool converged = false;
  std::size_t anti_aligned_events = 0;
};

/// Hybrid maximum-likelihood iteration from a power-iteration state: every
/// vertex whose defect is above threshold re-weights its neighbours by
/// 1 / Re((A x)_v / x_v) and updates.
HybridResult hybrid_ml_refine(const Graph& graph, const ComplexVector& r,
                              const VonMisesModel& model, const AmplitudePhaseState& state,
                              const HybridOptions& options = {});

/// Global Q eigenvector followed by hybrid refinement.
HybridResult ml_estimate(const Graph& graph, const ComplexVector& r, const VonMisesModel& model,
                         const HybridOptions& options = {});

/// 1 - |mean_{v != ref} xhat_v conj(x_v)|^2.
double circular_error(const PhaseAssignment& estimate, const PhaseAssignment& truth,
                      std::size_t reference);

}  // namespace netsync::circle
