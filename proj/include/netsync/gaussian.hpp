#pragma once

// Closed-form maximum-likelihood estimation and Fisher information for
// Gaussian edge noise on R and R^d.
//
// Measurements are stored as an m x d matrix (row = edge, column =
// coordinate). Full md x md covariances use coordinate-major ordering: the
// flat index of (edge e, coordinate k) is k*m + e, which is also the
// column-major layout of the m x d measurement matrix.

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "netsync/fisher.hpp"
#include "netsync/graph.hpp"

namespace netsync::gaussian {

struct IidScalar {
  double variance = 1.0;
};
struct DiagonalScalar {
  Vector variances;  // one per edge
};
struct FullScalar {
  Matrix covariance;  // m x m
};
struct IidVector {
  Matrix covariance;  // d x d, shared by every edge
};
struct FullVector {
  Matrix covariance;  // md x md, coordinate-major
};

using NoiseModel = std::variant<IidScalar, DiagonalScalar, FullScalar, IidVector, FullVector>;

/// Throws InputError when the model does not fit m edges and d coordinates
/// or a covariance is not SPD.
void validate(const NoiseModel& noise, std::size_t edges, std::size_t dimension);
/// Coordinates implied by the model (1 for scalar variants, 0 when a
/// FullVector size alone cannot decide).
std::size_t model_dimension(const NoiseModel& noise, std::size_t edges);

/// Edge-space covariance as an md x md coordinate-major matrix.
Matrix edge_covariance(const NoiseModel& noise, std::size_t edges, std::size_t dimension);

enum class Gauge { reference, mean_zero };

struct EstimateResult {
  Matrix x;         // n x d vertex offsets
  Matrix omega;     // m x d edge estimate, D^T x
  Matrix residual;  // m x d, r - omega
  Gauge gauge = Gauge::reference;
  std::size_t reference = 0;
};

EstimateResult ml_estimate_iid(const IncidenceSet& incidence, const Vector& r, double variance);

/// Weighted least squares under an m x m covariance (oblique projection).
EstimateResult ml_estimate_correlated(const IncidenceSet& incidence, const Vector& r,
                                      const Matrix& covariance);

/// R^d measurements under IidVector or FullVector noise.
EstimateResult ml_estimate_vector(const IncidenceSet& incidence, const Matrix& r,
                                  const NoiseModel& noise);

/// Dispatches on the noise variant.
EstimateResult ml_estimate(const IncidenceSet& incidence, const Matrix& r,
                           const NoiseModel& noise);

/// Re-express an estimate with vertex offsets summing to zero per coordinate.
EstimateResult to_mean_zero(EstimateResult estimate);

/// Minimum-norm offsets (L + (mu/n) 1 1^T)^{-1} D r; identical for all mu > 0.
Vector mean_zero_gauge(const IncidenceSet& incidence, const Vector& r, double mu);

/// Max-norm of the (weighted) current-law defect of a residual:
/// D R^{-1} (r - omega), per coordinate block.
double current_law_defect(const IncidenceSet& incidence, const Matrix& residual,
                          const NoiseModel& noise);

FisherReport fisher_report(const Graph& graph, const IncidenceSet& incidence,
                           const NoiseModel& noise);

/// det(D_WS D_WS'^T) for spanning trees S, S'. Throws InputError if either
/// edge set is not a spanning tree.
int alpha_sign(const Graph& graph, const IncidenceSet& incidence,
               std::span<const std::size_t> tree, std::span<const std::size_t> other);

/// Tree coordinates nu = D_WS^T x of reduced vertex offsets x.
Vector tree_coordinates(const IncidenceSet& incidence, std::span<const std::size_t> tree,
                        const Vector& reduced_offsets);
/// Inverse map: reduced offsets from tree coordinates.
Vector offsets_from_tree(const IncidenceSet& incidence, std::span<const std::size_t> tree,
                         const Vector& nu);

/// Cauchy-Binet expansion of det((I_k (x) D_W) M (I_k (x) D_W^T)) over
/// multi-spanning trees, for an mk x mk coordinate-major edge information
/// matrix M. With `diagonal_pairs_only` only S = S' terms are summed, which
/// is exact when M is block diagonal per coordinate and diagonal within each
/// block. Returns nothing if the number of terms exceeds `max_terms`.
std::optional<double> multi_tree_determinant(const Graph& graph, const IncidenceSet& incidence,
                                             const Matrix& information, std::size_t coordinates,
                                             bool diagonal_pairs_only,
                                             std::size_t max_terms = 2'000'000);

/// Edge-count limit for the Cauchy-Binet cross-check.
inline constexpr std::size_t kCauchyBinetMaxEdges = 10;
/// Edge-count limit for spanning-tree enumeration inside Fisher reports.
inline constexpr std::size_t kTreeEnumerationMaxEdges = 16;

/// Weighted spanning-tree sum through a route independent of the caller's
/// cofactor: explicit enumeration for small graphs, otherwise the cofactor
/// of a different reference vertex.
double independent_tree_sum(const Graph& graph, std::span<const double> weights,
                            std::size_t avoid_reference);

}  // namespace netsync::gaussian
