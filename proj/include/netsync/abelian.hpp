#pragma once

// Parameters in the product group R^d x T^q with independent Gaussian and
// von Mises noise per coordinate.

#include <cstddef>
#include <vector>

#include "netsync/circle.hpp"
#include "netsync/fisher.hpp"
#include "netsync/gaussian.hpp"
#include "netsync/graph.hpp"

namespace netsync::abelian {

using circle::Complex;
using circle::ComplexMatrix;
using circle::ComplexVector;

/// (x, z) with x in R^d and z on the q-torus; the group operation is
/// written additively on x and multiplicatively on z.
struct GroupElement {
  Vector linear;
  ComplexVector circular;

  static GroupElement identity(std::size_t d, std::size_t q);
  std::size_t linear_dimension() const { return static_cast<std::size_t>(linear.size()); }
  std::size_t circular_dimension() const { return static_cast<std::size_t>(circular.size()); }
  /// Throws InputError unless every circular entry has unit modulus (1e-9).
  void validate() const;
};

GroupElement compose(const GroupElement& a, const GroupElement& b);
GroupElement inverse(const GroupElement& a);
/// a - b, so compose(difference(a, b), b) == a.
GroupElement difference(const GroupElement& a, const GroupElement& b);
/// Max coordinate distance (chordal on the circle).
double distance(const GroupElement& a, const GroupElement& b);

/// One group element per row: linear is rows x d, circular rows x q. Used
/// both for vertex labels (n rows) and edge data (m rows).
struct ProductData {
  Matrix linear;
  ComplexMatrix circular;

  std::size_t rows() const;
  std::size_t linear_dimension() const { return static_cast<std::size_t>(linear.cols()); }
  std::size_t circular_dimension() const { return static_cast<std::size_t>(circular.cols()); }
  GroupElement row(std::size_t i) const;
  void set_row(std::size_t i, const GroupElement& g);
  static ProductData zeros(std::size_t rows, std::size_t d, std::size_t q);
};

/// Edge values x_t(e) - x_s(e) for vertex labels x.
ProductData edge_differences(const Graph& graph, const ProductData& x);

struct ProductNoiseModel {
  Matrix variances;  // m x d Gaussian variances
  Matrix kappa;      // m x q von Mises concentrations

  static ProductNoiseModel uniform(std::size_t edges, std::size_t d, std::size_t q,
                                   double variance, double kappa);
  std::size_t linear_dimension() const { return static_cast<std::size_t>(variances.cols()); }
  std::size_t circular_dimension() const { return static_cast<std::size_t>(kappa.cols()); }
  void validate(std::size_t edges) const;
  gaussian::NoiseModel linear_noise(std::size_t coordinate) const;
  circle::VonMisesModel circular_noise(std::size_t coordinate) const;
};

/// diag(1/sigma_1^2, ..., 1/sigma_d^2, kappa_1 I1/I0, ..., kappa_q I1/I0).
Matrix edge_fisher_block(const ProductNoiseModel& model, std::size_t edge);

struct ProductEstimate {
  ProductData x;      // n rows; reference vertex at the identity
  ProductData omega;  // m rows
  Matrix linear_residual;          // m x d
  Vector linear_current_defect;    // per linear coordinate
  Vector circular_critical_defect; // per circular coordinate
  std::vector<std::size_t> circular_iterations;
  bool converged = true;
  std::size_t reference = 0;
};

/// Per-coordinate ML: Gaussian least squares on each linear coordinate,
/// global start plus hybrid refinement on each circular coordinate.
ProductEstimate ml_estimate_product(const Graph& graph, const ProductData& r,
                                    const ProductNoiseModel& model, std::size_t reference = 0,
                                    const circle::HybridOptions& options = {});

/// Log-likelihood evaluated edge by edge over the joint density.
double log_likelihood(const Graph& graph, const ProductData& r, const ProductData& x,
                      const ProductNoiseModel& model);
/// Per-coordinate log-likelihoods, linear coordinates first.
std::vector<double> coordinate_log_likelihoods(const Graph& graph, const ProductData& r,
                                               const ProductData& x,
                                               const ProductNoiseModel& model);

/// Caps for the multi-spanning-tree cross-check.
inline constexpr std::size_t kMultiTreeMaxCoordinates = 3;
inline constexpr std::size_t kMultiTreeMaxEdges = 10;

/// F^W = (I (x) D_W) F_edge (I (x) D_W^T) with coordinate-major ordering.
/// det_tree_formula is the multi-spanning-tree sum within the caps.
FisherReport fisher_report_product(const Graph& graph, const ProductNoiseModel& model,
                                   std::size_t reference = 0);

/// Product over coordinates of the weighted spanning-tree sums.
double coordinate_tree_product(const Graph& graph, const ProductNoiseModel& model);

}  // namespace netsync::abelian
