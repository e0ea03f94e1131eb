#pragma once

#include <optional>

#include <Eigen/Dense>

namespace netsync {

/// Fisher information in the reference-vertex parametrization together with
/// its determinant computed two ways.
struct FisherReport {
  Eigen::MatrixXd fisher;  // F^W
  double det_direct = 0.0;
  /// Determinant from the spanning-tree side (matrix-tree, Cauchy-Binet or
  /// multi-spanning-tree sums). Empty when the instance is too large for the
  /// enumeration that route needs.
  std::optional<double> det_tree_formula;
  Eigen::MatrixXd estimator_covariance;  // (F^W)^{-1}

  double trace_inverse() const { return estimator_covariance.trace(); }
};

}  // namespace netsync
