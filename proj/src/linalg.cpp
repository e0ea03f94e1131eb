#include "netsync/linalg.hpp"

#include <cmath>
#include <string>

#include "netsync/error.hpp"

namespace netsync::linalg {

SpdFactor::SpdFactor(const Eigen::MatrixXd& m, std::string_view what) {
  if (m.rows() != m.cols()) {
    throw InputError(std::string(what) + ": matrix is not square");
  }
  if (m.rows() == 0) {
    llt_.compute(m);
    return;
  }
  llt_.compute(m);
  const double max_diag = m.diagonal().cwiseAbs().maxCoeff();
  if (llt_.info() != Eigen::Success) {
    throw NumericalError(std::string(what) + ": system is disconnected or degenerate");
  }
  const Eigen::VectorXd pivots = llt_.matrixL().toDenseMatrix().diagonal().array().square();
  if (!(pivots.minCoeff() >= kPivotTolerance * max_diag)) {
    throw NumericalError(std::string(what) + ": system is disconnected or degenerate");
  }
}

Eigen::MatrixXd SpdFactor::inverse() const {
  const auto n = llt_.matrixLLT().rows();
  return llt_.solve(Eigen::MatrixXd::Identity(n, n));
}

double SpdFactor::log_determinant() const {
  const auto& l = llt_.matrixLLT();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) sum += std::log(l(i, i));
  return 2.0 * sum;
}

double SpdFactor::determinant() const { return std::exp(log_determinant()); }

bool is_spd(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() == 0) return false;
  if (!m.allFinite()) return false;
  const double scale = m.cwiseAbs().maxCoeff();
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(scale, 1.0)) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  return ev.maxCoeff() > 0.0 && ev.minCoeff() > 1e-12 * ev.maxCoeff();
}

void require_spd(const Eigen::MatrixXd& m, std::string_view what) {
  if (!is_spd(m)) {
    throw InputError(std::string(what) + " must be symmetric positive definite");
  }
}

double determinant(const Eigen::MatrixXd& m) {
  if (m.rows() == 0) return 1.0;
  return m.partialPivLu().determinant();
}

}  // namespace netsync::linalg
