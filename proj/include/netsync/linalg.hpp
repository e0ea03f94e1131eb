#pragma once

// Small dense helpers used across modules.

#include <string_view>

#include <Eigen/Dense>

namespace netsync::linalg {

/// Relative pivot threshold below which an SPD factorization is rejected.
inline constexpr double kPivotTolerance = 1e-12;

/// Cholesky factorization of a symmetric positive definite system. Throws
/// NumericalError naming `what` when a pivot falls below
/// kPivotTolerance * max diagonal.
class SpdFactor {
 public:
  SpdFactor(const Eigen::MatrixXd& m, std::string_view what);

  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const { return llt_.solve(rhs); }
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const { return llt_.solve(rhs); }
  Eigen::MatrixXd inverse() const;
  double determinant() const;
  double log_determinant() const;

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

/// Symmetric with min eigenvalue > 1e-12 * max eigenvalue.
bool is_spd(const Eigen::MatrixXd& m);

/// Throws InputError when `m` is not square-symmetric positive definite.
void require_spd(const Eigen::MatrixXd& m, std::string_view what);

/// Determinant by partial-pivot LU (any square matrix, 0x0 -> 1).
double determinant(const Eigen::MatrixXd& m);

/// Submatrix with the given row and column index lists.
template <class Rows, class Cols>
Eigen::MatrixXd select(const Eigen::MatrixXd& m, const Rows& rows, const Cols& cols) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(cols.size()));
  Eigen::Index i = 0;
  for (auto r : rows) {
    Eigen::Index j = 0;
    for (auto c : cols) {
      out(i, j++) = m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    }
    ++i;
  }
  return out;
}

}  // namespace netsync::linalg
