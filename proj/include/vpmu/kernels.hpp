#pragma once

#include <cstddef>
#include <cstdint>

#include <Eigen/Dense>

namespace vpmu {

/// Lower Cholesky factor of a symmetric positive definite normal matrix.
/// A pivot at or below rel_tol times the largest diagonal entry marks the
/// matrix singular; UnobservableError names the first such index.
class CholeskyFactor {
 public:
  explicit CholeskyFactor(const Eigen::MatrixXd& g, double rel_tol = 1e-10);

  Eigen::Index size() const { return l_.rows(); }
  const Eigen::MatrixXd& lower() const { return l_; }
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  /// Solves in place for one right-hand side column.
  void solve_in_place(double* b) const;

 private:
  Eigen::MatrixXd l_;
};

namespace kernels {

// Each kernel comes as a serial reference and an OpenMP version. Both compute
// every output entry with the same summation order, so results agree bitwise.

namespace serial {
/// H^T diag(w) H
Eigen::MatrixXd normal_matrix(const Eigen::MatrixXd& h, const Eigen::VectorXd& w);
/// H^T diag(w) Z, one column per right-hand side.
Eigen::MatrixXd weighted_rhs(const Eigen::MatrixXd& h, const Eigen::VectorXd& w, const Eigen::MatrixXd& z);
/// Column t = z_true + sigma .* N(0, 1), drawn from the trial-t generator of `seed`.
Eigen::MatrixXd noisy_batch(const Eigen::VectorXd& z_true, const Eigen::VectorXd& sigma,
                            std::size_t trials, std::uint64_t seed);
/// Solves every column of `rhs` against the factor.
Eigen::MatrixXd batch_solve(const CholeskyFactor& factor, Eigen::MatrixXd rhs);
}  // namespace serial

namespace omp {
Eigen::MatrixXd normal_matrix(const Eigen::MatrixXd& h, const Eigen::VectorXd& w);
Eigen::MatrixXd weighted_rhs(const Eigen::MatrixXd& h, const Eigen::VectorXd& w, const Eigen::MatrixXd& z);
Eigen::MatrixXd noisy_batch(const Eigen::VectorXd& z_true, const Eigen::VectorXd& sigma,
                            std::size_t trials, std::uint64_t seed);
Eigen::MatrixXd batch_solve(const CholeskyFactor& factor, Eigen::MatrixXd rhs);
int max_threads();
}  // namespace omp

}  // namespace kernels
}  // namespace vpmu
