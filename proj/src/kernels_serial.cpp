#include <cmath>
#include <string>

#include "vpmu/error.hpp"
#include "vpmu/kernels.hpp"
#include "vpmu/rng.hpp"

namespace vpmu {

CholeskyFactor::CholeskyFactor(const Eigen::MatrixXd& g, double rel_tol) {
  if (g.rows() != g.cols()) throw ValidationError("normal matrix must be square");
  const Eigen::Index n = g.rows();
  l_ = Eigen::MatrixXd::Zero(n, n);
  const double scale = n > 0 ? g.diagonal().cwiseAbs().maxCoeff() : 0.0;
  const double floor = rel_tol * scale;
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = g(j, j);
    for (Eigen::Index k = 0; k < j; ++k) d -= l_(j, k) * l_(j, k);
    if (!(d > floor))
      throw UnobservableError("normal matrix is singular at state index " + std::to_string(j),
                              static_cast<std::size_t>(j));
    const double ljj = std::sqrt(d);
    l_(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = g(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= l_(i, k) * l_(j, k);
      l_(i, j) = s / ljj;
    }
  }
}

void CholeskyFactor::solve_in_place(double* b) const {
  const Eigen::Index n = l_.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    double s = b[i];
    for (Eigen::Index k = 0; k < i; ++k) s -= l_(i, k) * b[k];
    b[i] = s / l_(i, i);
  }
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (Eigen::Index k = i + 1; k < n; ++k) s -= l_(k, i) * b[k];
    b[i] = s / l_(i, i);
  }
}

Eigen::VectorXd CholeskyFactor::solve(const Eigen::VectorXd& b) const {
  if (b.size() != l_.rows()) throw ValidationError("right-hand side has the wrong dimension");
  Eigen::VectorXd x = b;
  solve_in_place(x.data());
  return x;
}

namespace kernels::serial {

Eigen::MatrixXd normal_matrix(const Eigen::MatrixXd& h, const Eigen::VectorXd& w) {
  const Eigen::Index m = h.rows(), n = h.cols();
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) {
      double s = 0.0;
      for (Eigen::Index r = 0; r < m; ++r) s += h(r, i) * w[r] * h(r, j);
      g(i, j) = s;
      g(j, i) = s;
    }
  }
  return g;
}

Eigen::MatrixXd weighted_rhs(const Eigen::MatrixXd& h, const Eigen::VectorXd& w, const Eigen::MatrixXd& z) {
  const Eigen::Index m = h.rows(), n = h.cols(), t = z.cols();
  Eigen::MatrixXd out(n, t);
  for (Eigen::Index c = 0; c < t; ++c) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double s = 0.0;
      for (Eigen::Index r = 0; r < m; ++r) s += h(r, i) * w[r] * z(r, c);
      out(i, c) = s;
    }
  }
  return out;
}

Eigen::MatrixXd noisy_batch(const Eigen::VectorXd& z_true, const Eigen::VectorXd& sigma,
                            std::size_t trials, std::uint64_t seed) {
  const Eigen::Index m = z_true.size();
  Eigen::MatrixXd z(m, static_cast<Eigen::Index>(trials));
  for (std::size_t t = 0; t < trials; ++t) {
    auto rng = make_rng(seed, "mc-trial", t);
    std::normal_distribution<double> unit(0.0, 1.0);
    for (Eigen::Index r = 0; r < m; ++r)
      z(r, static_cast<Eigen::Index>(t)) = z_true[r] + sigma[r] * unit(rng);
  }
  return z;
}

Eigen::MatrixXd batch_solve(const CholeskyFactor& factor, Eigen::MatrixXd rhs) {
  for (Eigen::Index c = 0; c < rhs.cols(); ++c) factor.solve_in_place(rhs.col(c).data());
  return rhs;
}

}  // namespace kernels::serial
}  // namespace vpmu
