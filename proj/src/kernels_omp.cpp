#include <omp.h>

#include "vpmu/kernels.hpp"
#include "vpmu/rng.hpp"

namespace vpmu::kernels::omp {

namespace {
// Below this many multiply-adds the fork/join costs more than it saves.
constexpr Eigen::Index kParallelWork = 1 << 15;
}  // namespace

int max_threads() { return omp_get_max_threads(); }

Eigen::MatrixXd normal_matrix(const Eigen::MatrixXd& h, const Eigen::VectorXd& w) {
  const Eigen::Index m = h.rows(), n = h.cols();
  Eigen::MatrixXd g(n, n);
#pragma omp parallel for schedule(dynamic) if (m * n * n / 2 > kParallelWork)
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
#pragma omp parallel for schedule(static) if (m * n * t > kParallelWork)
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
  const auto n_trials = static_cast<Eigen::Index>(trials);
  Eigen::MatrixXd z(m, n_trials);
#pragma omp parallel for schedule(static) if (m * n_trials > kParallelWork)
  for (Eigen::Index t = 0; t < n_trials; ++t) {
    auto rng = make_rng(seed, "mc-trial", static_cast<std::uint64_t>(t));
    std::normal_distribution<double> unit(0.0, 1.0);
    for (Eigen::Index r = 0; r < m; ++r) z(r, t) = z_true[r] + sigma[r] * unit(rng);
  }
  return z;
}

Eigen::MatrixXd batch_solve(const CholeskyFactor& factor, Eigen::MatrixXd rhs) {
  const Eigen::Index n = factor.size(), t = rhs.cols();
#pragma omp parallel for schedule(static) if (n * n * t > kParallelWork)
  for (Eigen::Index c = 0; c < t; ++c) factor.solve_in_place(rhs.col(c).data());
  return rhs;
}

}  // namespace vpmu::kernels::omp
