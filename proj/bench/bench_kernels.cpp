#include <benchmark/benchmark.h>

#include <random>

#include "vpmu/kernels.hpp"
#include "vpmu/rng.hpp"

namespace {

struct Problem {
  Eigen::MatrixXd h;
  Eigen::VectorXd w, z, sigma;
};

Problem make_problem(int rows, int cols) {
  auto rng = vpmu::make_rng(1, "bench");
  std::normal_distribution<double> n01;
  Problem p{Eigen::MatrixXd(rows, cols), Eigen::VectorXd::Ones(rows), Eigen::VectorXd(rows),
            Eigen::VectorXd::Constant(rows, 0.01)};
  for (int r = 0; r < rows; ++r) {
    p.z[r] = n01(rng);
    for (int c = 0; c < cols; ++c) p.h(r, c) = n01(rng);
  }
  // Diagonal boost keeps the normal matrix well conditioned.
  for (int c = 0; c < cols; ++c) p.h(c % rows, c) += 10.0;
  return p;
}

template <bool Parallel>
void normal_matrix(benchmark::State& st) {
  const auto p = make_problem(static_cast<int>(st.range(0)), static_cast<int>(st.range(1)));
  for (auto _ : st) {
    if constexpr (Parallel) benchmark::DoNotOptimize(vpmu::kernels::omp::normal_matrix(p.h, p.w));
    else benchmark::DoNotOptimize(vpmu::kernels::serial::normal_matrix(p.h, p.w));
  }
}

template <bool Parallel>
void noisy_batch(benchmark::State& st) {
  const auto p = make_problem(38, 28);
  const auto trials = static_cast<std::size_t>(st.range(0));
  for (auto _ : st) {
    if constexpr (Parallel) benchmark::DoNotOptimize(vpmu::kernels::omp::noisy_batch(p.z, p.sigma, trials, 3));
    else benchmark::DoNotOptimize(vpmu::kernels::serial::noisy_batch(p.z, p.sigma, trials, 3));
  }
}

template <bool Parallel>
void solve_batch(benchmark::State& st) {
  const auto p = make_problem(38, 28);
  const auto trials = static_cast<std::size_t>(st.range(0));
  const vpmu::CholeskyFactor f(vpmu::kernels::serial::normal_matrix(p.h, p.w));
  const auto z = vpmu::kernels::serial::noisy_batch(p.z, p.sigma, trials, 3);
  for (auto _ : st) {
    if constexpr (Parallel) {
      benchmark::DoNotOptimize(vpmu::kernels::omp::batch_solve(f, vpmu::kernels::omp::weighted_rhs(p.h, p.w, z)));
    } else {
      benchmark::DoNotOptimize(
          vpmu::kernels::serial::batch_solve(f, vpmu::kernels::serial::weighted_rhs(p.h, p.w, z)));
    }
  }
}

}  // namespace

BENCHMARK(normal_matrix<false>)->Args({38, 28})->Args({400, 120});
BENCHMARK(normal_matrix<true>)->Args({38, 28})->Args({400, 120});
BENCHMARK(noisy_batch<false>)->Arg(2500);
BENCHMARK(noisy_batch<true>)->Arg(2500);
BENCHMARK(solve_batch<false>)->Arg(2500);
BENCHMARK(solve_batch<true>)->Arg(2500);

BENCHMARK_MAIN();
