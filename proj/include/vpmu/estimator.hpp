#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vpmu/codec.hpp"
#include "vpmu/grid.hpp"
#include "vpmu/pmu.hpp"

namespace vpmu {

struct MeasurementRow {
  Descriptor descriptor;
  bool imaginary = false;
};

struct EstimatorOptions {
  bool include_shunts = true;
};

/// Linear map from the rectangular state (e_1, f_1, ..., e_N, f_N), buses in
/// grid order, to stacked (re, im) phasor measurements.
struct MeasurementModel {
  std::vector<BusId> buses;
  std::vector<MeasurementRow> rows;
  Eigen::MatrixXd h;
  Eigen::VectorXd weights;

  Eigen::Index state_dim() const { return h.cols(); }
  Eigen::Index measurement_dim() const { return h.rows(); }
};

MeasurementModel build_measurement_matrix(const GridModel& g, std::span<const Descriptor> descriptors,
                                          EstimatorOptions options = {});
MeasurementModel build_measurement_matrix(const GridModel& g, const PmuPlacement& p,
                                          EstimatorOptions options = {});

/// "e_<bus>" or "f_<bus>" for state index `i`.
std::string state_label(const MeasurementModel& m, std::size_t i);

Eigen::VectorXd state_from_scenario(const MeasurementModel& m, const Scenario& s);
std::vector<Complex> bus_voltages(const MeasurementModel& m, const Eigen::VectorXd& x);
/// Stacks phasors as (re, im) pairs in row order.
Eigen::VectorXd stack_measurements(std::span<const Phasor> phasors);

/// Weights 1/sigma^2 given one standard deviation per measurement row.
void set_weights_from_sigma(MeasurementModel& m, const Eigen::VectorXd& sigma);

struct Estimate {
  Eigen::VectorXd state;
  Eigen::VectorXd residuals;
  double objective = 0.0;  // weighted residual sum of squares
};

/// Weighted least squares via Cholesky on the normal equations. Throws
/// UnobservableError when the normal matrix is singular.
Estimate wls_solve(const MeasurementModel& m, const Eigen::VectorXd& z);

struct Observability {
  Eigen::Index rank = 0;
  bool observable = false;
};

/// Numerical rank of H: singular values below 1e-8 of the largest are zero.
Observability observability_rank(const MeasurementModel& m);

struct TimedEstimate {
  Estimate estimate;
  double seconds = 0.0;
};

TimedEstimate timed_estimate(const MeasurementModel& m, const Eigen::VectorXd& z);

struct MonteCarloSummary {
  std::size_t trials = 0;
  Eigen::VectorXd mean_state;
  Eigen::VectorXd std_state;
  double mean_objective = 0.0;
};

/// Repeats the estimate on `trials` noisy copies of H x_true (row deviation
/// `sigma`) using the batched kernels.
MonteCarloSummary monte_carlo(const MeasurementModel& m, const Eigen::VectorXd& x_true,
                              const Eigen::VectorXd& sigma, std::size_t trials, std::uint64_t seed,
                              bool parallel = true);

/// Diagonal of (H^T W H)^-1: the estimator's per-state variance.
Eigen::VectorXd estimate_variance(const MeasurementModel& m);

}  // namespace vpmu
