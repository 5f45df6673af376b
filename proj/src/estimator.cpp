#include "vpmu/estimator.hpp"

#include <chrono>
#include <cmath>
#include <memory>

#include "vpmu/error.hpp"
#include "vpmu/kernels.hpp"

namespace vpmu {

namespace {

// Writes the real 2x2 expansion of complex coefficient c acting on bus column `col`.
void put(Eigen::MatrixXd& h, Eigen::Index row, Eigen::Index col, const Complex& c) {
  h(row, col) += c.real();
  h(row, col + 1) += -c.imag();
  h(row + 1, col) += c.imag();
  h(row + 1, col + 1) += c.real();
}

}  // namespace

MeasurementModel build_measurement_matrix(const GridModel& g, std::span<const Descriptor> descriptors,
                                          EstimatorOptions options) {
  MeasurementModel m;
  for (const auto& b : g.buses()) m.buses.push_back(b.id);
  const auto n = static_cast<Eigen::Index>(2 * m.buses.size());
  const auto rows = static_cast<Eigen::Index>(2 * descriptors.size());
  m.h = Eigen::MatrixXd::Zero(rows, n);
  m.weights = Eigen::VectorXd::Ones(rows);

  Eigen::Index r = 0;
  for (const auto& d : descriptors) {
    const auto col = static_cast<Eigen::Index>(2 * g.bus_index(d.node));
    if (d.kind == Descriptor::Kind::voltage) {
      put(m.h, r, col, Complex(1.0, 0.0));
    } else {
      if (d.branch >= g.branches().size()) throw ValidationError("descriptor references unknown branch");
      const auto& br = g.branches()[d.branch];
      if (d.node != br.from && d.node != br.to)
        throw ValidationError("current descriptor node is not a branch endpoint");
      const auto y = branch_admittance(br);
      const BusId other = d.node == br.from ? br.to : br.from;
      const Complex shunt = options.include_shunts ? (d.node == br.from ? y.shunt_from : y.shunt_to)
                                                   : Complex{};
      put(m.h, r, col, y.series + shunt);
      put(m.h, r, static_cast<Eigen::Index>(2 * g.bus_index(other)), -y.series);
    }
    m.rows.push_back({d, false});
    m.rows.push_back({d, true});
    r += 2;
  }
  return m;
}

MeasurementModel build_measurement_matrix(const GridModel& g, const PmuPlacement& p,
                                          EstimatorOptions options) {
  const auto d = p.descriptors();
  return build_measurement_matrix(g, std::span<const Descriptor>(d), options);
}

std::string state_label(const MeasurementModel& m, std::size_t i) {
  return std::string(i % 2 ? "f_" : "e_") + std::to_string(m.buses.at(i / 2));
}

Eigen::VectorXd state_from_scenario(const MeasurementModel& m, const Scenario& s) {
  Eigen::VectorXd x(m.state_dim());
  for (std::size_t i = 0; i < m.buses.size(); ++i) {
    const auto v = s.voltage(m.buses[i]);
    x[static_cast<Eigen::Index>(2 * i)] = v.real();
    x[static_cast<Eigen::Index>(2 * i + 1)] = v.imag();
  }
  return x;
}

std::vector<Complex> bus_voltages(const MeasurementModel& m, const Eigen::VectorXd& x) {
  std::vector<Complex> out;
  for (std::size_t i = 0; i < m.buses.size(); ++i)
    out.emplace_back(x[static_cast<Eigen::Index>(2 * i)], x[static_cast<Eigen::Index>(2 * i + 1)]);
  return out;
}

Eigen::VectorXd stack_measurements(std::span<const Phasor> phasors) {
  Eigen::VectorXd z(static_cast<Eigen::Index>(2 * phasors.size()));
  for (std::size_t i = 0; i < phasors.size(); ++i) {
    z[static_cast<Eigen::Index>(2 * i)] = phasors[i].re;
    z[static_cast<Eigen::Index>(2 * i + 1)] = phasors[i].im;
  }
  return z;
}

void set_weights_from_sigma(MeasurementModel& m, const Eigen::VectorXd& sigma) {
  if (sigma.size() != m.measurement_dim()) throw ValidationError("one deviation per measurement row required");
  for (Eigen::Index r = 0; r < sigma.size(); ++r) {
    if (!(sigma[r] > 0.0)) throw ValidationError("measurement deviations must be positive");
    m.weights[r] = 1.0 / (sigma[r] * sigma[r]);
  }
}

Estimate wls_solve(const MeasurementModel& m, const Eigen::VectorXd& z) {
  if (z.size() != m.measurement_dim()) throw ValidationError("measurement vector has the wrong dimension");
  const auto g = kernels::omp::normal_matrix(m.h, m.weights);
  std::unique_ptr<CholeskyFactor> factor;
  try {
    factor = std::make_unique<CholeskyFactor>(g);
  } catch (const UnobservableError& e) {
    throw UnobservableError("unobservable: normal matrix singular at " +
                                state_label(m, e.pivot_index()) + " (state index " +
                                std::to_string(e.pivot_index()) + ")",
                            e.pivot_index());
  }
  Estimate est;
  est.state = factor->solve(kernels::omp::weighted_rhs(m.h, m.weights, z).col(0));
  est.residuals = z - m.h * est.state;
  est.objective = est.residuals.cwiseProduct(m.weights).dot(est.residuals);
  return est;
}

Observability observability_rank(const MeasurementModel& m) {
  Observability o;
  if (m.h.size() == 0) return o;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m.h);
  const auto& sv = svd.singularValues();
  const double tol = 1e-8 * (sv.size() ? sv[0] : 0.0);
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > tol) ++o.rank;
  o.observable = o.rank == m.state_dim();
  return o;
}

TimedEstimate timed_estimate(const MeasurementModel& m, const Eigen::VectorXd& z) {
  const auto start = std::chrono::steady_clock::now();
  auto est = wls_solve(m, z);
  const auto stop = std::chrono::steady_clock::now();
  return {std::move(est), std::chrono::duration<double>(stop - start).count()};
}

MonteCarloSummary monte_carlo(const MeasurementModel& m, const Eigen::VectorXd& x_true,
                              const Eigen::VectorXd& sigma, std::size_t trials, std::uint64_t seed,
                              bool parallel) {
  if (trials == 0) throw ValidationError("Monte Carlo needs at least one trial");
  const Eigen::VectorXd z_true = m.h * x_true;
  Eigen::MatrixXd g, z, x;
  if (parallel) {
    g = kernels::omp::normal_matrix(m.h, m.weights);
    z = kernels::omp::noisy_batch(z_true, sigma, trials, seed);
  } else {
    g = kernels::serial::normal_matrix(m.h, m.weights);
    z = kernels::serial::noisy_batch(z_true, sigma, trials, seed);
  }
  const CholeskyFactor factor(g);
  x = parallel ? kernels::omp::batch_solve(factor, kernels::omp::weighted_rhs(m.h, m.weights, z))
               : kernels::serial::batch_solve(factor, kernels::serial::weighted_rhs(m.h, m.weights, z));

  MonteCarloSummary s;
  s.trials = trials;
  const double n = static_cast<double>(trials);
  s.mean_state = x.rowwise().sum() / n;
  const Eigen::MatrixXd centered = x.colwise() - s.mean_state;
  s.std_state = (centered.array().square().rowwise().sum() / std::max(1.0, n - 1.0)).sqrt();
  double obj = 0.0;
  for (Eigen::Index t = 0; t < x.cols(); ++t) {
    const Eigen::VectorXd r = z.col(t) - m.h * x.col(t);
    obj += r.cwiseProduct(m.weights).dot(r);
  }
  s.mean_objective = obj / n;
  return s;
}

Eigen::VectorXd estimate_variance(const MeasurementModel& m) {
  const CholeskyFactor factor(kernels::serial::normal_matrix(m.h, m.weights));
  Eigen::VectorXd var(m.state_dim());
  for (Eigen::Index i = 0; i < m.state_dim(); ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Unit(m.state_dim(), i);
    var[i] = factor.solve(e)[i];
  }
  return var;
}

}  // namespace vpmu
