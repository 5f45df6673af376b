#include "vpmu/experiments.hpp"

#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "vpmu/broker.hpp"
#include "vpmu/error.hpp"
#include "vpmu/grid.hpp"
#include "vpmu/kernels.hpp"
#include "vpmu/pipeline.hpp"

namespace vpmu {

namespace {

std::vector<FrameConfig> configs_of(const ExperimentConfig& c) {
  if (c.config) return {*c.config};
  return {FrameConfig::A, FrameConfig::B};
}
std::vector<NumberFormat> formats_of(const ExperimentConfig& c) {
  if (c.format) return {*c.format};
  return {NumberFormat::fixed16, NumberFormat::float32};
}
std::vector<CvoPlacement> modes_of(const ExperimentConfig& c) {
  if (c.mode) return {*c.mode};
  return {CvoPlacement::local, CvoPlacement::remote};
}

struct Setup {
  GridModel grid;
  Scenario scenario;
  PmuPlacement placement;
  NetworkConfig network;
};

Setup load_setup(const ExperimentConfig& cfg, const std::string& default_placement) {
  cfg.validate();
  Setup s{load_cdf(cfg.grid), {}, {}, {}};
  s.scenario = cfg.scenario ? load_scenario(*cfg.scenario) : scenario_from_grid(s.grid);
  const auto monitored = parse_bus_list(cfg.placement.value_or(default_placement));
  for (BusId b : monitored)
    if (!s.grid.has_bus(b)) throw ConfigError("placement bus " + std::to_string(b) + " is not in the grid");
  validate_scenario(s.scenario, monitored);
  s.placement = build_placement(s.grid, monitored, static_cast<int>(cfg.channels_per_pmu));
  s.network = cfg.links ? load_network_config(*cfg.links) : ideal_network(cfg.overhead);
  return s;
}

PipelineConfig pipeline_config(const ExperimentConfig& cfg, const Setup& s, CvoPlacement mode) {
  PipelineConfig p;
  p.grid = &s.grid;
  p.scenario = s.scenario;
  p.placement = s.placement;
  p.mode = mode;
  p.phasor_set = phasor_set_of(cfg.config.value_or(FrameConfig::A));
  p.format = cfg.format.value_or(NumberFormat::float32);
  p.noise.phasor_rel = cfg.noise;
  p.rate = cfg.rate;
  p.network = s.network;
  p.periods = cfg.trials;
  p.seed = cfg.seed;
  return p;
}

std::string bus_list(const std::set<BusId>& buses) {
  std::string out;
  for (BusId b : buses) out += (out.empty() ? "" : ",") + std::to_string(b);
  return out;
}

}  // namespace

PhasorSet phasor_set_of(FrameConfig c) {
  return c == FrameConfig::A ? PhasorSet::phases : PhasorSet::phases_and_sequences;
}
std::string to_string(FrameConfig c) { return c == FrameConfig::A ? "A" : "B"; }
std::string to_string(NumberFormat f) { return f == NumberFormat::fixed16 ? "fixed" : "float"; }
std::string to_string(CvoPlacement p) { return p == CvoPlacement::local ? "local" : "remote"; }

void ExperimentConfig::validate() const {
  namespace fs = std::filesystem;
  auto exists = [](const fs::path& p, const char* what) {
    if (!fs::exists(p)) throw ConfigError(std::string(what) + " file not found: " + p.string());
  };
  exists(grid, "grid");
  if (scenario) exists(*scenario, "scenario");
  if (links) exists(*links, "link config");
  if (trials < 1) throw ConfigError("trials must be at least 1");
  if (!is_supported_rate(rate)) throw ConfigError("rate must be 10, 25 or 50 fps");
  if (channels_per_pmu < 1) throw ConfigError("a PMU needs at least one channel");
  if (pmus < 1) throw ConfigError("at least one PMU required");
  if (!(noise >= 0.0)) throw ConfigError("noise must be non-negative");
}

NetworkConfig ideal_network(std::size_t overhead) {
  NetworkConfig n;
  for (const char* name : {"pmu_lan", "lan", "wan", "wan_stream", "cloud"})
    n.links[name] = LinkModel{name, ConstantDelay{0.001}, overhead, 0.0, true};
  return n;
}

std::vector<BandwidthRow> cmd_bandwidth(const ExperimentConfig& cfg) {
  if (!is_supported_rate(cfg.rate)) throw ConfigError("rate must be 10, 25 or 50 fps");
  if (cfg.pmus < 1 || cfg.channels_per_pmu < 1) throw ConfigError("PMU and channel counts must be positive");
  std::vector<BandwidthRow> rows;
  const auto rate = static_cast<std::uint64_t>(cfg.rate);
  for (auto c : configs_of(cfg)) {
    const auto per_pmu = cfg.channels_per_pmu * phasors_per_channel(phasor_set_of(c));
    for (auto f : formats_of(cfg)) {
      BandwidthRow local{c, f, CvoPlacement::local, data_frame_size(cfg.pmus, per_pmu, f), 1, 0, 0.0};
      BandwidthRow remote{c, f, CvoPlacement::remote, data_frame_size(1, per_pmu, f), cfg.pmus, 0, 0.0};
      local.bps = stream_bandwidth(local.frame_bytes, rate, cfg.overhead, local.streams);
      remote.bps = stream_bandwidth(remote.frame_bytes, rate, cfg.overhead, remote.streams);
      const double saving = bandwidth_saving(static_cast<double>(local.bps), static_cast<double>(remote.bps));
      local.saving_pct = remote.saving_pct = saving;
      for (auto m : modes_of(cfg)) rows.push_back(m == CvoPlacement::local ? local : remote);
    }
  }
  return rows;
}

void write_bandwidth_csv(std::ostream& os, const std::vector<BandwidthRow>& rows) {
  os << "config,format,placement,frame_bytes,streams,bps,saving_pct\n";
  for (const auto& r : rows)
    os << to_string(r.config) << ',' << to_string(r.format) << ',' << to_string(r.placement) << ','
       << r.frame_bytes << ',' << r.streams << ',' << r.bps << ',' << std::fixed << std::setprecision(1)
       << r.saving_pct << std::defaultfloat << '\n';
}

void print_bandwidth_table(std::ostream& os, const std::vector<BandwidthRow>& rows) {
  os << std::left << std::setw(8) << "config" << std::setw(8) << "format" << std::setw(10) << "placement"
     << std::right << std::setw(8) << "frame" << std::setw(9) << "streams" << std::setw(10) << "bps"
     << std::setw(10) << "saving%" << '\n';
  for (const auto& r : rows)
    os << std::left << std::setw(8) << to_string(r.config) << std::setw(8) << to_string(r.format)
       << std::setw(10) << to_string(r.placement) << std::right << std::setw(8) << r.frame_bytes
       << std::setw(9) << r.streams << std::setw(10) << r.bps << std::setw(10) << std::fixed
       << std::setprecision(1) << r.saving_pct << std::defaultfloat << '\n';
}

LatencyReport run_latency(const ExperimentConfig& cfg, CvoPlacement mode) {
  const auto setup = load_setup(cfg, "2");
  const auto result = run_pipeline(pipeline_config(cfg, setup, mode));
  if (result.latencies.empty()) throw NoDataError("no measurement set reached the application");

  LatencyReport r;
  r.mode = mode;
  r.records = result.latencies;
  for (const auto& d : result.deliveries) r.complete += d.complete ? 1 : 0;
  const auto cdf = latency_cdf(r.records);
  r.min_ms = cdf.min() * 1e3;
  r.mean_ms = cdf.mean() * 1e3;
  r.max_ms = cdf.max() * 1e3;
  r.dep_50 = dependability(r.records, 0.050);
  r.dep_100 = dependability(r.records, 0.100);
  r.dep_500 = dependability(r.records, 0.500);
  r.link_stats = result.link_stats;
  return r;
}

std::vector<LatencyReport> cmd_latency(const ExperimentConfig& cfg) {
  std::vector<LatencyReport> out;
  for (auto m : modes_of(cfg)) out.push_back(run_latency(cfg, m));
  return out;
}

void write_latency_csv(std::ostream& os, const LatencyReport& r) {
  os << "frame_time_s,latency_ms\n" << std::fixed;
  for (const auto& rec : r.records)
    os << std::setprecision(2) << rec.frame_time << ',' << std::setprecision(6) << rec.latency() * 1e3 << '\n';
  os << std::defaultfloat;
}

void write_cdf_csv(std::ostream& os, const LatencyReport& r) {
  os << "latency_ms,cum_fraction\n" << std::fixed << std::setprecision(6);
  for (const auto& [x, f] : latency_cdf(r.records).points()) os << x * 1e3 << ',' << f << '\n';
  os << std::defaultfloat;
}

void write_latency_summary_csv(std::ostream& os, const std::vector<LatencyReport>& reports) {
  os << "mode,sets,complete,min_ms,mean_ms,max_ms,dep_50ms_pct,dep_100ms_pct,dep_500ms_pct\n" << std::fixed
     << std::setprecision(6);
  for (const auto& r : reports)
    os << to_string(r.mode) << ',' << r.records.size() << ',' << r.complete << ',' << r.min_ms << ','
       << r.mean_ms << ',' << r.max_ms << ',' << r.dep_50 << ',' << r.dep_100 << ',' << r.dep_500 << '\n';
  os << std::defaultfloat;
}

void print_latency_table(std::ostream& os, const std::vector<LatencyReport>& reports) {
  os << std::left << std::setw(8) << "mode" << std::right << std::setw(7) << "sets" << std::setw(10)
     << "min ms" << std::setw(10) << "mean ms" << std::setw(10) << "max ms" << std::setw(9) << "<=50ms"
     << std::setw(9) << "<=100ms" << std::setw(9) << "<=500ms" << '\n'
     << std::fixed;
  for (const auto& r : reports)
    os << std::left << std::setw(8) << to_string(r.mode) << std::right << std::setw(7) << r.records.size()
       << std::setprecision(2) << std::setw(10) << r.min_ms << std::setw(10) << r.mean_ms << std::setw(10)
       << r.max_ms << std::setprecision(1) << std::setw(8) << r.dep_50 << '%' << std::setw(8)
       << r.dep_100 << '%' << std::setw(8) << r.dep_500 << "%\n";
  os << std::defaultfloat;
}

SeReport cmd_se(const ExperimentConfig& cfg) {
  const auto setup = load_setup(cfg, "2,6,7,9");
  const auto& g = setup.grid;
  auto model = build_measurement_matrix(g, setup.placement);

  SeReport rep;
  rep.buses = model.buses;
  const auto obs = observability_rank(model);
  rep.rank = obs.rank;
  if (!obs.observable) {
    std::string where;
    try {
      CholeskyFactor probe(kernels::serial::normal_matrix(model.h, model.weights));
    } catch (const UnobservableError& e) {
      where = "; first unresolved state " + state_label(model, e.pivot_index());
      throw UnobservableError("placement {" + bus_list(setup.placement.monitored) +
                                  "} is unobservable: H has rank " + std::to_string(obs.rank) + " of " +
                                  std::to_string(model.state_dim()) + " (deficiency " +
                                  std::to_string(model.state_dim() - obs.rank) + ")" + where,
                              e.pivot_index());
    }
    throw UnobservableError("placement {" + bus_list(setup.placement.monitored) + "} is unobservable: H has rank " +
                                std::to_string(obs.rank) + " of " + std::to_string(model.state_dim()),
                            0);
  }
  rep.dof = static_cast<double>(model.measurement_dim() - model.state_dim());

  const auto pcfg = pipeline_config(cfg, setup, cfg.mode.value_or(CvoPlacement::local));
  const auto result = run_pipeline(pcfg);
  const auto per_channel = phasors_per_channel(pcfg.phasor_set);
  // Averaging three independently perturbed phases shrinks the deviation by sqrt(3).
  const double shrink = pcfg.phasor_set == PhasorSet::phases ? std::sqrt(3.0) : 1.0;
  const auto x_true = state_from_scenario(model, setup.scenario);

  std::vector<double> times;
  double objective_sum = 0.0;
  for (const auto& d : result.deliveries) {
    if (!d.complete || !d.frame) continue;
    std::vector<Phasor> z;
    Eigen::VectorXd sigma(model.measurement_dim());
    for (std::size_t b = 0; b < d.frame->blocks.size(); ++b) {
      const auto& ph = d.frame->blocks[b].phasors;
      for (std::size_t c = 0; c < result.devices.at(b).channels.size(); ++c) {
        const auto p = positive_sequence(std::span(ph).subspan(c * per_channel, per_channel), pcfg.phasor_set);
        const double sd = std::max(cfg.noise * std::hypot(p.re, p.im) / shrink, 1e-12);
        sigma[static_cast<Eigen::Index>(2 * z.size())] = sd;
        sigma[static_cast<Eigen::Index>(2 * z.size() + 1)] = sd;
        z.push_back(p);
      }
    }
    if (cfg.noise > 0.0) set_weights_from_sigma(model, sigma);
    const auto timed = timed_estimate(model, stack_measurements(z));
    times.push_back(timed.seconds * 1e3);
    objective_sum += timed.estimate.objective;
    rep.max_abs_error = std::max(rep.max_abs_error, (timed.estimate.state - x_true).cwiseAbs().maxCoeff());
    if (rep.sets++ == 0) {
      rep.estimate = bus_voltages(model, timed.estimate.state);
      rep.residual_norm = std::sqrt(timed.estimate.objective);
    }
  }
  if (rep.sets == 0) throw NoDataError("no complete measurement set reached the estimator");
  const double n = static_cast<double>(times.size());
  rep.mean_objective = objective_sum / n;
  rep.mean_ms = std::accumulate(times.begin(), times.end(), 0.0) / n;
  double ss = 0.0;
  for (double t : times) ss += (t - rep.mean_ms) * (t - rep.mean_ms);
  rep.std_ms = times.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  return rep;
}

void write_estimate_csv(std::ostream& os, const SeReport& r) {
  os << "bus,e,f,vmag,angle_deg\n" << std::setprecision(12);
  for (std::size_t i = 0; i < r.buses.size(); ++i) {
    const auto& v = r.estimate[i];
    os << r.buses[i] << ',' << v.real() << ',' << v.imag() << ',' << std::abs(v) << ','
       << std::arg(v) * 180.0 / M_PI << '\n';
  }
  os << std::defaultfloat;
}

void write_timing_csv(std::ostream& os, const SeReport& r) {
  os << "mean_ms,std_ms,trials\n" << std::setprecision(6) << r.mean_ms << ',' << r.std_ms << ',' << r.sets
     << '\n';
}

void print_se_report(std::ostream& os, const SeReport& r) {
  os << std::left << std::setw(6) << "bus" << std::right << std::setw(12) << "|V| pu" << std::setw(12)
     << "angle deg" << '\n'
     << std::fixed;
  for (std::size_t i = 0; i < r.buses.size(); ++i)
    os << std::left << std::setw(6) << r.buses[i] << std::right << std::setprecision(5) << std::setw(12)
       << std::abs(r.estimate[i]) << std::setprecision(3) << std::setw(12)
       << std::arg(r.estimate[i]) * 180.0 / M_PI << '\n';
  os << std::defaultfloat << std::setprecision(6) << "rank " << r.rank << ", sets " << r.sets
     << ", residual norm " << r.residual_norm << ", mean objective " << r.mean_objective << " (dof " << r.dof
     << "), max state error " << r.max_abs_error << '\n'
     << "solve time " << r.mean_ms << " +/- " << r.std_ms << " ms over " << r.sets << " sets\n";
}

bool cmd_topics(const std::string& filter, const std::string& name) {
  return topic_matches(TopicFilter::parse(filter), TopicName::parse(name));
}

void cmd_dump_grid(const ExperimentConfig& cfg, const std::filesystem::path& out) {
  const auto g = load_cdf(cfg.grid);
  std::filesystem::create_directories(out);
  write_buses_csv(g, out / "buses.csv");
  write_branches_csv(g, out / "branches.csv");
}

}  // namespace vpmu
