#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vpmu/codec.hpp"
#include "vpmu/cvo.hpp"
#include "vpmu/estimator.hpp"
#include "vpmu/netsim.hpp"
#include "vpmu/pmu.hpp"

namespace vpmu {

/// Config A reports the three phase phasors of each channel, Config B adds the
/// positive, negative and zero sequence phasors.
enum class FrameConfig { A, B };

PhasorSet phasor_set_of(FrameConfig c);
std::string to_string(FrameConfig c);
std::string to_string(NumberFormat f);
std::string to_string(CvoPlacement p);

struct ExperimentConfig {
  std::filesystem::path grid = "data/ieee14cdf.txt";
  std::optional<std::filesystem::path> scenario;  // solved case in the grid file otherwise
  std::optional<std::string> placement;           // bus list; per-command default
  std::optional<FrameConfig> config;              // both when unset
  std::optional<NumberFormat> format;             // both when unset
  std::optional<CvoPlacement> mode;               // both when unset
  std::optional<std::filesystem::path> links;     // ideal 1 ms links when unset
  std::size_t trials = 2500;
  std::uint64_t seed = 1;
  std::size_t overhead = 210;
  int rate = 50;
  std::size_t pmus = 3;              // bandwidth: PMUs at the node
  std::size_t channels_per_pmu = 2;  // phasor channels per PMU
  double noise = 0.0;                // relative phasor noise
  std::optional<std::filesystem::path> out;

  void validate() const;
};

struct BandwidthRow {
  FrameConfig config = FrameConfig::A;
  NumberFormat format = NumberFormat::fixed16;
  CvoPlacement placement = CvoPlacement::local;
  std::size_t frame_bytes = 0;
  std::size_t streams = 0;
  std::uint64_t bps = 0;
  double saving_pct = 0.0;  // of the (config, format) pair
};

std::vector<BandwidthRow> cmd_bandwidth(const ExperimentConfig& cfg);
void write_bandwidth_csv(std::ostream& os, const std::vector<BandwidthRow>& rows);
void print_bandwidth_table(std::ostream& os, const std::vector<BandwidthRow>& rows);

struct LatencyReport {
  CvoPlacement mode = CvoPlacement::local;
  std::vector<LatencyRecord> records;
  std::size_t complete = 0;
  double min_ms = 0.0, mean_ms = 0.0, max_ms = 0.0;
  double dep_50 = 0.0, dep_100 = 0.0, dep_500 = 0.0;  // percent
  std::map<std::string, LinkStats> link_stats;
};

/// Latency campaign for one mode. Defaults: placement "2", Config A float.
LatencyReport run_latency(const ExperimentConfig& cfg, CvoPlacement mode);
std::vector<LatencyReport> cmd_latency(const ExperimentConfig& cfg);
void write_latency_csv(std::ostream& os, const LatencyReport& r);
void write_cdf_csv(std::ostream& os, const LatencyReport& r);
void write_latency_summary_csv(std::ostream& os, const std::vector<LatencyReport>& reports);
void print_latency_table(std::ostream& os, const std::vector<LatencyReport>& reports);

struct SeReport {
  std::vector<BusId> buses;
  std::vector<Complex> estimate;  // first delivered set
  double residual_norm = 0.0;     // sqrt of the weighted objective, first set
  double mean_objective = 0.0;    // over all delivered sets
  double dof = 0.0;               // measurement rows - state dimension
  Eigen::Index rank = 0;
  std::size_t sets = 0;
  double mean_ms = 0.0, std_ms = 0.0;
  double max_abs_error = 0.0;  // vs scenario voltages, over all sets
};

/// State estimation on aggregates delivered through the pipeline. Defaults:
/// placement "2,6,7,9", Config A float, local. Throws UnobservableError when
/// the placement does not observe every bus.
SeReport cmd_se(const ExperimentConfig& cfg);
void write_estimate_csv(std::ostream& os, const SeReport& r);
void write_timing_csv(std::ostream& os, const SeReport& r);
void print_se_report(std::ostream& os, const SeReport& r);

/// True when `name` matches `filter`. Throws ValidationError for malformed input.
bool cmd_topics(const std::string& filter, const std::string& name);

/// Writes buses.csv and branches.csv into `out`.
void cmd_dump_grid(const ExperimentConfig& cfg, const std::filesystem::path& out);

/// Constant 1 ms links with the given per-message overhead.
NetworkConfig ideal_network(std::size_t overhead);

}  // namespace vpmu
