#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vpmu/codec.hpp"
#include "vpmu/cvo.hpp"
#include "vpmu/grid.hpp"
#include "vpmu/netsim.hpp"
#include "vpmu/pmu.hpp"

namespace vpmu {

/// End-to-end deployment: PMUs -> VOs -> CVOs -> application.
///
/// Local mode: each monitored node has a CVO on its substation LAN that sends
/// one aggregate stream over the `wan` link; with several nodes a cloud CVO
/// aligns the node streams before the application. Remote mode: every VO
/// streams over its own `wan_stream` channel to a single cloud CVO.
/// Links used: pmu_lan, lan, wan, wan_stream, cloud (and pubsub if present,
/// else lan, for broker deliveries).
struct PipelineConfig {
  const GridModel* grid = nullptr;
  Scenario scenario;
  PmuPlacement placement;
  CvoPlacement mode = CvoPlacement::local;
  PhasorSet phasor_set = PhasorSet::phases;
  NumberFormat format = NumberFormat::float32;
  NoiseModel noise;
  int rate = 50;
  NetworkConfig network;
  /// Reporting instants on the 50 fps grid to simulate.
  std::size_t periods = 2500;
  std::uint64_t seed = 1;
  std::uint32_t start_soc = 1'600'000'000;
  /// Mode of the CVO that feeds the application; lower tiers send frames.
  OutputMode output_mode = OutputMode::aggregated_frame;
  /// Overrides the network config; two reporting intervals when neither is set.
  std::optional<double> wait_timeout;
  /// Rules installed on every CVO fed by VOs. "{node}" in the action topic is
  /// replaced by Node_<id> (local) or "broadcast" (remote).
  std::vector<ThresholdRule> thresholds;
  std::string topic_root = "REGION_1/ZONE_1";
  bool log_events = false;
  /// Keep member and output bytes of every set emitted by first-tier CVOs.
  bool capture = false;
};

struct AppDelivery {
  Timestamp timestamp;
  double receipt = 0.0;  // sim seconds
  bool complete = true;
  std::optional<DataFrame> frame;
  std::string document;  // key_value mode
};

struct CvoCounters {
  std::size_t complete = 0;
  std::size_t partial = 0;
};

struct Capture {
  std::string cvo;
  Timestamp timestamp;
  bool complete = true;
  std::vector<std::vector<std::uint8_t>> member_bytes;  // member order
  std::vector<double> member_arrivals;                  // sim seconds
  double emitted_at = 0.0;
  std::vector<std::uint8_t> output_bytes;
};

struct RateChange {
  std::uint16_t idcode = 0;
  double at = 0.0;
  int rate = 0;
};

struct PipelineResult {
  std::vector<PmuAssignment> devices;  // PMU i has idcode i + 1
  FrameLayout app_layout;
  std::vector<AppDelivery> deliveries;
  std::vector<LatencyRecord> latencies;
  std::map<std::string, LinkStats> link_stats;  // summed per link name
  std::map<std::string, CvoCounters> cvo_sets;
  std::vector<ThresholdAction> actions;
  std::vector<RateChange> rate_changes;
  std::vector<Capture> captures;
  std::vector<std::string> event_log;
  std::vector<std::string> audit_log;
  double simulated_seconds = 0.0;
};

PipelineResult run_pipeline(const PipelineConfig& cfg);

/// Idcode of the CVO serving node `n` in local mode, and of the cloud CVO.
inline std::uint16_t node_cvo_idcode(BusId n) { return static_cast<std::uint16_t>(1000 + n); }
inline constexpr std::uint16_t kCloudCvoIdcode = 900;

}  // namespace vpmu
