#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "vpmu/rng.hpp"

namespace vpmu {

struct ConstantDelay {
  double d = 0.0;
};
struct UniformDelay {
  double a = 0.0;
  double b = 0.0;
};
/// shift + exp(N(mu, sigma^2)), seconds.
struct ShiftedLognormalDelay {
  double shift = 0.0;
  double mu = 0.0;
  double sigma = 0.0;
};

using DelayModel = std::variant<ConstantDelay, UniformDelay, ShiftedLognormalDelay>;

double sample_delay(const DelayModel& m, Rng& rng);
/// Analytic mean of the model, seconds.
double mean_delay(const DelayModel& m);

struct LinkModel {
  std::string name;
  DelayModel delay = ConstantDelay{};
  std::size_t per_message_overhead = 0;  // bytes
  double loss_probability = 0.0;
  bool fifo = true;
};

/// Links plus the processing constants of the simulated deployment.
struct NetworkConfig {
  std::map<std::string, LinkModel> links;
  double pmu_processing = 0.0;
  double cvo_processing = 0.0;
  std::optional<double> wait_timeout;

  const LinkModel& link(const std::string& name) const;
};

/// JSON document: {"links": {name: {"delay": {"model": ..}, "overhead": B,
/// "loss": p, "fifo": bool}}, "pmu_processing": s, "cvo_processing": s,
/// "wait_timeout": s}.
NetworkConfig parse_network_config(std::string_view json_text);
NetworkConfig load_network_config(const std::filesystem::path& path);

/// Discrete-event loop ordered by (time, insertion sequence).
class Simulator {
 public:
  using Action = std::function<void()>;

  double now() const noexcept { return now_; }
  void schedule(double at, Action action);
  void schedule_in(double delay, Action action) { schedule(now_ + delay, std::move(action)); }
  /// Runs events until the queue drains or the next event is after `until`.
  void run(std::optional<double> until = std::nullopt);
  std::size_t pending() const noexcept { return queue_.size(); }
  std::uint64_t executed() const noexcept { return executed_; }

  void log(std::string line);
  const std::vector<std::string>& event_log() const noexcept { return log_; }
  void enable_log(bool on) { logging_ = on; }

 private:
  struct Event {
    double time;
    std::uint64_t seq;
    Action action;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };

  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  double now_ = 0.0;
  std::uint64_t seq_ = 0;
  std::uint64_t executed_ = 0;
  bool logging_ = false;
  std::vector<std::string> log_;
};

struct Message {
  std::string src;
  std::string dst;
  std::vector<std::uint8_t> payload;
  double sent_at = 0.0;
  double origin = 0.0;  // timestamp of the frame the message carries, sim seconds
};

struct LinkStats {
  std::size_t sent = 0;
  std::size_t delivered = 0;
  std::size_t dropped = 0;
  std::size_t payload_bytes = 0;
  std::size_t wire_bytes = 0;  // payload + overhead of every sent message
};

/// One directed use of a link model with its own delay/loss stream and FIFO
/// state. Independent streams over the same model get separate channels.
class Channel {
 public:
  Channel(LinkModel model, std::uint64_t seed);

  const LinkModel& model() const noexcept { return model_; }
  const LinkStats& stats() const noexcept { return stats_; }

  /// Delivery time for `m`, or nothing when the message is lost. Does not
  /// schedule anything.
  std::optional<double> transmit(const Message& m);
  /// transmit() with the propagation delay already drawn.
  std::optional<double> transmit(const Message& m, double delay);

 private:
  void account(const Message& m);

  LinkModel model_;
  Rng rng_;
  double last_delivery_ = 0.0;
  bool any_delivered_ = false;
  LinkStats stats_;
};

using DeliveryHandler = std::function<void(const Message&)>;

/// Transmits `m` over `ch` and schedules `on_deliver` at its arrival time.
std::optional<double> send(Simulator& sim, Channel& ch, Message m, DeliveryHandler on_deliver);

/// streams * (frame + overhead) * rate * 8.
std::uint64_t stream_bandwidth(std::uint64_t frame_bytes, std::uint64_t rate, std::uint64_t overhead,
                               std::uint64_t streams);
/// Percentage of remote bandwidth saved by the local scheme, one decimal.
double bandwidth_saving(double local_bps, double remote_bps);

struct LatencyRecord {
  double frame_time = 0.0;  // seconds
  double receipt_time = 0.0;
  double latency() const { return receipt_time - frame_time; }
};

class EmpiricalCdf {
 public:
  explicit EmpiricalCdf(std::vector<double> samples);

  const std::vector<double>& sorted() const noexcept { return sorted_; }
  std::size_t size() const noexcept { return sorted_.size(); }
  /// Fraction of samples <= x.
  double operator()(double x) const;
  /// Smallest sample whose cumulative fraction reaches p, p in (0, 1].
  double quantile(double p) const;
  double min() const { return sorted_.front(); }
  double max() const { return sorted_.back(); }
  double mean() const { return mean_; }
  /// (value, cumulative fraction) for every sample.
  std::vector<std::pair<double, double>> points() const;

 private:
  std::vector<double> sorted_;
  double mean_ = 0.0;
};

EmpiricalCdf latency_cdf(const std::vector<LatencyRecord>& records);
/// Percentage of records whose latency is at most `threshold` seconds.
double dependability(const std::vector<LatencyRecord>& records, double threshold);

}  // namespace vpmu
