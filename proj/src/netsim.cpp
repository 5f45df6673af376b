#include "vpmu/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "vpmu/error.hpp"

namespace vpmu {

double sample_delay(const DelayModel& m, Rng& rng) {
  return std::visit(
      [&](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, ConstantDelay>) {
          return d.d;
        } else if constexpr (std::is_same_v<T, UniformDelay>) {
          return std::uniform_real_distribution<double>(d.a, d.b)(rng);
        } else {
          return d.shift + std::lognormal_distribution<double>(d.mu, d.sigma)(rng);
        }
      },
      m);
}

double mean_delay(const DelayModel& m) {
  return std::visit(
      [](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, ConstantDelay>) {
          return d.d;
        } else if constexpr (std::is_same_v<T, UniformDelay>) {
          return 0.5 * (d.a + d.b);
        } else {
          return d.shift + std::exp(d.mu + 0.5 * d.sigma * d.sigma);
        }
      },
      m);
}

const LinkModel& NetworkConfig::link(const std::string& name) const {
  auto it = links.find(name);
  if (it == links.end()) throw ConfigError("network config has no link '" + name + "'");
  return it->second;
}

namespace {

DelayModel parse_delay(const nlohmann::json& j, const std::string& link) {
  const auto model = j.at("model").get<std::string>();
  if (model == "constant") {
    ConstantDelay d{j.at("d").get<double>()};
    if (d.d < 0) throw ConfigError("link " + link + ": negative delay");
    return d;
  }
  if (model == "uniform") {
    UniformDelay d{j.at("a").get<double>(), j.at("b").get<double>()};
    if (d.a < 0 || d.b < d.a) throw ConfigError("link " + link + ": need 0 <= a <= b");
    return d;
  }
  if (model == "shifted_lognormal") {
    ShiftedLognormalDelay d{j.at("shift").get<double>(), j.at("mu").get<double>(),
                            j.at("sigma").get<double>()};
    if (d.shift < 0 || d.sigma < 0) throw ConfigError("link " + link + ": need shift, sigma >= 0");
    return d;
  }
  throw ConfigError("link " + link + ": unknown delay model '" + model + "'");
}

}  // namespace

NetworkConfig parse_network_config(std::string_view json_text) {
  NetworkConfig cfg;
  try {
    const auto j = nlohmann::json::parse(json_text);
    for (const auto& [name, lj] : j.at("links").items()) {
      LinkModel l;
      l.name = name;
      l.delay = parse_delay(lj.at("delay"), name);
      const auto overhead = lj.value("overhead", 0.0);
      if (overhead < 0) throw ConfigError("link " + name + ": negative overhead");
      l.per_message_overhead = static_cast<std::size_t>(overhead);
      l.loss_probability = lj.value("loss", 0.0);
      if (l.loss_probability < 0 || l.loss_probability > 1)
        throw ConfigError("link " + name + ": loss probability outside [0, 1]");
      l.fifo = lj.value("fifo", true);
      cfg.links.emplace(name, std::move(l));
    }
    cfg.pmu_processing = j.value("pmu_processing", 0.0);
    cfg.cvo_processing = j.value("cvo_processing", 0.0);
    if (j.contains("wait_timeout")) cfg.wait_timeout = j.at("wait_timeout").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad network config: ") + e.what());
  }
  if (cfg.pmu_processing < 0 || cfg.cvo_processing < 0)
    throw ConfigError("processing delays must be non-negative");
  if (cfg.wait_timeout && !(*cfg.wait_timeout > 0)) throw ConfigError("wait_timeout must be positive");
  return cfg;
}

NetworkConfig load_network_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open link config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_network_config(ss.str());
}

void Simulator::schedule(double at, Action action) {
  if (at < now_) at = now_;
  queue_.push(Event{at, seq_++, std::move(action)});
}

void Simulator::run(std::optional<double> until) {
  while (!queue_.empty()) {
    if (until && queue_.top().time > *until) break;
    // priority_queue::top is const; the action is moved out before pop.
    Event ev = std::move(const_cast<Event&>(queue_.top()));
    queue_.pop();
    now_ = ev.time;
    ++executed_;
    ev.action();
  }
  if (until && now_ < *until) now_ = *until;
}

void Simulator::log(std::string line) {
  if (logging_) log_.push_back(std::move(line));
}

Channel::Channel(LinkModel model, std::uint64_t seed) : model_(std::move(model)), rng_(seed) {}

std::optional<double> Channel::transmit(const Message& m) {
  const bool lost = model_.loss_probability > 0.0 &&
                    std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < model_.loss_probability;
  const double delay = sample_delay(model_.delay, rng_);
  if (lost) {
    account(m);
    ++stats_.dropped;
    return std::nullopt;
  }
  return transmit(m, delay);
}

std::optional<double> Channel::transmit(const Message& m, double delay) {
  account(m);
  double at = m.sent_at + delay;
  if (model_.fifo && any_delivered_) at = std::max(at, last_delivery_);
  last_delivery_ = any_delivered_ ? std::max(last_delivery_, at) : at;
  any_delivered_ = true;
  ++stats_.delivered;
  return at;
}

void Channel::account(const Message& m) {
  ++stats_.sent;
  stats_.payload_bytes += m.payload.size();
  stats_.wire_bytes += m.payload.size() + model_.per_message_overhead;
}

std::optional<double> send(Simulator& sim, Channel& ch, Message m, DeliveryHandler on_deliver) {
  if (m.payload.empty()) throw ValidationError("message payload must not be empty");
  m.sent_at = sim.now();
  auto at = ch.transmit(m);
  if (!at) {
    sim.log("drop " + ch.model().name + " " + m.src + "->" + m.dst);
    return std::nullopt;
  }
  std::ostringstream line;
  line.precision(12);
  line << "send " << ch.model().name << ' ' << m.src << "->" << m.dst << " bytes=" << m.payload.size()
       << " t=" << m.sent_at << " at=" << *at;
  sim.log(line.str());
  sim.schedule(*at, [m = std::move(m), h = std::move(on_deliver)]() { h(m); });
  return at;
}

std::uint64_t stream_bandwidth(std::uint64_t frame_bytes, std::uint64_t rate, std::uint64_t overhead,
                               std::uint64_t streams) {
  return streams * (frame_bytes + overhead) * rate * 8;
}

double bandwidth_saving(double local_bps, double remote_bps) {
  if (!(remote_bps > 0.0)) throw ValidationError("remote bandwidth must be positive");
  return std::round(1000.0 * (1.0 - local_bps / remote_bps)) / 10.0;
}

EmpiricalCdf::EmpiricalCdf(std::vector<double> samples) : sorted_(std::move(samples)) {
  if (sorted_.empty()) throw ValidationError("empirical CDF of no samples");
  std::sort(sorted_.begin(), sorted_.end());
  mean_ = std::accumulate(sorted_.begin(), sorted_.end(), 0.0) / static_cast<double>(sorted_.size());
}

double EmpiricalCdf::operator()(double x) const {
  const auto n = std::upper_bound(sorted_.begin(), sorted_.end(), x) - sorted_.begin();
  return static_cast<double>(n) / static_cast<double>(sorted_.size());
}

double EmpiricalCdf::quantile(double p) const {
  if (!(p > 0.0 && p <= 1.0)) throw ValidationError("quantile level must be in (0, 1]");
  auto k = static_cast<std::size_t>(std::ceil(p * static_cast<double>(sorted_.size())));
  k = std::clamp<std::size_t>(k, 1, sorted_.size());
  return sorted_[k - 1];
}

std::vector<std::pair<double, double>> EmpiricalCdf::points() const {
  std::vector<std::pair<double, double>> out;
  out.reserve(sorted_.size());
  const double n = static_cast<double>(sorted_.size());
  for (std::size_t i = 0; i < sorted_.size(); ++i) out.emplace_back(sorted_[i], (i + 1) / n);
  return out;
}

EmpiricalCdf latency_cdf(const std::vector<LatencyRecord>& records) {
  if (records.empty()) throw ValidationError("no latency records");
  std::vector<double> lat;
  lat.reserve(records.size());
  for (const auto& r : records) lat.push_back(r.latency());
  return EmpiricalCdf(std::move(lat));
}

double dependability(const std::vector<LatencyRecord>& records, double threshold) {
  if (records.empty()) throw ValidationError("no latency records");
  const auto ok = std::count_if(records.begin(), records.end(),
                                [&](const LatencyRecord& r) { return r.latency() <= threshold; });
  return 100.0 * static_cast<double>(ok) / static_cast<double>(records.size());
}

}  // namespace vpmu
