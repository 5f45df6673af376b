#include "vpmu/pipeline.hpp"

#include <cmath>
#include <memory>
#include <utility>

#include "vpmu/broker.hpp"
#include "vpmu/error.hpp"
#include "vpmu/rng.hpp"
#include "vpmu/virtual_object.hpp"

namespace vpmu {

namespace {

constexpr int kGridRate = 50;
constexpr std::int64_t kGridStepUs = kTimeBase / kGridRate;

std::string vo_id(std::uint16_t idcode) { return "vo-" + std::to_string(idcode); }
std::string node_cvo_id(BusId n) { return "cvo-node-" + std::to_string(n); }
const std::string kCloudCvo = "cvo-cloud";
const std::string kApp = "app";

std::string replace_node(std::string topic, const std::string& with) {
  const std::string key = "{node}";
  for (auto pos = topic.find(key); pos != std::string::npos; pos = topic.find(key, pos + with.size()))
    topic.replace(pos, key.size(), with);
  return topic;
}

class Runtime {
 public:
  explicit Runtime(const PipelineConfig& cfg) : cfg_(cfg) {
    if (!cfg.grid) throw ConfigError("pipeline needs a grid");
    if (!is_supported_rate(cfg.rate)) throw ConfigError("unsupported reporting rate");
    if (cfg.periods == 0) throw ConfigError("pipeline needs at least one reporting period");
    start_us_ = std::int64_t{cfg.start_soc} * kTimeBase;
    timeout_ = cfg.wait_timeout ? *cfg.wait_timeout
               : cfg.network.wait_timeout ? *cfg.network.wait_timeout
                                          : 2.0 / cfg.rate;
    sim_.enable_log(cfg.log_events);
    build_devices();
    build_cvos();
  }

  PipelineResult run() {
    for (std::size_t k = 0; k < cfg_.periods; ++k)
      sim_.schedule(static_cast<double>(k) / kGridRate, [this, k] { tick(k); });
    sim_.run();
    finish();
    return std::move(result_);
  }

 private:
  Channel make_channel(const std::string& link, const std::string& owner) {
    return Channel(cfg_.network.link(link), derive_seed(cfg_.seed, "link:" + link + ":" + owner, 0));
  }

  void build_devices() {
    result_.devices = cfg_.placement.devices();
    const auto pubsub = cfg_.network.links.count("pubsub") ? "pubsub" : "lan";
    for (std::size_t i = 0; i < result_.devices.size(); ++i) {
      const auto& dev = result_.devices[i];
      const auto idcode = static_cast<std::uint16_t>(i + 1);
      PmuOptions o;
      o.rate = cfg_.rate;
      o.format = cfg_.format;
      o.phasor_set = cfg_.phasor_set;
      o.noise = cfg_.noise;
      o.nominal = rated_magnitudes(*cfg_.grid, cfg_.scenario, dev.channels);
      o.seed = derive_seed(cfg_.seed, "pmu", idcode);
      pmus_.emplace_back(idcode, dev.channels, o);
      layouts_.push_back(pmus_.back().layout());
      const auto id = vo_id(idcode);
      vos_.emplace_back(id, idcode);
      vo_index_[id] = i;
      pmu_links_.push_back(make_channel("pmu_lan", id));
      const bool local = cfg_.mode == CvoPlacement::local;
      vo_links_.push_back(make_channel(local ? "lan" : "wan_stream", id));
      vo_target_.push_back(local ? node_cvo_id(dev.node) : kCloudCvo);
      pubsub_links_.push_back(make_channel(pubsub, id));
      broker_.subscribe(id, cfg_.topic_root + "/Node_" + std::to_string(dev.node) + "/#");
      broker_.subscribe(id, cfg_.topic_root + "/broadcast/#");
    }
  }

  std::vector<ThresholdRule> rules_for(const std::string& node_label) const {
    auto rules = cfg_.thresholds;
    for (auto& r : rules) r.action_topic = replace_node(r.action_topic, node_label);
    return rules;
  }

  void add_cvo(CvoConfig c, const std::string& uplink) {
    const auto id = c.id;
    uplinks_.emplace(id, make_channel(uplink, id));
    cvos_.emplace(id, Cvo(std::move(c)));
  }

  void build_cvos() {
    if (cfg_.mode == CvoPlacement::remote) {
      CvoConfig c;
      c.id = kCloudCvo;
      c.idcode = kCloudCvoIdcode;
      c.placement = CvoPlacement::remote;
      c.wait_timeout = timeout_;
      c.output_mode = cfg_.output_mode;
      c.thresholds = rules_for("broadcast");
      for (std::size_t i = 0; i < vos_.size(); ++i) {
        c.members.push_back(vos_[i].id());
        c.member_layouts[vos_[i].id()] = layouts_[i];
      }
      first_tier_.insert(c.id);
      add_cvo(std::move(c), "cloud");
      result_.app_layout = cvos_.at(kCloudCvo).output_layout();
      return;
    }

    const auto& nodes = cfg_.placement.monitored;
    const bool two_tier = nodes.size() > 1;
    CvoConfig root;
    root.id = kCloudCvo;
    root.idcode = kCloudCvoIdcode;
    root.placement = CvoPlacement::remote;
    root.wait_timeout = timeout_;
    root.output_mode = cfg_.output_mode;
    for (BusId n : nodes) {
      CvoConfig c;
      c.id = node_cvo_id(n);
      c.idcode = node_cvo_idcode(n);
      c.placement = CvoPlacement::local;
      c.wait_timeout = timeout_;
      c.output_mode = two_tier ? OutputMode::aggregated_frame : cfg_.output_mode;
      c.thresholds = rules_for("Node_" + std::to_string(n));
      for (std::size_t i = 0; i < vos_.size(); ++i) {
        if (result_.devices[i].node != n) continue;
        c.members.push_back(vos_[i].id());
        c.member_layouts[vos_[i].id()] = layouts_[i];
      }
      if (c.members.empty()) continue;
      if (two_tier) c.parent = kCloudCvo;
      const auto id = c.id;
      first_tier_.insert(id);
      add_cvo(std::move(c), "wan");
      if (two_tier) {
        root.members.push_back(id);
        root.member_layouts[id] = cvos_.at(id).output_layout();
      } else {
        result_.app_layout = cvos_.at(id).output_layout();
      }
    }
    if (two_tier) {
      add_cvo(std::move(root), "cloud");
      result_.app_layout = cvos_.at(kCloudCvo).output_layout();
    }
  }

  double sim_time(const Timestamp& t) const {
    return static_cast<double>(t.micros() - start_us_) / kTimeBase;
  }

  void tick(std::size_t k) {
    const auto ts = Timestamp::from_micros(start_us_ + static_cast<std::int64_t>(k) * kGridStepUs);
    const double t = static_cast<double>(k) / kGridRate;
    for (std::size_t i = 0; i < pmus_.size(); ++i) {
      auto& pmu = pmus_[i];
      if (!pmu.is_reporting_instant(ts)) continue;
      auto frame = pmu.sample_frame(ts, *cfg_.grid, cfg_.scenario, t);
      if (!frame) continue;
      Message m{pmu_name(i), vos_[i].id(), encode_data_frame(*frame, layouts_[i]), 0.0, t};
      sim_.schedule_in(cfg_.network.pmu_processing, [this, i, m = std::move(m)]() mutable {
        send(sim_, pmu_links_[i], std::move(m), [this, i](const Message& d) { on_vo(i, d); });
      });
    }
  }

  std::string pmu_name(std::size_t i) const { return "pmu-" + std::to_string(i + 1); }

  void on_vo(std::size_t i, const Message& m) {
    const auto frame = decode_data_frame(m.payload, layouts_[i]);
    if (!vos_[i].ingest(frame)) return;
    vos_[i].evaluate_triggers(frame);
    const auto target = vo_target_[i];
    Message up{vos_[i].id(), target, m.payload, 0.0, m.origin};
    send(sim_, vo_links_[i], std::move(up),
         [this, target](const Message& d) { on_cvo(target, d.src, d.payload); });
  }

  void on_cvo(const std::string& id, const std::string& src, const std::vector<std::uint8_t>& bytes) {
    auto& cvo = cvos_.at(id);
    const auto lay = cvo.config().member_layouts.find(src);
    if (lay == cvo.config().member_layouts.end()) throw ConfigError("no layout for " + src + " at " + id);
    const auto frame = decode_data_frame(bytes, lay->second);
    if (cfg_.capture && first_tier_.count(id)) {
      auto& cap = pending_captures_[{id, frame.timestamp.micros()}];
      const auto& members = cvo.config().members;
      if (cap.member_bytes.empty()) {
        cap.member_bytes.resize(members.size());
        cap.member_arrivals.assign(members.size(), std::nan(""));
      }
      for (std::size_t j = 0; j < members.size(); ++j) {
        if (members[j] != src || !cap.member_bytes[j].empty()) continue;
        cap.member_bytes[j] = bytes;
        cap.member_arrivals[j] = sim_.now();
      }
    }
    const auto before = cvo.pending();
    if (auto set = cvo.ingest(src, frame, sim_.now())) {
      emit(id, *set);
    } else if (cvo.pending() > before) {
      sim_.schedule_in(cvo.config().wait_timeout, [this, id] {
        for (auto& s : cvos_.at(id).expire(sim_.now())) emit(id, s);
      });
    }
  }

  void emit(const std::string& id, const AlignedSet& set) {
    auto& cvo = cvos_.at(id);
    auto& counters = result_.cvo_sets[id];
    ++(set.complete ? counters.complete : counters.partial);

    for (auto& action : cvo.check_thresholds(set)) {
      result_.actions.push_back(action);
      for (auto& d : broker_.publish(action.topic, action.payload)) {
        const auto i = vo_index_.at(d.subscriber);
        Message m{id, d.subscriber, std::vector<std::uint8_t>(d.payload.begin(), d.payload.end()), 0.0,
                  sim_time(action.timestamp)};
        send(sim_, pubsub_links_[i], std::move(m), [this, i](const Message& msg) { on_action(i, msg); });
      }
    }

    const auto out = cvo.forward(set);
    if (cfg_.capture && first_tier_.count(id)) {
      const auto key = std::make_pair(id, set.timestamp.micros());
      auto cap = std::move(pending_captures_[key]);
      pending_captures_.erase(key);
      cap.cvo = id;
      cap.timestamp = set.timestamp;
      cap.complete = set.complete;
      cap.emitted_at = sim_.now() + cfg_.network.cvo_processing;
      cap.output_bytes = out.payload;
      result_.captures.push_back(std::move(cap));
    }

    Message m{id, out.destination, out.payload, 0.0, sim_time(set.timestamp)};
    const bool complete = set.complete;
    const auto ts = set.timestamp;
    sim_.schedule_in(cfg_.network.cvo_processing, [this, id, m = std::move(m), complete, ts]() mutable {
      const auto dest = m.dst;
      send(sim_, uplinks_.at(id), std::move(m), [this, dest, complete, ts](const Message& d) {
        if (dest == kApp)
          on_app(d, complete, ts);
        else
          on_cvo(dest, d.src, d.payload);
      });
    });
  }

  void on_action(std::size_t i, const Message& m) {
    const auto rate = parse_rate_action(std::string_view(reinterpret_cast<const char*>(m.payload.data()), m.payload.size()));
    if (!rate) return;
    const int fps = *rate;
    if (fps == pmus_[i].rate()) return;
    pmus_[i].set_rate(fps);
    result_.rate_changes.push_back({pmus_[i].idcode(), sim_.now(), fps});
  }

  void on_app(const Message& m, bool complete, const Timestamp& ts) {
    AppDelivery d;
    d.timestamp = ts;
    d.receipt = sim_.now();
    d.complete = complete;
    if (cfg_.output_mode == OutputMode::key_value)
      d.document.assign(m.payload.begin(), m.payload.end());
    else
      d.frame = decode_data_frame(m.payload, result_.app_layout);
    result_.latencies.push_back({sim_time(ts), d.receipt});
    result_.deliveries.push_back(std::move(d));
  }

  void finish() {
    auto add = [this](const Channel& ch) {
      auto& s = result_.link_stats[ch.model().name];
      const auto& c = ch.stats();
      s.sent += c.sent;
      s.delivered += c.delivered;
      s.dropped += c.dropped;
      s.payload_bytes += c.payload_bytes;
      s.wire_bytes += c.wire_bytes;
    };
    for (const auto& c : pmu_links_) add(c);
    for (const auto& c : vo_links_) add(c);
    for (const auto& c : pubsub_links_)
      if (c.stats().sent) add(c);
    for (const auto& [id, c] : uplinks_) add(c);

    for (const auto& p : pmus_)
      for (const auto& a : p.audit_log()) result_.audit_log.push_back(pmu_name(p.idcode() - 1u) + ": " + a);
    for (const auto& v : vos_)
      for (const auto& a : v.audit_log()) result_.audit_log.push_back(v.id() + ": " + a);
    for (const auto& [id, c] : cvos_)
      for (const auto& a : c.audit_log()) result_.audit_log.push_back(id + ": " + a);
    result_.event_log = sim_.event_log();
    result_.simulated_seconds = sim_.now();
  }

  const PipelineConfig& cfg_;
  Simulator sim_;
  Broker broker_;
  std::int64_t start_us_ = 0;
  double timeout_ = 0.04;

  std::vector<EmulatedPmu> pmus_;
  std::vector<FrameLayout> layouts_;
  std::vector<VirtualObject> vos_;
  std::map<std::string, std::size_t> vo_index_;
  std::vector<Channel> pmu_links_;
  std::vector<Channel> vo_links_;
  std::vector<Channel> pubsub_links_;
  std::vector<std::string> vo_target_;

  std::map<std::string, Cvo> cvos_;
  std::map<std::string, Channel> uplinks_;
  std::set<std::string> first_tier_;
  std::map<std::pair<std::string, std::int64_t>, Capture> pending_captures_;

  PipelineResult result_;
};

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& cfg) {
  Runtime rt(cfg);
  return rt.run();
}

}  // namespace vpmu
