#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "vpmu/codec.hpp"
#include "vpmu/virtual_object.hpp"

namespace vpmu {

enum class CvoPlacement { local, remote };
enum class OutputMode { aggregated_frame, key_value };

struct ThresholdRule {
  std::string field;
  Comparator comparator = Comparator::gt;
  double bound = 0.0;
  std::string action_topic;
  std::string action_payload = "rate=50";
};

struct CvoConfig {
  std::string id;
  std::uint16_t idcode = 0;
  /// Source ids in aggregation order (VO ids or child CVO ids).
  std::vector<std::string> members;
  CvoPlacement placement = CvoPlacement::local;
  double wait_timeout = 0.04;  // seconds of simulation time
  OutputMode output_mode = OutputMode::aggregated_frame;
  std::vector<ThresholdRule> thresholds;
  std::optional<std::string> parent;
  /// Stream layout of each member; needed for fixed16 output and to fill in
  /// absent members of partial sets.
  std::map<std::string, FrameLayout> member_layouts;
};

using SourceRecord = std::variant<DataFrame, KeyValueRecord>;

Timestamp record_timestamp(const SourceRecord& r);

struct AlignedSet {
  Timestamp timestamp;
  std::map<std::string, SourceRecord> contributions;
  bool complete = false;
  std::vector<std::string> absent;
};

struct ThresholdAction {
  std::string topic;
  std::string payload;
  Timestamp timestamp;
};

struct Outbound {
  std::string destination;
  std::vector<std::uint8_t> payload;
  Timestamp timestamp;
  bool complete = true;
};

/// Concentrator: files member records by timestamp and emits one aligned set
/// per timestamp, complete when every member reported or partial once the
/// wait timeout has elapsed since the first arrival.
class Cvo {
 public:
  explicit Cvo(CvoConfig config);

  const CvoConfig& config() const noexcept { return cfg_; }
  const std::string& id() const noexcept { return cfg_.id; }
  const std::vector<std::string>& audit_log() const noexcept { return audit_; }
  std::size_t pending() const noexcept { return slots_.size(); }

  /// Files `record` from `source` at simulation time `now`; returns the set it
  /// completes, if any.
  std::optional<AlignedSet> ingest(const std::string& source, SourceRecord record, double now);
  /// Partial sets whose wait timeout has elapsed by `now`, oldest first.
  std::vector<AlignedSet> expire(double now);
  /// Earliest pending timeout, if any slot is open.
  std::optional<double> next_deadline() const;

  /// Rule actions for `a`: at most one per rule, fired when any valid
  /// contribution satisfies the rule.
  std::vector<ThresholdAction> check_thresholds(const AlignedSet& a) const;

  /// Frame with every member's blocks in member order. Requires a complete set.
  DataFrame compose_aggregate_frame(const AlignedSet& a) const;
  /// As compose_aggregate_frame, but absent members contribute blocks flagged
  /// invalid with zeroed values.
  DataFrame compose_frame(const AlignedSet& a) const;
  /// Layout of the composed frame.
  FrameLayout output_layout() const;

  /// Upstream payload for `a` per the configured output mode.
  Outbound forward(const AlignedSet& a) const;

 private:
  struct Slot {
    double first_arrival = 0.0;
    std::map<std::string, SourceRecord> contributions;
  };

  AlignedSet emit(std::int64_t key, Slot&& slot, bool complete);

  CvoConfig cfg_;
  std::set<std::string> member_set_;
  std::map<std::int64_t, Slot> slots_;
  std::set<std::int64_t> emitted_;
  std::vector<std::string> audit_;
};

/// Key-value document of an aligned set: `complete=0|1`, `soc`, `fracsec`, then
/// `<source>.<key>=<value>` for every contribution.
std::string format_aligned_set(const AlignedSet& a);

struct AlignedSetDocument {
  bool complete = false;
  Timestamp timestamp;
  std::vector<std::string> absent;
  std::map<std::string, double> values;  // `<source>.<key>`
};

AlignedSetDocument parse_aligned_set(std::string_view text);

/// Reporting rate requested by a `rate=<fps>` action payload.
std::optional<int> parse_rate_action(std::string_view payload);

}  // namespace vpmu
