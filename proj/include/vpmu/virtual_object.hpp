#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vpmu/codec.hpp"

namespace vpmu {

/// Flat measurement record keyed by canonical names: idcode, soc, fracsec,
/// freq, rocof, phasor.<k>.re, phasor.<k>.im.
using KeyValueRecord = std::map<std::string, double>;

bool is_canonical_key(std::string_view key);
/// Value of a canonical key read from the first block of `f`.
std::optional<double> field_value(const DataFrame& f, std::string_view key);
KeyValueRecord to_key_values(const DataFrame& f);

/// Wire form: one `key=value` per line, numbers as round-trippable decimals.
std::string format_key_values(const KeyValueRecord& r);
KeyValueRecord parse_key_values(std::string_view text);

enum class Comparator { gt, lt, ge, le };

Comparator parse_comparator(std::string_view s);
std::string_view to_string(Comparator c);
bool compare(double value, Comparator c, double bound);

struct Trigger {
  enum class Kind { periodic, threshold };

  std::string id;
  Kind kind = Kind::threshold;
  // periodic
  double period = 0.0;  // seconds
  double anchor = 0.0;  // phase origin, seconds since epoch
  // threshold
  std::string field;
  Comparator comparator = Comparator::gt;
  double bound = 0.0;

  std::vector<std::string> selector;
  /// Resource path when it starts with '/', topic name otherwise.
  std::string destination;

  bool destination_is_topic() const { return destination.empty() || destination.front() != '/'; }
};

/// Trigger document: `key=value` lines (id, kind, period, anchor, field, op,
/// bound, fields, destination).
Trigger parse_trigger(std::string_view text);
std::string format_trigger(const Trigger& t);

struct PushMessage {
  std::string trigger_id;
  std::string destination;
  bool to_topic = false;
  Timestamp timestamp;
  KeyValueRecord record;
};

class VirtualObject {
 public:
  static constexpr std::size_t kDefaultCapacity = 600;

  VirtualObject(std::string id, std::uint16_t pmu_idcode,
                std::size_t capacity = kDefaultCapacity);

  const std::string& id() const noexcept { return id_; }
  std::uint16_t pmu_idcode() const noexcept { return idcode_; }
  std::size_t capacity() const noexcept { return capacity_; }
  const std::deque<DataFrame>& buffer() const noexcept { return buffer_; }
  const std::vector<Trigger>& triggers() const noexcept { return triggers_; }
  const std::vector<std::string>& audit_log() const noexcept { return audit_; }

  /// Files `f` in timestamp order. Returns false (and audits) for foreign
  /// idcodes and duplicate timestamps.
  bool ingest(const DataFrame& f);
  /// Pushes produced by the registered triggers for a newly ingested frame.
  std::vector<PushMessage> evaluate_triggers(const DataFrame& f);
  /// ingest followed by evaluate_triggers when the frame was accepted.
  std::vector<PushMessage> receive(const DataFrame& f);

  /// Selected fields of the newest frame, or their mean over the newest
  /// `window` frames.
  KeyValueRecord get_resource(const std::vector<std::string>& selector,
                              std::optional<std::size_t> window = std::nullopt) const;

  void register_trigger(Trigger t);
  bool remove_trigger(std::string_view id);

 private:
  struct PeriodicState {
    std::optional<std::int64_t> last_index;
  };

  std::string id_;
  std::uint16_t idcode_;
  std::size_t capacity_;
  std::deque<DataFrame> buffer_;
  std::vector<Trigger> triggers_;
  std::map<std::string, PeriodicState, std::less<>> periodic_;
  std::vector<std::string> audit_;
};

struct Request {
  std::string method;
  std::string target;  // path with optional query string
  std::string body;
};

struct Response {
  int status = 200;
  std::string body;
};

/// Resource interface of one VO:
///   GET    /vo/{id}/measurements?fields=a,b&window=N
///   POST   /vo/{id}/triggers            (trigger document)
///   DELETE /vo/{id}/triggers/{trigger}
Response serve(VirtualObject& vo, const Request& req);

}  // namespace vpmu
