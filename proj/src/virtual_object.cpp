#include "vpmu/virtual_object.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "vpmu/error.hpp"

namespace vpmu {

namespace {

std::optional<std::size_t> phasor_index(std::string_view key, bool* imag) {
  constexpr std::string_view prefix = "phasor.";
  if (key.substr(0, prefix.size()) != prefix) return std::nullopt;
  key.remove_prefix(prefix.size());
  const auto dot = key.find('.');
  if (dot == std::string_view::npos || dot == 0) return std::nullopt;
  const auto part = key.substr(dot + 1);
  if (part != "re" && part != "im") return std::nullopt;
  std::size_t k = 0;
  auto [p, ec] = std::from_chars(key.data(), key.data() + dot, k);
  if (ec != std::errc() || p != key.data() + dot) return std::nullopt;
  if (imag) *imag = part == "im";
  return k;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) pos = s.size();
    out.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_number(const std::string& s) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("bad number '" + s + "'");
  }
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::vector<std::string> split_fields(std::string_view s) {
  std::vector<std::string> out;
  for (auto& f : split(s, ','))
    if (auto t = trim(f); !t.empty()) out.push_back(t);
  return out;
}

void validate_trigger(const Trigger& t) {
  if (t.id.empty()) throw ValidationError("trigger id required");
  if (t.kind == Trigger::Kind::periodic) {
    if (!(t.period > 0.0)) throw ValidationError("periodic trigger needs a positive period");
    if (!t.field.empty()) throw ValidationError("periodic trigger must not name a threshold field");
  } else {
    if (t.period != 0.0) throw ValidationError("threshold trigger must not set a period");
    if (!is_canonical_key(t.field)) throw ValidationError("threshold field '" + t.field + "' is not a canonical key");
    if (!std::isfinite(t.bound)) throw ValidationError("threshold bound must be finite");
  }
  for (const auto& k : t.selector)
    if (!is_canonical_key(k)) throw ValidationError("selector key '" + k + "' is not canonical");
  if (t.destination.empty()) throw ValidationError("trigger destination required");
}

}  // namespace

bool is_canonical_key(std::string_view key) {
  if (key == "idcode" || key == "soc" || key == "fracsec" || key == "freq" || key == "rocof")
    return true;
  return phasor_index(key, nullptr).has_value();
}

std::optional<double> field_value(const DataFrame& f, std::string_view key) {
  if (key == "idcode") return f.idcode;
  if (key == "soc") return f.timestamp.soc;
  if (key == "fracsec") return f.timestamp.fracsec;
  if (f.blocks.empty()) return std::nullopt;
  const auto& b = f.blocks.front();
  if (key == "freq") return b.freq_dev;
  if (key == "rocof") return b.rocof;
  bool imag = false;
  if (auto k = phasor_index(key, &imag); k && *k < b.phasors.size())
    return imag ? b.phasors[*k].im : b.phasors[*k].re;
  return std::nullopt;
}

KeyValueRecord to_key_values(const DataFrame& f) {
  KeyValueRecord r{{"idcode", f.idcode},
                   {"soc", f.timestamp.soc},
                   {"fracsec", f.timestamp.fracsec}};
  if (!f.blocks.empty()) {
    const auto& b = f.blocks.front();
    r["freq"] = b.freq_dev;
    r["rocof"] = b.rocof;
    for (std::size_t k = 0; k < b.phasors.size(); ++k) {
      r["phasor." + std::to_string(k) + ".re"] = b.phasors[k].re;
      r["phasor." + std::to_string(k) + ".im"] = b.phasors[k].im;
    }
  }
  return r;
}

std::string format_key_values(const KeyValueRecord& r) {
  std::string out;
  for (const auto& [k, v] : r) out += k + "=" + format_number(v) + "\n";
  return out;
}

KeyValueRecord parse_key_values(std::string_view text) {
  KeyValueRecord r;
  for (const auto& raw : split(text, '\n')) {
    auto line = trim(raw);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError("key-value line without '='");
    auto key = trim(line.substr(0, eq));
    if (!is_canonical_key(key)) throw SelectorError("unknown key '" + key + "'");
    r[key] = parse_number(trim(line.substr(eq + 1)));
  }
  return r;
}

Comparator parse_comparator(std::string_view s) {
  if (s == ">") return Comparator::gt;
  if (s == "<") return Comparator::lt;
  if (s == ">=") return Comparator::ge;
  if (s == "<=") return Comparator::le;
  throw ValidationError("unknown comparator '" + std::string(s) + "'");
}

std::string_view to_string(Comparator c) {
  switch (c) {
    case Comparator::gt: return ">";
    case Comparator::lt: return "<";
    case Comparator::ge: return ">=";
    case Comparator::le: return "<=";
  }
  return "?";
}

bool compare(double value, Comparator c, double bound) {
  switch (c) {
    case Comparator::gt: return value > bound;
    case Comparator::lt: return value < bound;
    case Comparator::ge: return value >= bound;
    case Comparator::le: return value <= bound;
  }
  return false;
}

Trigger parse_trigger(std::string_view text) {
  Trigger t;
  bool kind_set = false;
  for (const auto& raw : split(text, '\n')) {
    auto line = trim(raw);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError("trigger line without '='");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key == "id") {
      t.id = value;
    } else if (key == "kind") {
      if (value == "periodic") t.kind = Trigger::Kind::periodic;
      else if (value == "threshold") t.kind = Trigger::Kind::threshold;
      else throw ValidationError("unknown trigger kind '" + value + "'");
      kind_set = true;
    } else if (key == "period") {
      t.period = parse_number(value);
    } else if (key == "anchor") {
      t.anchor = parse_number(value);
    } else if (key == "field") {
      t.field = value;
    } else if (key == "op") {
      t.comparator = parse_comparator(value);
    } else if (key == "bound") {
      t.bound = parse_number(value);
    } else if (key == "fields") {
      t.selector = split_fields(value);
    } else if (key == "destination") {
      t.destination = value;
    } else {
      throw ValidationError("unknown trigger key '" + key + "'");
    }
  }
  if (!kind_set) throw ValidationError("trigger kind required");
  validate_trigger(t);
  return t;
}

std::string format_trigger(const Trigger& t) {
  std::string out = "id=" + t.id + "\n";
  if (t.kind == Trigger::Kind::periodic) {
    out += "kind=periodic\nperiod=" + format_number(t.period) + "\nanchor=" + format_number(t.anchor) + "\n";
  } else {
    out += "kind=threshold\nfield=" + t.field + "\nop=" + std::string(to_string(t.comparator)) +
           "\nbound=" + format_number(t.bound) + "\n";
  }
  if (!t.selector.empty()) {
    out += "fields=";
    for (std::size_t i = 0; i < t.selector.size(); ++i) out += (i ? "," : "") + t.selector[i];
    out += "\n";
  }
  out += "destination=" + t.destination + "\n";
  return out;
}

VirtualObject::VirtualObject(std::string id, std::uint16_t pmu_idcode, std::size_t capacity)
    : id_(std::move(id)), idcode_(pmu_idcode), capacity_(capacity) {
  if (capacity_ == 0) throw ValidationError("VO buffer capacity must be positive");
}

bool VirtualObject::ingest(const DataFrame& f) {
  if (f.idcode != idcode_) {
    audit_.push_back("rejected frame from idcode " + std::to_string(f.idcode));
    return false;
  }
  auto pos = std::lower_bound(buffer_.begin(), buffer_.end(), f.timestamp,
                              [](const DataFrame& a, const Timestamp& t) { return a.timestamp < t; });
  if (pos != buffer_.end() && pos->timestamp == f.timestamp) return false;
  if (buffer_.size() == capacity_ && pos == buffer_.begin()) return false;  // older than the window
  buffer_.insert(pos, f);
  while (buffer_.size() > capacity_) buffer_.pop_front();
  return true;
}

std::vector<PushMessage> VirtualObject::evaluate_triggers(const DataFrame& f) {
  std::vector<PushMessage> out;
  for (const auto& t : triggers_) {
    bool fire = false;
    if (t.kind == Trigger::Kind::periodic) {
      const auto period_us = std::llround(t.period * kTimeBase);
      const auto anchor_us = std::llround(t.anchor * kTimeBase);
      const auto elapsed = f.timestamp.micros() - anchor_us;
      const auto index = floor_div(elapsed, period_us);
      auto& st = periodic_[t.id];
      if (!st.last_index) {
        fire = elapsed % period_us == 0;
      } else {
        fire = index > *st.last_index;
      }
      st.last_index = st.last_index ? std::max(*st.last_index, index) : index;
    } else {
      if (auto v = field_value(f, t.field)) fire = compare(*v, t.comparator, t.bound);
    }
    if (!fire) continue;

    PushMessage m{t.id, t.destination, t.destination_is_topic(), f.timestamp, {}};
    if (t.selector.empty()) {
      m.record = to_key_values(f);
    } else {
      for (const auto& k : t.selector)
        if (auto v = field_value(f, k)) m.record[k] = *v;
    }
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<PushMessage> VirtualObject::receive(const DataFrame& f) {
  if (!ingest(f)) return {};
  return evaluate_triggers(f);
}

KeyValueRecord VirtualObject::get_resource(const std::vector<std::string>& selector,
                                           std::optional<std::size_t> window) const {
  for (const auto& k : selector)
    if (!is_canonical_key(k)) throw SelectorError("unknown key '" + k + "'");
  if (buffer_.empty()) throw NoDataError("VO " + id_ + " has no data");
  const auto& newest = buffer_.back();
  const std::size_t n = window.value_or(1);
  if (n == 0 || n > buffer_.size())
    throw SelectorError("window of " + std::to_string(n) + " exceeds the " +
                        std::to_string(buffer_.size()) + " buffered frames");

  KeyValueRecord r;
  for (const auto& k : selector) {
    if (!field_value(newest, k)) throw SelectorError("key '" + k + "' not present in the stream");
    if (!window || k == "idcode" || k == "soc" || k == "fracsec") {
      r[k] = *field_value(newest, k);
      continue;
    }
    double sum = 0.0;
    for (auto it = buffer_.end() - static_cast<std::ptrdiff_t>(n); it != buffer_.end(); ++it) {
      auto v = field_value(*it, k);
      if (!v) throw SelectorError("key '" + k + "' not present in every windowed frame");
      sum += *v;
    }
    r[k] = sum / static_cast<double>(n);
  }
  return r;
}

void VirtualObject::register_trigger(Trigger t) {
  validate_trigger(t);
  for (const auto& existing : triggers_)
    if (existing.id == t.id) throw ValidationError("duplicate trigger id '" + t.id + "'");
  periodic_.erase(t.id);
  triggers_.push_back(std::move(t));
}

bool VirtualObject::remove_trigger(std::string_view id) {
  auto it = std::find_if(triggers_.begin(), triggers_.end(), [&](const Trigger& t) { return t.id == id; });
  if (it == triggers_.end()) return false;
  if (auto p = periodic_.find(id); p != periodic_.end()) periodic_.erase(p);
  triggers_.erase(it);
  return true;
}

Response serve(VirtualObject& vo, const Request& req) {
  std::string_view target = req.target;
  std::string_view query;
  if (auto q = target.find('?'); q != std::string_view::npos) {
    query = target.substr(q + 1);
    target = target.substr(0, q);
  }
  const auto parts = split(target, '/');
  // "", "vo", id, resource[, trigger]
  if (parts.size() < 4 || !parts[0].empty() || parts[1] != "vo") return {404, "no such resource\n"};
  if (parts[2] != vo.id()) return {404, "unknown VO '" + parts[2] + "'\n"};

  if (parts[3] == "measurements" && parts.size() == 4) {
    if (req.method != "GET") return {405, "method not allowed\n"};
    std::vector<std::string> fields;
    std::optional<std::size_t> window;
    for (const auto& kv : split(query, '&')) {
      if (kv.empty()) continue;
      const auto eq = kv.find('=');
      const auto key = kv.substr(0, eq);
      const auto value = eq == std::string::npos ? std::string() : kv.substr(eq + 1);
      if (key == "fields") {
        fields = split_fields(value);
      } else if (key == "window") {
        std::size_t n = 0;
        auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), n);
        if (ec != std::errc() || p != value.data() + value.size())
          return {400, "bad window '" + value + "'\n"};
        window = n;
      } else {
        return {400, "unknown query parameter '" + key + "'\n"};
      }
    }
    try {
      if (fields.empty()) {
        if (vo.buffer().empty()) throw NoDataError("no data");
        for (const auto& [k, v] : to_key_values(vo.buffer().back())) fields.push_back(k);
      }
      return {200, format_key_values(vo.get_resource(fields, window))};
    } catch (const NoDataError& e) {
      return {503, std::string(e.what()) + "\n"};
    } catch (const SelectorError& e) {
      return {400, std::string(e.what()) + "\n"};
    }
  }

  if (parts[3] == "triggers" && parts.size() == 4) {
    if (req.method != "POST") return {405, "method not allowed\n"};
    try {
      auto t = parse_trigger(req.body);
      for (const auto& existing : vo.triggers())
        if (existing.id == t.id) return {409, "duplicate trigger id '" + t.id + "'\n"};
      const auto id = t.id;
      vo.register_trigger(std::move(t));
      return {201, id + "\n"};
    } catch (const ValidationError& e) {
      return {400, std::string(e.what()) + "\n"};
    }
  }

  if (parts[3] == "triggers" && parts.size() == 5) {
    if (req.method != "DELETE") return {405, "method not allowed\n"};
    if (!vo.remove_trigger(parts[4])) return {404, "unknown trigger '" + parts[4] + "'\n"};
    return {204, {}};
  }
  return {404, "no such resource\n"};
}

}  // namespace vpmu
