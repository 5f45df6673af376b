#include "vpmu/cvo.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>
#include <string>

#include "vpmu/error.hpp"

namespace vpmu {

namespace {

std::optional<double> block_value(const PmuBlock& b, const std::string& key) {
  DataFrame view;
  view.blocks.push_back(b);
  if (key == "idcode" || key == "soc" || key == "fracsec") return std::nullopt;
  return field_value(view, key);
}

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Timestamp record_timestamp(const SourceRecord& r) {
  if (const auto* f = std::get_if<DataFrame>(&r)) return f->timestamp;
  const auto& kv = std::get<KeyValueRecord>(r);
  auto soc = kv.find("soc");
  auto frac = kv.find("fracsec");
  if (soc == kv.end() || frac == kv.end())
    throw ValidationError("key-value record without soc/fracsec");
  return {static_cast<std::uint32_t>(soc->second), static_cast<std::uint32_t>(frac->second)};
}

Cvo::Cvo(CvoConfig config) : cfg_(std::move(config)) {
  if (cfg_.members.empty()) throw ValidationError("CVO " + cfg_.id + " needs at least one member");
  if (!(cfg_.wait_timeout > 0.0)) throw ValidationError("CVO wait timeout must be positive");
  for (const auto& m : cfg_.members)
    if (!member_set_.insert(m).second) throw ValidationError("duplicate CVO member " + m);
}

std::optional<AlignedSet> Cvo::ingest(const std::string& source, SourceRecord record, double now) {
  if (!member_set_.count(source)) {
    audit_.push_back("rejected record from non-member " + source);
    return std::nullopt;
  }
  const auto key = record_timestamp(record).micros();
  if (emitted_.count(key)) {
    audit_.push_back("dropped late record from " + source + " at " + std::to_string(key) + " us");
    return std::nullopt;
  }
  auto [it, opened] = slots_.try_emplace(key);
  if (opened) it->second.first_arrival = now;
  if (!it->second.contributions.emplace(source, std::move(record)).second) {
    audit_.push_back("dropped duplicate record from " + source);
    return std::nullopt;
  }
  if (it->second.contributions.size() < cfg_.members.size()) return std::nullopt;
  Slot slot = std::move(it->second);
  slots_.erase(it);
  return emit(key, std::move(slot), true);
}

std::vector<AlignedSet> Cvo::expire(double now) {
  std::vector<AlignedSet> out;
  for (auto it = slots_.begin(); it != slots_.end();) {
    if (it->second.first_arrival + cfg_.wait_timeout <= now) {
      const auto key = it->first;
      Slot slot = std::move(it->second);
      it = slots_.erase(it);
      out.push_back(emit(key, std::move(slot), false));
    } else {
      ++it;
    }
  }
  return out;
}

std::optional<double> Cvo::next_deadline() const {
  std::optional<double> best;
  for (const auto& [k, s] : slots_) {
    const double d = s.first_arrival + cfg_.wait_timeout;
    if (!best || d < *best) best = d;
  }
  return best;
}

AlignedSet Cvo::emit(std::int64_t key, Slot&& slot, bool complete) {
  emitted_.insert(key);
  AlignedSet a;
  a.timestamp = Timestamp::from_micros(key);
  a.complete = complete;
  for (const auto& m : cfg_.members)
    if (!slot.contributions.count(m)) a.absent.push_back(m);
  a.contributions = std::move(slot.contributions);
  return a;
}

std::vector<ThresholdAction> Cvo::check_thresholds(const AlignedSet& a) const {
  std::vector<ThresholdAction> out;
  for (const auto& rule : cfg_.thresholds) {
    bool violated = false;
    for (const auto& [src, rec] : a.contributions) {
      if (const auto* f = std::get_if<DataFrame>(&rec)) {
        for (const auto& b : f->blocks) {
          if (b.stat & kStatDataInvalid) continue;
          if (auto v = block_value(b, rule.field); v && compare(*v, rule.comparator, rule.bound)) {
            violated = true;
            break;
          }
        }
      } else {
        const auto& kv = std::get<KeyValueRecord>(rec);
        if (auto it = kv.find(rule.field);
            it != kv.end() && compare(it->second, rule.comparator, rule.bound))
          violated = true;
      }
      if (violated) break;
    }
    if (violated) out.push_back({rule.action_topic, rule.action_payload, a.timestamp});
  }
  return out;
}

DataFrame Cvo::compose_aggregate_frame(const AlignedSet& a) const {
  if (!a.complete) throw ValidationError("cannot aggregate an incomplete set");
  return compose_frame(a);
}

DataFrame Cvo::compose_frame(const AlignedSet& a) const {
  DataFrame out;
  out.idcode = cfg_.idcode;
  out.timestamp = a.timestamp;
  std::optional<NumberFormat> format;
  for (const auto& m : cfg_.members) {
    auto it = a.contributions.find(m);
    if (it != a.contributions.end()) {
      const auto* f = std::get_if<DataFrame>(&it->second);
      if (!f) throw ValidationError("member " + m + " did not contribute a frame");
      if (format && *format != f->format) throw ValidationError("members disagree on number format");
      format = f->format;
      out.blocks.insert(out.blocks.end(), f->blocks.begin(), f->blocks.end());
      continue;
    }
    auto lay = cfg_.member_layouts.find(m);
    if (lay == cfg_.member_layouts.end())
      throw ValidationError("no layout to fill in absent member " + m);
    for (const auto& bl : lay->second.blocks) {
      PmuBlock filler;
      filler.stat = kStatDataInvalid;
      filler.phasors.assign(bl.phasor_count(), Phasor{});
      out.blocks.push_back(std::move(filler));
    }
    if (!format) format = lay->second.format;
  }
  out.format = format.value_or(NumberFormat::float32);
  return out;
}

FrameLayout Cvo::output_layout() const {
  FrameLayout out;
  bool first = true;
  for (const auto& m : cfg_.members) {
    auto lay = cfg_.member_layouts.find(m);
    if (lay == cfg_.member_layouts.end()) throw ValidationError("no layout for member " + m);
    out = first ? lay->second : FrameLayout::concat(out, lay->second);
    first = false;
  }
  return out;
}

Outbound Cvo::forward(const AlignedSet& a) const {
  Outbound o;
  o.destination = cfg_.parent.value_or("app");
  o.timestamp = a.timestamp;
  o.complete = a.complete;
  if (cfg_.output_mode == OutputMode::key_value) {
    const auto doc = format_aligned_set(a);
    o.payload.assign(doc.begin(), doc.end());
    return o;
  }
  const auto frame = compose_frame(a);
  o.payload = cfg_.member_layouts.size() == cfg_.members.size()
                  ? encode_data_frame(frame, output_layout())
                  : encode_data_frame(frame);
  return o;
}

std::string format_aligned_set(const AlignedSet& a) {
  std::string out = "complete=" + std::string(a.complete ? "1" : "0") + "\n";
  out += "soc=" + std::to_string(a.timestamp.soc) + "\n";
  out += "fracsec=" + std::to_string(a.timestamp.fracsec) + "\n";
  for (const auto& m : a.absent) out += "absent=" + m + "\n";
  for (const auto& [src, rec] : a.contributions) {
    if (const auto* f = std::get_if<DataFrame>(&rec)) {
      for (std::size_t bi = 0; bi < f->blocks.size(); ++bi) {
        DataFrame one{f->idcode, f->timestamp, {f->blocks[bi]}, f->format};
        const auto prefix = src + (f->blocks.size() > 1 ? "." + std::to_string(bi) : "") + ".";
        for (const auto& [k, v] : to_key_values(one)) out += prefix + k + "=" + number(v) + "\n";
      }
    } else {
      for (const auto& [k, v] : std::get<KeyValueRecord>(rec)) out += src + "." + k + "=" + number(v) + "\n";
    }
  }
  return out;
}

AlignedSetDocument parse_aligned_set(std::string_view text) {
  AlignedSetDocument doc;
  bool have_complete = false, have_soc = false, have_frac = false;
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    ++line_no;
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos || eq == 0) throw ParseError("aligned-set line without key: " + std::string(line), line_no);
    const std::string key(line.substr(0, eq));
    const std::string value(line.substr(eq + 1));
    if (key == "absent") {
      doc.absent.push_back(value);
      continue;
    }
    double v = 0;
    try {
      std::size_t used = 0;
      v = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception&) {
      throw ParseError("bad number for '" + key + "': " + value, line_no);
    }
    if (key == "complete") {
      doc.complete = v != 0.0;
      have_complete = true;
    } else if (key == "soc") {
      doc.timestamp.soc = static_cast<std::uint32_t>(v);
      have_soc = true;
    } else if (key == "fracsec") {
      doc.timestamp.fracsec = static_cast<std::uint32_t>(v);
      have_frac = true;
    } else {
      doc.values[key] = v;
    }
  }
  if (!have_complete || !have_soc || !have_frac) throw ParseError("aligned-set document missing header fields", line_no);
  return doc;
}

std::optional<int> parse_rate_action(std::string_view payload) {
  constexpr std::string_view prefix = "rate=";
  if (payload.substr(0, prefix.size()) != prefix) return std::nullopt;
  const std::string digits(payload.substr(prefix.size()));
  if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) return std::nullopt;
  return std::stoi(digits);
}

}  // namespace vpmu
