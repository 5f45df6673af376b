#include "vpmu/pmu.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "vpmu/error.hpp"

namespace vpmu {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) {
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
  }
  return out;
}

double number(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("bad number '" + s + "'", line);
  }
}

const Complex kA = std::polar(1.0, 2.0 * std::numbers::pi / 3.0);  // 120 degree operator

Complex to_complex(const Phasor& p) { return {p.re, p.im}; }
Phasor to_phasor(const Complex& c) { return {c.real(), c.imag()}; }

}  // namespace

FreqPoint Scenario::frequency_at(double t) const {
  FreqPoint out{t, 0.0, 0.0};
  for (const auto& p : freq_profile) {
    if (p.t > t) break;
    out.dev_mhz = p.dev_mhz;
    out.rocof = p.rocof;
  }
  return out;
}

const Complex& Scenario::voltage(BusId bus) const {
  auto it = bus_voltages.find(bus);
  if (it == bus_voltages.end())
    throw ValidationError("scenario has no voltage for bus " + std::to_string(bus));
  return it->second;
}

Scenario parse_scenario(std::string_view text) {
  Scenario s;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto f = split_csv(line);
    if (f[0] == "freq") {
      if (f.size() != 4) throw ParseError("freq record needs t,dev_mhz,rocof", lineno);
      s.freq_profile.push_back({number(f[1], lineno), number(f[2], lineno), number(f[3], lineno)});
    } else if (f[0] == "nominal_freq") {
      if (f.size() != 2) throw ParseError("nominal_freq record needs one value", lineno);
      s.nominal_freq = number(f[1], lineno);
    } else {
      if (f.size() != 3) throw ParseError("bus record needs bus,v_re,v_im", lineno);
      const double id = number(f[0], lineno);
      if (id <= 0 || id != std::floor(id)) throw ParseError("bad bus id '" + f[0] + "'", lineno);
      const auto bus = static_cast<BusId>(id);
      if (!s.bus_voltages.emplace(bus, Complex(number(f[1], lineno), number(f[2], lineno))).second)
        throw ParseError("duplicate voltage for bus " + f[0], lineno);
    }
  }
  std::stable_sort(s.freq_profile.begin(), s.freq_profile.end(),
                   [](const FreqPoint& a, const FreqPoint& b) { return a.t < b.t; });
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

Scenario scenario_from_grid(const GridModel& g) {
  Scenario s;
  for (const auto& b : g.buses())
    s.bus_voltages[b.id] = std::polar(b.v_mag, b.v_angle_deg * std::numbers::pi / 180.0);
  return s;
}

void validate_scenario(const Scenario& s, const std::set<BusId>& monitored) {
  for (BusId b : monitored) {
    const double mag = std::abs(s.voltage(b));
    if (!(mag > 0.5 && mag < 1.5))
      throw ValidationError("bus " + std::to_string(b) + " voltage magnitude outside (0.5, 1.5) pu");
  }
}

Phasor true_measurement(const GridModel& g, const Scenario& s, const Descriptor& d) {
  if (d.kind == Descriptor::Kind::voltage) return to_phasor(s.voltage(d.node));
  const auto& br = g.branches().at(d.branch);
  const auto y = branch_admittance(br);
  if (d.node == br.from)
    return to_phasor(y.series * (s.voltage(br.from) - s.voltage(br.to)) +
                     y.shunt_from * s.voltage(br.from));
  if (d.node == br.to)
    return to_phasor(y.series * (s.voltage(br.to) - s.voltage(br.from)) +
                     y.shunt_to * s.voltage(br.to));
  throw ValidationError("current descriptor node is not a branch endpoint");
}

std::size_t phasors_per_channel(PhasorSet set) {
  switch (set) {
    case PhasorSet::positive_sequence: return 1;
    case PhasorSet::phases: return 3;
    case PhasorSet::phases_and_sequences: return 6;
  }
  return 1;
}

Phasor positive_sequence(std::span<const Phasor> channel, PhasorSet set) {
  if (channel.size() != phasors_per_channel(set))
    throw ValidationError("channel phasor count does not match the phasor set");
  switch (set) {
    case PhasorSet::positive_sequence:
      return channel[0];
    case PhasorSet::phases:
      return to_phasor((to_complex(channel[0]) + kA * to_complex(channel[1]) +
                        kA * kA * to_complex(channel[2])) /
                       3.0);
    case PhasorSet::phases_and_sequences:
      return channel[3];
  }
  return channel[0];
}

bool is_supported_rate(int fps) { return fps == 10 || fps == 25 || fps == 50; }

EmulatedPmu::EmulatedPmu(std::uint16_t idcode, std::vector<Descriptor> channels, PmuOptions options)
    : idcode_(idcode), channels_(std::move(channels)), opts_(std::move(options)), rng_(opts_.seed) {
  if (!is_supported_rate(opts_.rate))
    throw ValidationError("unsupported reporting rate " + std::to_string(opts_.rate));
  if (!opts_.nominal.empty() && opts_.nominal.size() != channels_.size())
    throw ValidationError("one nominal magnitude per channel required");
  if (opts_.nominal.empty()) opts_.nominal.assign(channels_.size(), 1.0);
}

FrameLayout EmulatedPmu::layout() const {
  BlockLayout block;
  const auto per = phasors_per_channel(opts_.phasor_set);
  for (double nominal : opts_.nominal) block.nominal.insert(block.nominal.end(), per, nominal);
  return FrameLayout{opts_.format, {block}};
}

std::optional<DataFrame> EmulatedPmu::sample_frame(const Timestamp& t, const GridModel& g,
                                                   const Scenario& s, double scenario_time) {
  if (t.fracsec >= kTimeBase || !is_reporting_instant(t))
    throw ValidationError("timestamp is not on the " + std::to_string(opts_.rate) +
                          " fps reporting grid");
  if (!opts_.streaming) return std::nullopt;

  const auto& noise = opts_.noise;
  std::normal_distribution<double> unit(0.0, 1.0);
  auto jitter = [&](const Complex& truth, double reference) {
    if (noise.phasor_rel == 0.0) return truth;
    const double sd = noise.phasor_rel * reference;
    const double dre = sd * unit(rng_);
    const double dim = sd * unit(rng_);
    return truth + Complex(dre, dim);
  };

  PmuBlock block;
  for (const auto& d : channels_) {
    const Complex v = to_complex(true_measurement(g, s, d));
    const double ref = std::abs(v);
    switch (opts_.phasor_set) {
      case PhasorSet::positive_sequence:
        block.phasors.push_back(to_phasor(jitter(v, ref)));
        break;
      case PhasorSet::phases:
      case PhasorSet::phases_and_sequences:
        block.phasors.push_back(to_phasor(jitter(v, ref)));
        block.phasors.push_back(to_phasor(jitter(v * kA * kA, ref)));
        block.phasors.push_back(to_phasor(jitter(v * kA, ref)));
        if (opts_.phasor_set == PhasorSet::phases_and_sequences) {
          block.phasors.push_back(to_phasor(jitter(v, ref)));
          block.phasors.push_back(to_phasor(jitter(Complex{}, ref)));
          block.phasors.push_back(to_phasor(jitter(Complex{}, ref)));
        }
        break;
    }
  }
  const auto fp = s.frequency_at(scenario_time);
  block.freq_dev = fp.dev_mhz + (noise.freq_mhz > 0.0 ? noise.freq_mhz * unit(rng_) : 0.0);
  block.rocof = fp.rocof + (noise.rocof > 0.0 ? noise.rocof * unit(rng_) : 0.0);

  DataFrame f;
  f.idcode = idcode_;
  f.timestamp = t;
  f.format = opts_.format;
  f.blocks.push_back(std::move(block));
  return f;
}

void EmulatedPmu::handle_command(const CommandFrame& c) {
  if (c.idcode != idcode_) {
    audit_.push_back("ignored command for idcode " + std::to_string(c.idcode));
    return;
  }
  opts_.streaming = c.command == Command::data_on;
}

void EmulatedPmu::set_rate(int fps) {
  if (!is_supported_rate(fps)) throw ValidationError("unsupported reporting rate " + std::to_string(fps));
  opts_.rate = fps;
}

std::vector<double> rated_magnitudes(const GridModel& g, const Scenario& s,
                                     std::span<const Descriptor> channels) {
  std::vector<double> out;
  for (const auto& d : channels) {
    const auto p = true_measurement(g, s, d);
    out.push_back(std::max(1.0, std::ceil(2.0 * std::hypot(p.re, p.im)) / 2.0));
  }
  return out;
}

}  // namespace vpmu
