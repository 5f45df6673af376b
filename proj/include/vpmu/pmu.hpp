#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vpmu/codec.hpp"
#include "vpmu/grid.hpp"
#include "vpmu/rng.hpp"

namespace vpmu {

struct FreqPoint {
  double t = 0.0;  // seconds since scenario start
  double dev_mhz = 0.0;
  double rocof = 0.0;
};

/// Pre-stored operating point. Frequency follows the profile as a step
/// function: the latest point with time <= t applies.
struct Scenario {
  std::map<BusId, Complex> bus_voltages;
  double nominal_freq = 50.0;
  std::vector<FreqPoint> freq_profile;

  FreqPoint frequency_at(double t) const;
  const Complex& voltage(BusId bus) const;
};

/// Lines `bus,v_re,v_im` and `freq,t,dev_mhz,rocof`; `#` starts a comment.
Scenario parse_scenario(std::string_view text);
Scenario load_scenario(const std::filesystem::path& path);
/// Scenario holding the solved voltages stored in the grid file.
Scenario scenario_from_grid(const GridModel& g);
/// Checks every monitored bus has a voltage in (0.5, 1.5) pu.
void validate_scenario(const Scenario& s, const std::set<BusId>& monitored);

/// Noise-free value of a descriptor under the scenario.
Phasor true_measurement(const GridModel& g, const Scenario& s, const Descriptor& d);

/// How each measured quantity is reported: its positive-sequence phasor only,
/// the three phase phasors (balanced), or the phases followed by positive,
/// negative and zero sequence.
enum class PhasorSet { positive_sequence, phases, phases_and_sequences };

std::size_t phasors_per_channel(PhasorSet set);
/// Recovers the positive-sequence phasor of one channel from its reported phasors.
Phasor positive_sequence(std::span<const Phasor> channel, PhasorSet set);

/// Per-frame zero-mean Gaussian noise. Phasor deviation is relative to the
/// channel's true magnitude and applies to each rectangular component.
struct NoiseModel {
  double phasor_rel = 0.0;
  double freq_mhz = 0.0;
  double rocof = 0.0;
};

bool is_supported_rate(int fps);

struct PmuOptions {
  int rate = 50;
  NumberFormat format = NumberFormat::float32;
  PhasorSet phasor_set = PhasorSet::positive_sequence;
  NoiseModel noise;
  bool streaming = true;
  /// Per channel nominal magnitudes for fixed16 scaling; unit when empty.
  std::vector<double> nominal;
  std::uint64_t seed = 0;
};

class EmulatedPmu {
 public:
  EmulatedPmu(std::uint16_t idcode, std::vector<Descriptor> channels, PmuOptions options = {});

  std::uint16_t idcode() const noexcept { return idcode_; }
  const std::vector<Descriptor>& channels() const noexcept { return channels_; }
  int rate() const noexcept { return opts_.rate; }
  bool streaming() const noexcept { return opts_.streaming; }
  NumberFormat format() const noexcept { return opts_.format; }
  PhasorSet phasor_set() const noexcept { return opts_.phasor_set; }
  const NoiseModel& noise() const noexcept { return opts_.noise; }
  const std::vector<std::string>& audit_log() const noexcept { return audit_; }

  FrameLayout layout() const;
  /// Fracsec spacing between consecutive reports.
  std::uint32_t report_interval_us() const { return kTimeBase / static_cast<std::uint32_t>(opts_.rate); }
  bool is_reporting_instant(const Timestamp& t) const {
    return t.fracsec % report_interval_us() == 0;
  }

  /// One frame for reporting instant `t`, or nothing while streaming is off.
  /// `scenario_time` locates `t` on the scenario's frequency profile.
  std::optional<DataFrame> sample_frame(const Timestamp& t, const GridModel& g, const Scenario& s,
                                        double scenario_time);
  std::optional<DataFrame> sample_frame(const Timestamp& t, const GridModel& g, const Scenario& s) {
    return sample_frame(t, g, s, t.seconds());
  }

  void handle_command(const CommandFrame& c);
  void set_rate(int fps);

 private:
  std::uint16_t idcode_;
  std::vector<Descriptor> channels_;
  PmuOptions opts_;
  Rng rng_;
  std::vector<std::string> audit_;
};

/// Rated magnitude for fixed16 scaling: the true magnitude rounded up to the
/// next 0.5 pu, never below 1 pu.
std::vector<double> rated_magnitudes(const GridModel& g, const Scenario& s,
                                     std::span<const Descriptor> channels);

}  // namespace vpmu
