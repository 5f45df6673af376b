#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace vpmu {

inline constexpr std::uint32_t kTimeBase = 1'000'000;
inline constexpr std::uint16_t kDataSync = 0xAA01;
inline constexpr std::uint16_t kCommandSync = 0xAA41;
inline constexpr std::size_t kHeaderBytes = 14;
inline constexpr std::size_t kCrcBytes = 2;

/// STAT bit raised on blocks a concentrator filled in for an absent source.
inline constexpr std::uint16_t kStatDataInvalid = 0x8000;

struct Timestamp {
  std::uint32_t soc = 0;
  std::uint32_t fracsec = 0;  // ticks of 1/kTimeBase s

  static Timestamp from_micros(std::int64_t us);
  std::int64_t micros() const { return std::int64_t{soc} * kTimeBase + fracsec; }
  double seconds() const { return static_cast<double>(soc) + fracsec / double(kTimeBase); }

  auto operator<=>(const Timestamp&) const = default;
};

struct Phasor {
  double re = 0.0;
  double im = 0.0;
  bool operator==(const Phasor&) const = default;
};

struct PmuBlock {
  std::uint16_t stat = 0;
  std::vector<Phasor> phasors;
  double freq_dev = 0.0;  // mHz from nominal
  double rocof = 0.0;     // Hz/s
  bool operator==(const PmuBlock&) const = default;
};

enum class NumberFormat { fixed16, float32 };

struct DataFrame {
  std::uint16_t idcode = 0;
  Timestamp timestamp;
  std::vector<PmuBlock> blocks;
  NumberFormat format = NumberFormat::float32;
  bool operator==(const DataFrame&) const = default;
};

enum class Command : std::uint16_t { data_off = 1, data_on = 2 };

struct CommandFrame {
  std::uint16_t idcode = 0;
  Timestamp timestamp;
  Command command = Command::data_on;
  bool operator==(const CommandFrame&) const = default;
};

/// Stream shape agreed out of band (it replaces a configuration frame): phasor
/// count per block and, for fixed16, each phasor channel's nominal magnitude.
struct BlockLayout {
  std::vector<double> nominal;
  std::size_t phasor_count() const { return nominal.size(); }
  bool operator==(const BlockLayout&) const = default;
};

struct FrameLayout {
  NumberFormat format = NumberFormat::float32;
  std::vector<BlockLayout> blocks;

  static FrameLayout uniform(std::size_t n_blocks, std::size_t n_phasors, NumberFormat format,
                             double nominal = 1.0);
  /// Layout matching `f` with unit nominals.
  static FrameLayout of(const DataFrame& f);
  /// Blocks of `a` followed by blocks of `b`.
  static FrameLayout concat(const FrameLayout& a, const FrameLayout& b);

  bool operator==(const FrameLayout&) const = default;
};

std::uint16_t crc_ccitt(std::span<const std::uint8_t> bytes);

/// Fixed-point scale giving 50% headroom over `nominal`.
double fixed16_scale(double nominal);
std::int16_t quantize_fixed16(double x, double scale);
double dequantize_fixed16(std::int16_t q, double scale);

std::size_t data_frame_size(std::size_t n_blocks, std::size_t n_phasors_per_block,
                            NumberFormat format);
/// Size of a frame with the given layout (blocks may differ in phasor count).
std::size_t data_frame_size(const FrameLayout& layout);

std::vector<std::uint8_t> encode_data_frame(const DataFrame& f, const FrameLayout& layout);
std::vector<std::uint8_t> encode_data_frame(const DataFrame& f);
DataFrame decode_data_frame(std::span<const std::uint8_t> bytes, const FrameLayout& layout);

std::vector<std::uint8_t> encode_command(const CommandFrame& c);
CommandFrame decode_command(std::span<const std::uint8_t> bytes);

}  // namespace vpmu
