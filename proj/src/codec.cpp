#include "vpmu/codec.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <string>

#include "vpmu/error.hpp"

namespace vpmu {

namespace {

class Writer {
 public:
  explicit Writer(std::size_t reserve) { out_.reserve(reserve); }

  void u16(std::uint16_t v) {
    out_.push_back(static_cast<std::uint8_t>(v >> 8));
    out_.push_back(static_cast<std::uint8_t>(v));
  }
  void u32(std::uint32_t v) {
    u16(static_cast<std::uint16_t>(v >> 16));
    u16(static_cast<std::uint16_t>(v));
  }
  void i16(std::int16_t v) { u16(static_cast<std::uint16_t>(v)); }
  void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }

  std::vector<std::uint8_t>& bytes() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint16_t u16() {
    auto v = static_cast<std::uint16_t>((in_[pos_] << 8) | in_[pos_ + 1]);
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t hi = u16();
    return (hi << 16) | u16();
  }
  std::int16_t i16() { return static_cast<std::int16_t>(u16()); }
  double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

constexpr std::int16_t kFreqScaleMilliHz = 1;  // 1 count = 1 mHz
constexpr double kRocofCountsPerHzPerS = 100.0;

std::int16_t to_count(double v, const char* what) {
  const double r = std::nearbyint(v);
  if (!(std::abs(r) <= 32767.0))
    throw OverflowError(std::string(what) + " out of fixed16 range");
  return static_cast<std::int16_t>(r);
}

void check_frame_size(std::size_t size) {
  if (size > std::numeric_limits<std::uint16_t>::max())
    throw LengthError("frame of " + std::to_string(size) + " bytes exceeds FRAMESIZE capacity");
}

void check_shape(const DataFrame& f, const FrameLayout& layout) {
  if (f.blocks.empty()) throw ValidationError("data frame needs at least one block");
  if (layout.format != f.format) throw ValidationError("frame format differs from layout");
  if (layout.blocks.size() != f.blocks.size())
    throw ValidationError("frame block count differs from layout");
  for (std::size_t i = 0; i < f.blocks.size(); ++i)
    if (f.blocks[i].phasors.size() != layout.blocks[i].phasor_count())
      throw ValidationError("block " + std::to_string(i) + " phasor count differs from layout");
}

void check_timestamp(const Timestamp& t) {
  if (t.fracsec >= kTimeBase) throw ValidationError("fracsec out of range");
}

}  // namespace

Timestamp Timestamp::from_micros(std::int64_t us) {
  if (us < 0) throw ValidationError("negative timestamp");
  return {static_cast<std::uint32_t>(us / kTimeBase), static_cast<std::uint32_t>(us % kTimeBase)};
}

FrameLayout FrameLayout::uniform(std::size_t n_blocks, std::size_t n_phasors, NumberFormat format,
                                 double nominal) {
  FrameLayout l{format, {}};
  l.blocks.assign(n_blocks, BlockLayout{std::vector<double>(n_phasors, nominal)});
  return l;
}

FrameLayout FrameLayout::of(const DataFrame& f) {
  FrameLayout l{f.format, {}};
  for (const auto& b : f.blocks) l.blocks.push_back({std::vector<double>(b.phasors.size(), 1.0)});
  return l;
}

FrameLayout FrameLayout::concat(const FrameLayout& a, const FrameLayout& b) {
  if (a.format != b.format) throw ValidationError("cannot concatenate layouts of different formats");
  FrameLayout l = a;
  l.blocks.insert(l.blocks.end(), b.blocks.begin(), b.blocks.end());
  return l;
}

std::uint16_t crc_ccitt(std::span<const std::uint8_t> bytes) {
  // Shift-and-xor form of CCITT-FALSE (0x1021, init 0xFFFF).
  std::uint16_t crc = 0xFFFF;
  for (std::uint8_t b : bytes) {
    std::uint16_t temp = static_cast<std::uint16_t>((crc >> 8) ^ b);
    crc = static_cast<std::uint16_t>(crc << 8);
    std::uint16_t quick = static_cast<std::uint16_t>(temp ^ (temp >> 4));
    crc ^= quick;
    quick = static_cast<std::uint16_t>(quick << 5);
    crc ^= quick;
    quick = static_cast<std::uint16_t>(quick << 7);
    crc ^= quick;
  }
  return crc;
}

double fixed16_scale(double nominal) {
  if (!(nominal > 0.0)) throw ValidationError("nominal magnitude must be positive");
  return 1.5 * nominal / 32767.0;
}

std::int16_t quantize_fixed16(double x, double scale) {
  if (!(scale > 0.0)) throw ValidationError("fixed16 scale must be positive");
  if (!std::isfinite(x)) throw OverflowError("non-finite value");
  return to_count(x / scale, "value");
}

double dequantize_fixed16(std::int16_t q, double scale) { return q * scale; }

std::size_t data_frame_size(std::size_t n_blocks, std::size_t n_phasors_per_block,
                            NumberFormat format) {
  const std::size_t phasor = format == NumberFormat::fixed16 ? 4 : 8;
  const std::size_t scalar = format == NumberFormat::fixed16 ? 2 : 4;
  return kHeaderBytes + n_blocks * (2 + n_phasors_per_block * phasor + 2 * scalar) + kCrcBytes;
}

std::size_t data_frame_size(const FrameLayout& layout) {
  std::size_t size = kHeaderBytes + kCrcBytes;
  for (const auto& b : layout.blocks)
    size += data_frame_size(1, b.phasor_count(), layout.format) - kHeaderBytes - kCrcBytes;
  return size;
}

std::vector<std::uint8_t> encode_data_frame(const DataFrame& f, const FrameLayout& layout) {
  check_shape(f, layout);
  check_timestamp(f.timestamp);
  const std::size_t size = data_frame_size(layout);
  check_frame_size(size);

  Writer w(size);
  w.u16(kDataSync);
  w.u16(static_cast<std::uint16_t>(size));
  w.u16(f.idcode);
  w.u32(f.timestamp.soc);
  w.u32(f.timestamp.fracsec);
  for (std::size_t bi = 0; bi < f.blocks.size(); ++bi) {
    const auto& blk = f.blocks[bi];
    w.u16(blk.stat);
    if (f.format == NumberFormat::fixed16) {
      for (std::size_t k = 0; k < blk.phasors.size(); ++k) {
        const double scale = fixed16_scale(layout.blocks[bi].nominal[k]);
        w.i16(quantize_fixed16(blk.phasors[k].re, scale));
        w.i16(quantize_fixed16(blk.phasors[k].im, scale));
      }
      w.i16(to_count(blk.freq_dev / kFreqScaleMilliHz, "FREQ"));
      w.i16(to_count(blk.rocof * kRocofCountsPerHzPerS, "DFREQ"));
    } else {
      for (const auto& p : blk.phasors) {
        w.f32(p.re);
        w.f32(p.im);
      }
      w.f32(blk.freq_dev);
      w.f32(blk.rocof);
    }
  }
  w.u16(crc_ccitt(w.bytes()));
  return std::move(w.bytes());
}

std::vector<std::uint8_t> encode_data_frame(const DataFrame& f) {
  return encode_data_frame(f, FrameLayout::of(f));
}

DataFrame decode_data_frame(std::span<const std::uint8_t> bytes, const FrameLayout& layout) {
  if (bytes.size() < kHeaderBytes + kCrcBytes)
    throw LengthError("frame of " + std::to_string(bytes.size()) + " bytes is truncated");
  Reader r(bytes);
  if (r.u16() != kDataSync) throw FramingError("bad SYNC word for a data frame");
  const std::size_t declared = r.u16();
  if (declared != bytes.size())
    throw LengthError("FRAMESIZE " + std::to_string(declared) + " but received " +
                      std::to_string(bytes.size()) + " bytes");
  const auto body = bytes.first(bytes.size() - kCrcBytes);
  const std::uint16_t chk =
      static_cast<std::uint16_t>((bytes[bytes.size() - 2] << 8) | bytes[bytes.size() - 1]);
  if (crc_ccitt(body) != chk) throw IntegrityError("CRC mismatch");
  if (data_frame_size(layout) != bytes.size())
    throw LengthError("frame size does not match the stream layout");

  DataFrame f;
  f.format = layout.format;
  f.idcode = r.u16();
  f.timestamp.soc = r.u32();
  f.timestamp.fracsec = r.u32();
  if (f.timestamp.fracsec >= kTimeBase) throw FramingError("fracsec out of range");
  f.blocks.resize(layout.blocks.size());
  for (std::size_t bi = 0; bi < layout.blocks.size(); ++bi) {
    auto& blk = f.blocks[bi];
    blk.stat = r.u16();
    const auto n = layout.blocks[bi].phasor_count();
    blk.phasors.resize(n);
    if (layout.format == NumberFormat::fixed16) {
      for (std::size_t k = 0; k < n; ++k) {
        const double scale = fixed16_scale(layout.blocks[bi].nominal[k]);
        blk.phasors[k].re = dequantize_fixed16(r.i16(), scale);
        blk.phasors[k].im = dequantize_fixed16(r.i16(), scale);
      }
      blk.freq_dev = r.i16() * double(kFreqScaleMilliHz);
      blk.rocof = r.i16() / kRocofCountsPerHzPerS;
    } else {
      for (auto& p : blk.phasors) {
        p.re = r.f32();
        p.im = r.f32();
      }
      blk.freq_dev = r.f32();
      blk.rocof = r.f32();
    }
  }
  return f;
}

std::vector<std::uint8_t> encode_command(const CommandFrame& c) {
  if (c.command != Command::data_on && c.command != Command::data_off)
    throw UnknownCommandError("unsupported command code");
  check_timestamp(c.timestamp);
  constexpr std::size_t size = kHeaderBytes + 2 + kCrcBytes;
  Writer w(size);
  w.u16(kCommandSync);
  w.u16(static_cast<std::uint16_t>(size));
  w.u16(c.idcode);
  w.u32(c.timestamp.soc);
  w.u32(c.timestamp.fracsec);
  w.u16(static_cast<std::uint16_t>(c.command));
  w.u16(crc_ccitt(w.bytes()));
  return std::move(w.bytes());
}

CommandFrame decode_command(std::span<const std::uint8_t> bytes) {
  constexpr std::size_t size = kHeaderBytes + 2 + kCrcBytes;
  if (bytes.size() < 4) throw LengthError("command frame is truncated");
  Reader r(bytes);
  if (r.u16() != kCommandSync) throw FramingError("bad SYNC word for a command frame");
  const std::size_t declared = r.u16();
  if (declared != bytes.size() || declared != size)
    throw LengthError("command FRAMESIZE mismatch");
  const std::uint16_t chk = static_cast<std::uint16_t>((bytes[size - 2] << 8) | bytes[size - 1]);
  if (crc_ccitt(bytes.first(size - kCrcBytes)) != chk) throw IntegrityError("CRC mismatch");

  CommandFrame c;
  c.idcode = r.u16();
  c.timestamp.soc = r.u32();
  c.timestamp.fracsec = r.u32();
  const std::uint16_t code = r.u16();
  if (code != static_cast<std::uint16_t>(Command::data_on) &&
      code != static_cast<std::uint16_t>(Command::data_off))
    throw UnknownCommandError("unknown command code " + std::to_string(code));
  c.command = static_cast<Command>(code);
  return c;
}

}  // namespace vpmu
