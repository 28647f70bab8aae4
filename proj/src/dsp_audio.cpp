#include "acevc/dsp/audio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "acevc/error.hpp"

static_assert(std::endian::native == std::endian::little, "WAV and checkpoint I/O assume a little-endian host");

namespace acevc::dsp {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

template <typename T>
T read_le(const std::uint8_t* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

double decode_sample(const std::uint8_t* p, std::uint16_t format, std::uint16_t bits) {
  if (format == kFormatFloat) {
    if (bits == 32) return read_le<float>(p);
    return read_le<double>(p);
  }
  switch (bits) {
    case 8: return (static_cast<double>(*p) - 128.0) / 128.0;
    case 16: return read_le<std::int16_t>(p) / 32768.0;
    case 24: {
      std::int32_t v = p[0] | (p[1] << 8) | (p[2] << 16);
      if (v & 0x800000) v |= ~0xFFFFFF;
      return v / 8388608.0;
    }
    default: return read_le<std::int32_t>(p) / 2147483648.0;
  }
}

double bessel_i0(double x) { return std::cyl_bessel_i(0.0, x); }

}  // namespace

WavData read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read audio file '" + path + "'", ErrorCode::kIo);
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() < 12 || std::memcmp(data.data(), "RIFF", 4) != 0 || std::memcmp(data.data() + 8, "WAVE", 4) != 0)
    throw Error("'" + path + "' is not a RIFF/WAVE file", ErrorCode::kFormat);

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const std::uint8_t* payload = nullptr;
  std::size_t payload_size = 0;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= data.size()) {
    const std::uint8_t* chunk = data.data() + pos;
    const auto size = read_le<std::uint32_t>(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min<std::size_t>(size, data.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (avail < 16) throw Error("'" + path + "': malformed fmt chunk", ErrorCode::kFormat);
      format = read_le<std::uint16_t>(data.data() + body);
      channels = read_le<std::uint16_t>(data.data() + body + 2);
      rate = read_le<std::uint32_t>(data.data() + body + 4);
      bits = read_le<std::uint16_t>(data.data() + body + 14);
      if (format == kFormatExtensible && avail >= 26) format = read_le<std::uint16_t>(data.data() + body + 24);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      payload = data.data() + body;
      payload_size = avail;
    }
    pos = body + size + (size & 1u);
  }
  if (!have_fmt || !payload) throw Error("'" + path + "': missing fmt or data chunk", ErrorCode::kFormat);
  const bool pcm_ok = format == kFormatPcm && (bits == 8 || bits == 16 || bits == 24 || bits == 32);
  const bool float_ok = format == kFormatFloat && (bits == 32 || bits == 64);
  if (!pcm_ok && !float_ok)
    throw Error("'" + path + "': unsupported encoding (format " + std::to_string(format) + ", " +
                    std::to_string(bits) + " bits)",
                ErrorCode::kFormat);
  if (channels < 1) throw Error("'" + path + "': zero channels", ErrorCode::kFormat);

  const std::size_t stride = static_cast<std::size_t>(bits / 8) * channels;
  const auto frames = static_cast<Eigen::Index>(payload_size / stride);
  WavData out;
  out.sample_rate = static_cast<int>(rate);
  out.channels.resize(frames, channels);
  for (Eigen::Index f = 0; f < frames; ++f)
    for (std::uint16_t c = 0; c < channels; ++c)
      out.channels(f, c) = decode_sample(payload + static_cast<std::size_t>(f) * stride + c * (bits / 8u), format, bits);
  return out;
}

void write_wav(const std::string& path, const Waveform& w) {
  const auto n = static_cast<std::uint32_t>(w.samples.size());
  const std::uint32_t data_bytes = n * 2;
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  auto put = [&out](const void* p, std::size_t k) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + k);
  };
  auto u32 = [&put](std::uint32_t v) { put(&v, 4); };
  auto u16 = [&put](std::uint16_t v) { put(&v, 2); };
  put("RIFF", 4);
  u32(36 + data_bytes);
  put("WAVE", 4);
  put("fmt ", 4);
  u32(16);
  u16(kFormatPcm);
  u16(1);
  u32(static_cast<std::uint32_t>(w.sample_rate));
  u32(static_cast<std::uint32_t>(w.sample_rate) * 2);
  u16(2);
  u16(16);
  put("data", 4);
  u32(data_bytes);
  for (Eigen::Index i = 0; i < w.samples.size(); ++i) {
    const double s = std::clamp(w.samples(i), -1.0, 1.0);
    u16(static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(s * 32767.0))));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open '" + path + "' for writing", ErrorCode::kIo);
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error("failed writing '" + path + "'", ErrorCode::kIo);
}

Eigen::VectorXd resample_to_length(const Eigen::VectorXd& x, Eigen::Index length) {
  const Eigen::Index n = x.size();
  if (length <= 0 || n == 0) return Eigen::VectorXd::Zero(std::max<Eigen::Index>(length, 0));
  if (length == n) return x;
  const double step = static_cast<double>(n) / static_cast<double>(length);
  // Cutoff relative to the input Nyquist; lowered when decimating.
  const double cutoff = std::min(1.0, 1.0 / step) * 0.97;
  constexpr int kZeroCrossings = 24;
  constexpr double kBeta = 8.0;
  const double half_width = kZeroCrossings / cutoff;
  const double i0_beta = bessel_i0(kBeta);
  // Kernel tabulated over |d| in [0, half_width], linearly interpolated.
  constexpr int kTableDensity = 512;
  const int table_size = kZeroCrossings * kTableDensity + 2;
  std::vector<double> table(static_cast<std::size_t>(table_size));
  for (int i = 0; i < table_size; ++i) {
    const double d = std::min(1.0, static_cast<double>(i) / (table_size - 2)) * half_width;
    const double arg = M_PI * cutoff * d;
    const double sinc = arg < 1e-12 ? 1.0 : std::sin(arg) / arg;
    const double r = d / half_width;
    table[static_cast<std::size_t>(i)] = cutoff * sinc * bessel_i0(kBeta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0_beta;
  }
  const double table_scale = (table_size - 2) / half_width;
  Eigen::VectorXd y(length);
  for (Eigen::Index j = 0; j < length; ++j) {
    const double center = (static_cast<double>(j) + 0.5) * step - 0.5;
    const auto lo = static_cast<Eigen::Index>(std::ceil(center - half_width));
    const auto hi = static_cast<Eigen::Index>(std::floor(center + half_width));
    double acc = 0.0;
    for (Eigen::Index k = std::max<Eigen::Index>(lo, 0); k <= std::min(hi, n - 1); ++k) {
      const double pos = std::abs(static_cast<double>(k) - center) * table_scale;
      const auto i = static_cast<std::size_t>(pos);
      if (i + 1 >= table.size()) continue;
      const double frac = pos - static_cast<double>(i);
      acc += x(k) * (table[i] + frac * (table[i + 1] - table[i]));
    }
    y(j) = acc;
  }
  return y;
}

Eigen::VectorXd resample(const Eigen::VectorXd& x, int from_rate, int to_rate) {
  if (from_rate <= 0 || to_rate <= 0) throw Error("sample rates must be positive", ErrorCode::kInvalidInput);
  if (from_rate == to_rate) return x;
  const auto length = static_cast<Eigen::Index>(
      std::llround(static_cast<double>(x.size()) * to_rate / static_cast<double>(from_rate)));
  return resample_to_length(x, length);
}

Waveform ingest(const WavData& wav) {
  if (wav.channels.rows() == 0) throw Error("zero-length audio", ErrorCode::kInvalidInput);
  if (wav.channels.cols() > 2)
    throw Error("unsupported channel count " + std::to_string(wav.channels.cols()), ErrorCode::kFormat);
  if (wav.sample_rate < 8000 || wav.sample_rate > 48000)
    throw Error("unsupported sample rate " + std::to_string(wav.sample_rate) + " Hz (8-48 kHz)", ErrorCode::kFormat);
  Eigen::VectorXd mono = wav.channels.rowwise().mean();
  Waveform w;
  w.samples = resample(mono, wav.sample_rate, kSampleRate);
  w.sample_rate = kSampleRate;
  if (!w.samples.allFinite()) throw Error("audio contains non-finite samples", ErrorCode::kInvalidInput);
  const double peak = w.samples.cwiseAbs().maxCoeff();
  if (peak > 1.0) w.samples /= peak;
  return w;
}

Waveform ingest_audio(const std::string& path) {
  const WavData wav = read_wav(path);
  if (wav.channels.rows() == 0) throw Error("'" + path + "': zero-length audio", ErrorCode::kInvalidInput);
  return ingest(wav);
}

}  // namespace acevc::dsp
