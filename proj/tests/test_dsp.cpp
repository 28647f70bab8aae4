#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "acevc/dsp/audio.hpp"
#include "acevc/dsp/pitch.hpp"
#include "acevc/dsp/spectral.hpp"
#include "acevc/error.hpp"
#include "acevc/random.hpp"

using namespace acevc;
using namespace acevc::dsp;

namespace {

Waveform sine(double hz, double seconds, double amp = 0.5) {
  Waveform w;
  w.samples.resize(static_cast<Eigen::Index>(std::llround(seconds * kSampleRate)));
  for (Eigen::Index i = 0; i < w.samples.size(); ++i) w.samples(i) = amp * std::sin(2.0 * M_PI * hz * i / kSampleRate);
  return w;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("acevc_test_dsp_" + name)).string();
}

// Minimal independent 16-bit PCM writer for interleaved channels.
void write_pcm16(const std::string& path, const std::vector<std::vector<double>>& channels, int rate) {
  const std::uint16_t nch = static_cast<std::uint16_t>(channels.size());
  const std::uint32_t frames = channels.empty() ? 0 : static_cast<std::uint32_t>(channels[0].size());
  std::ofstream f(path, std::ios::binary);
  auto u32 = [&f](std::uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
  auto u16 = [&f](std::uint16_t v) { f.write(reinterpret_cast<const char*>(&v), 2); };
  f.write("RIFF", 4);
  u32(36 + frames * nch * 2);
  f.write("WAVEfmt ", 8);
  u32(16);
  u16(1);
  u16(nch);
  u32(static_cast<std::uint32_t>(rate));
  u32(static_cast<std::uint32_t>(rate) * nch * 2);
  u16(nch * 2);
  u16(16);
  f.write("data", 4);
  u32(frames * nch * 2);
  for (std::uint32_t i = 0; i < frames; ++i)
    for (const auto& ch : channels) u16(static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(ch[i] * 32767))));
}

double voiced_max_rel_error(const PitchContour& p, double expected) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < p.f0.size(); ++i)
    if (p.f0(i) > 0.0) worst = std::max(worst, std::abs(p.f0(i) - expected) / expected);
  return worst;
}

// Slaney mel scale written out independently of the library.
double oracle_mel_to_hz(double mel) {
  return mel < 15.0 ? mel * 200.0 / 3.0 : 1000.0 * std::exp((mel - 15.0) * std::log(6.4) / 27.0);
}
double oracle_hz_to_mel(double hz) {
  return hz < 1000.0 ? hz * 3.0 / 200.0 : 15.0 + std::log(hz / 1000.0) * 27.0 / std::log(6.4);
}

}  // namespace

TEST_CASE("ingest_audio resamples and downmixes") {
  const std::string mono = temp_path("mono.wav");
  std::vector<double> one_second(22050);
  for (std::size_t i = 0; i < one_second.size(); ++i) one_second[i] = 0.3 * std::sin(2 * M_PI * 300 * i / 22050.0);
  write_pcm16(mono, {one_second}, 22050);
  CHECK(ingest_audio(mono).samples.size() == 22050);

  const std::string stereo = temp_path("stereo.wav");
  std::vector<double> left(44100), right(44100);
  for (std::size_t i = 0; i < left.size(); ++i) {
    left[i] = 0.4 * std::sin(2 * M_PI * 200 * i / 44100.0);
    right[i] = 0.2 * std::sin(2 * M_PI * 200 * i / 44100.0);
  }
  write_pcm16(stereo, {left, right}, 44100);
  const Waveform w = ingest_audio(stereo);
  CHECK(w.samples.size() == 22050);
  CHECK(w.sample_rate == 22050);
  // Channel average of a 0.4 and 0.2 amplitude sine.
  CHECK(w.samples.segment(1000, 20000).cwiseAbs().maxCoeff() == doctest::Approx(0.3).epsilon(0.01));

  const std::string empty = temp_path("empty.wav");
  write_pcm16(empty, {std::vector<double>{}}, 22050);
  CHECK_THROWS_WITH(ingest_audio(empty), doctest::Contains("zero-length audio"));
  CHECK_THROWS_AS(ingest_audio(temp_path("does_not_exist.wav")), Error);

  const std::string junk = temp_path("junk.wav");
  std::ofstream(junk) << "definitely not audio";
  CHECK_THROWS_AS(ingest_audio(junk), Error);
}

TEST_CASE("write_wav round trip within 16-bit quantization") {
  const std::string path = temp_path("roundtrip.wav");
  const Waveform w = sine(220.0, 0.25);
  write_wav(path, w);
  const Waveform back = ingest_audio(path);
  REQUIRE(back.samples.size() == w.samples.size());
  CHECK((back.samples - w.samples).cwiseAbs().maxCoeff() < 1.0 / 32767.0);
}

TEST_CASE("mel_spectrogram framing and silence") {
  const Waveform w = sine(220.0, 1.0);
  const MelSpectrogram m = mel_spectrogram(w);
  CHECK(m.frames.rows() == 87);
  CHECK(m.frames.cols() == 80);

  Waveform silence;
  silence.samples = Eigen::VectorXd::Zero(4096);
  const MelSpectrogram s = mel_spectrogram(silence);
  CHECK(s.frames.rows() == 16);
  CHECK((s.frames.array() == std::log(kLogFloor)).all());

  Waveform short_w;
  short_w.samples = Eigen::VectorXd::Zero(1000);
  CHECK_THROWS_AS(mel_spectrogram(short_w), Error);
}

TEST_CASE("mel_spectrogram is deterministic") {
  const Waveform w = sine(330.0, 0.5);
  const MelSpectrogram a = mel_spectrogram(w), b = mel_spectrogram(w);
  CHECK(a.frames == b.frames);
}

TEST_CASE("220 Hz sine peaks in the band centred nearest 220 Hz") {
  // Band centers: equally spaced points on the mel axis between 0 and 8 kHz.
  const double top = oracle_hz_to_mel(8000.0);
  int nearest = -1;
  double best = 1e9;
  for (int m = 0; m < 80; ++m) {
    const double center = oracle_mel_to_hz(top * (m + 1) / 81.0);
    if (std::abs(center - 220.0) < best) {
      best = std::abs(center - 220.0);
      nearest = m;
    }
  }
  REQUIRE(nearest == 5);  // frozen: centers 186.2 Hz (4), 223.4 Hz (5), 260.7 Hz (6)

  const MelSpectrogram m = mel_spectrogram(sine(220.0, 1.0));
  Eigen::Index arg;
  m.frames.row(40).maxCoeff(&arg);
  CHECK(arg == nearest);
}

TEST_CASE("filterbank matches the Slaney scale") {
  for (double hz : {0.0, 100.0, 999.0, 1000.0, 4000.0, 8000.0}) {
    CHECK(hz_to_mel(hz) == doctest::Approx(oracle_hz_to_mel(hz)).epsilon(1e-12));
    CHECK(mel_to_hz(hz_to_mel(hz)) == doctest::Approx(hz).epsilon(1e-12));
  }
  const Eigen::MatrixXd& bank = mel_filterbank();
  CHECK(bank.rows() == 80);
  CHECK(bank.cols() == 513);
  CHECK((bank.array() >= 0.0).all());
  // Every band receives some weight.
  CHECK((bank.rowwise().sum().array() > 0.0).all());
}

TEST_CASE("yin_pitch on analytic sinusoids") {
  for (double hz : {220.0, 440.0}) {
    const PitchContour p = yin_pitch(sine(hz, 1.0));
    CHECK(p.voiced_count() > 80);
    CHECK(voiced_max_rel_error(p, hz) <= 0.01);
  }
  Waveform silence;
  silence.samples = Eigen::VectorXd::Zero(22050);
  CHECK(yin_pitch(silence).f0.isZero());
}

TEST_CASE("yin length alignment with mel frames") {
  Rng rng(3);
  for (int n : {1024, 1025, 4000, 22050, 30001}) {
    Waveform w;
    w.samples.resize(n);
    for (int i = 0; i < n; ++i) w.samples(i) = rng.uniform(-0.5, 0.5);
    CHECK(yin_pitch(w).size() == mel_spectrogram(w).size());
  }
}

TEST_CASE("yin octave safety on 80-500 Hz sines") {
  for (double hz = 80.0; hz <= 500.0; hz += 35.0) {
    const PitchContour p = yin_pitch(sine(hz, 0.5));
    CHECK(voiced_max_rel_error(p, hz) <= 0.05);
  }
}

TEST_CASE("pitch_shift scales f0 and preserves length") {
  const Waveform base = sine(220.0, 1.0);
  const Waveform up = pitch_shift(base, 12.0);
  CHECK(up.samples.size() == base.samples.size());
  CHECK(yin_pitch(up).voiced_mean() == doctest::Approx(440.0).epsilon(0.02));

  const Waveform two = pitch_shift(base, 2.0);
  CHECK(two.samples.size() == base.samples.size());
  CHECK(yin_pitch(two).voiced_mean() == doctest::Approx(220.0 * std::pow(2.0, 2.0 / 12.0)).epsilon(0.02));

  const PitchContour same = yin_pitch(pitch_shift(base, 0.0));
  const PitchContour orig = yin_pitch(base);
  for (Eigen::Index i = 0; i < orig.size(); ++i)
    if (orig.f0(i) > 0) CHECK(same.f0(i) == doctest::Approx(orig.f0(i)).epsilon(0.005));

  CHECK_THROWS_AS(pitch_shift(base, 13.0), Error);
  for (int n : {5000, 7777, 22051}) {
    Waveform w = sine(150.0, static_cast<double>(n) / kSampleRate);
    CHECK(pitch_shift(w, -3.5).samples.size() == n);
  }
}

TEST_CASE("speaker_pitch_stats and normalize_pitch") {
  PitchContour a;
  a.f0 = Eigen::Vector3d(220.0, 220.0, 0.0);
  SpeakerPitchStats s = speaker_pitch_stats({a});
  CHECK(s.mean_hz == doctest::Approx(220.0));
  CHECK(s.std_hz == doctest::Approx(1.0));

  PitchContour b;
  b.f0 = Eigen::Vector2d(200.0, 240.0);
  s = speaker_pitch_stats({b});
  CHECK(s.mean_hz == doctest::Approx(220.0));
  CHECK(s.std_hz == doctest::Approx(20.0));

  PitchContour unvoiced;
  unvoiced.f0 = Eigen::VectorXd::Zero(5);
  CHECK_THROWS_AS(speaker_pitch_stats({unvoiced, unvoiced}), Error);
  CHECK(normalize_pitch(unvoiced, s).isZero());

  PitchContour c;
  c.f0 = Eigen::Vector4d(220.0, 240.0, 0.0, 220.0);
  const Eigen::VectorXd z = normalize_pitch(c, s);
  CHECK(z(0) == 0.0);
  CHECK(z(1) == doctest::Approx(1.0));
  CHECK(z(2) == 0.0);

  Rng rng(11);
  PitchContour r;
  r.f0.resize(200);
  for (Eigen::Index i = 0; i < 200; ++i) r.f0(i) = rng.uniform() < 0.3 ? 0.0 : rng.uniform(60.0, 700.0);
  const SpeakerPitchStats rs = speaker_pitch_stats({r});
  const Eigen::VectorXd mask = (r.f0.array() > 0.0).cast<double>();
  const PitchContour back = denormalize_pitch(normalize_pitch(r, rs), mask, rs);
  for (Eigen::Index i = 0; i < 200; ++i) CHECK(back.f0(i) == doctest::Approx(r.f0(i)).epsilon(1e-12));
}

TEST_CASE("griffin_lim inversion") {
  const Waveform w = sine(220.0, 1.0);
  const MelSpectrogram m = mel_spectrogram(w);
  const Waveform out = griffin_lim(m, 60);
  CHECK(out.samples.size() == m.size() * kHopSize);
  CHECK(yin_pitch(out).voiced_mean() == doctest::Approx(220.0).epsilon(0.03));

  MelSpectrogram silence;
  silence.frames = Eigen::MatrixXd::Constant(40, 80, std::log(kLogFloor));
  CHECK(griffin_lim(silence, 10).samples.cwiseAbs().maxCoeff() < 1e-2);
  CHECK_THROWS_AS(griffin_lim(m, 0), Error);
}
