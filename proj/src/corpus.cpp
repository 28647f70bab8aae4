#include "acevc/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include "acevc/dsp/audio.hpp"
#include "acevc/error.hpp"
#include "acevc/random.hpp"

namespace fs = std::filesystem;

namespace acevc::corpus {

namespace {

// Vowel-like (F1, F2) pairs per token.
constexpr double kTokenFormants[5][2] = {{730, 1090}, {270, 2290}, {530, 1840}, {570, 840}, {390, 1990}};

constexpr double kEdgeSilence = 0.1;   // seconds before and after the tokens
constexpr double kCrossfade = 0.02;    // seconds between adjacent tokens
constexpr double kMaxHarmonicHz = 8000.0;
constexpr int kBlock = 32;

double resonance(double f, double center, double bandwidth) {
  const double x = (f - center) / bandwidth;
  return 1.0 / (1.0 + x * x);
}

double envelope(double f, int token, const ToySpeakerSpec& s) {
  const auto& tf = kTokenFormants[token - 1];
  const double tilt = 1.0 / std::sqrt(1.0 + f / 500.0);
  return tilt * (resonance(f, tf[0], 90.0) + 0.8 * resonance(f, tf[1], 120.0) +
                 0.5 * resonance(f, s.formant1, 200.0) + 0.4 * resonance(f, s.formant2, 250.0) + 0.02);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream in(line);
  std::string field;
  while (std::getline(in, field, '|')) out.push_back(trim(field));
  if (!line.empty() && line.back() == '|') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, const std::string& where) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0' || !std::isfinite(v))
    throw Error(where + "expected a number, got '" + s + "'", ErrorCode::kFormat);
  return v;
}

std::string format_number(double v) {
  std::ostringstream out;
  out << std::setprecision(10) << v;
  return out.str();
}

}  // namespace

int token_id(char c) {
  const auto pos = kAlphabet.find(c);
  return pos == std::string_view::npos ? -1 : static_cast<int>(pos) + 1;
}

char token_char(int id) {
  if (id < 1 || id > static_cast<int>(kAlphabet.size()))
    throw Error("token id " + std::to_string(id) + " has no character", ErrorCode::kInvalidInput);
  return kAlphabet[static_cast<std::size_t>(id - 1)];
}

std::vector<int> encode_transcript(std::string_view text) {
  std::vector<int> out;
  out.reserve(text.size());
  for (char c : text) {
    const int id = token_id(c);
    if (id < 0) throw Error(std::string("out-of-vocabulary token '") + c + "'", ErrorCode::kInvalidInput);
    out.push_back(id);
  }
  return out;
}

std::string decode_tokens(const std::vector<int>& ids) {
  std::string out;
  for (int id : ids)
    if (id != 0) out.push_back(token_char(id));
  return out;
}

std::vector<ToySpeakerSpec> toy_speakers(int count, std::uint64_t seed) {
  if (count < 2) throw Error("toy corpus needs at least 2 speakers", ErrorCode::kInvalidInput);
  // Rate order i -> (i * stride) mod count with stride coprime to count.
  int stride = 3;
  while (std::gcd(stride, count) != 1) ++stride;
  Rng rng(derive_seed(seed, "speakers"));
  std::vector<ToySpeakerSpec> out;
  for (int i = 0; i < count; ++i) {
    ToySpeakerSpec s;
    std::ostringstream name;
    name << "spk" << std::setw(2) << std::setfill('0') << i;
    s.name = name.str();
    s.base_f0 = 90.0 + 230.0 * i / (count - 1);
    s.f0_jitter = rng.uniform(0.02, 0.05);
    s.formant1 = rng.uniform(2300.0, 2900.0);
    s.formant2 = rng.uniform(3000.0, 3500.0);
    s.rate = 0.7 + 0.7 * static_cast<double>((i * stride) % count) / (count - 1);
    out.push_back(s);
  }
  return out;
}

std::vector<double> render_tokens(const ToySpeakerSpec& speaker, const std::vector<int>& tokens,
                                  const std::vector<double>& token_seconds, std::uint64_t seed) {
  if (tokens.size() != token_seconds.size())
    throw Error("render_tokens: token/duration count mismatch", ErrorCode::kInvalidInput);
  const double sr = dsp::kSampleRate;
  std::vector<double> bounds{kEdgeSilence};
  for (double d : token_seconds) bounds.push_back(bounds.back() + d);
  const double voiced_end = bounds.back();
  const auto n = static_cast<std::size_t>(std::llround((voiced_end + kEdgeSilence) * sr));
  std::vector<double> out(n, 0.0);

  Rng rng(seed);
  const double contour_phase = rng.uniform(0.0, 2.0 * M_PI);
  const double contour_rate = rng.uniform(0.5, 1.0);
  auto f0_at = [&](double t) {
    return speaker.base_f0 * (1.0 + speaker.f0_jitter * std::sin(2.0 * M_PI * contour_rate * t + contour_phase));
  };
  const int max_harmonics = static_cast<int>(kMaxHarmonicHz / (speaker.base_f0 * (1.0 - speaker.f0_jitter)));
  std::vector<double> amp(static_cast<std::size_t>(max_harmonics) + 1, 0.0);

  double phase = 0.0;
  for (std::size_t start = 0; start < n; start += kBlock) {
    const double mid = (static_cast<double>(start) + kBlock / 2.0) / sr;
    // Token mixing weights with linear crossfades at the boundaries.
    std::vector<std::pair<int, double>> weights;
    if (mid >= bounds.front() - kCrossfade / 2 && mid <= voiced_end + kCrossfade / 2) {
      for (std::size_t k = 0; k < tokens.size(); ++k) {
        const double lo = bounds[k] - kCrossfade / 2, hi = bounds[k + 1] + kCrossfade / 2;
        if (mid < lo || mid > hi) continue;
        const double w = std::min({1.0, (mid - lo) / kCrossfade, (hi - mid) / kCrossfade});
        if (w > 0.0) weights.emplace_back(tokens[k], w);
      }
    }
    const double f0_mid = f0_at(mid);
    const int harmonics = std::min(max_harmonics, static_cast<int>(kMaxHarmonicHz / f0_mid));
    for (int h = 1; h <= harmonics; ++h) {
      double a = 0.0;
      for (const auto& [tok, w] : weights) a += w * envelope(h * f0_mid, tok, speaker);
      amp[static_cast<std::size_t>(h)] = a;
    }
    const std::size_t stop = std::min(n, start + kBlock);
    for (std::size_t i = start; i < stop; ++i) {
      const double t = static_cast<double>(i) / sr;
      phase += 2.0 * M_PI * f0_at(t) / sr;
      if (phase > 2.0 * M_PI) phase -= 2.0 * M_PI;
      if (weights.empty()) continue;
      const std::complex<double> step = std::polar(1.0, phase);
      std::complex<double> z = step;
      double sample = 0.0;
      for (int h = 1; h <= harmonics; ++h) {
        sample += amp[static_cast<std::size_t>(h)] * z.imag();
        z *= step;
      }
      out[i] = sample;
    }
  }
  double peak = 0.0;
  for (double v : out) peak = std::max(peak, std::abs(v));
  if (peak > 0.0)
    for (double& v : out) v *= 0.8 / peak;
  return out;
}

std::vector<Utterance> generate_toy_corpus(const std::string& dir, const ToyCorpusOptions& options) {
  if (options.utterances < 1) throw Error("toy corpus needs at least one utterance per speaker", ErrorCode::kInvalidInput);
  const auto speakers = toy_speakers(options.speakers, options.seed);
  fs::create_directories(fs::path(dir) / "wav");
  std::vector<Utterance> records;
  for (const auto& spk : speakers) {
    for (int u = 0; u < options.utterances; ++u) {
      const std::string id = spk.name + "_u" + std::to_string(u);
      Rng rng(derive_seed(options.seed, "utterance/" + id));
      const double target = rng.uniform(2.2, 3.2) - 2.0 * kEdgeSilence;
      std::vector<int> tokens;
      std::vector<double> seconds;
      double total = 0.0;
      while (total < target) {
        int tok;
        do {
          tok = 1 + static_cast<int>(rng.below(kAlphabet.size()));
        } while (!tokens.empty() && tok == tokens.back());
        const double d = rng.uniform(0.12, 0.25) / spk.rate;
        tokens.push_back(tok);
        seconds.push_back(d);
        total += d;
      }
      dsp::Waveform w;
      const auto samples = render_tokens(spk, tokens, seconds, rng.next());
      w.samples = Eigen::Map<const Eigen::VectorXd>(samples.data(), static_cast<Eigen::Index>(samples.size()));
      const std::string rel = "wav/" + id + ".wav";
      dsp::write_wav((fs::path(dir) / rel).string(), w);
      records.push_back(Utterance{rel, decode_tokens(tokens), spk.name, w.seconds()});
    }
  }
  write_manifest((fs::path(dir) / "manifest.txt").string(), records);
  write_speakers((fs::path(dir) / "speakers.txt").string(), speakers);
  for (auto& r : records) r.path = (fs::path(dir) / r.path).string();
  return records;
}

void write_speakers(const std::string& path, const std::vector<ToySpeakerSpec>& speakers) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write speaker table '" + path + "'", ErrorCode::kIo);
  for (const auto& s : speakers)
    out << s.name << '|' << format_number(s.base_f0) << '|' << format_number(s.f0_jitter) << '|'
        << format_number(s.formant1) << '|' << format_number(s.formant2) << '|' << format_number(s.rate) << '\n';
}

std::vector<ToySpeakerSpec> load_speakers(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open speaker table '" + path + "'", ErrorCode::kIo);
  std::vector<ToySpeakerSpec> out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    const std::string where = path + ":" + std::to_string(number) + ": ";
    const auto f = split_fields(line);
    if (f.size() != 6) throw Error(where + "expected 6 '|'-separated fields", ErrorCode::kFormat);
    ToySpeakerSpec s{f[0],
                     parse_number(f[1], where),
                     parse_number(f[2], where),
                     parse_number(f[3], where),
                     parse_number(f[4], where),
                     parse_number(f[5], where)};
    out.push_back(s);
  }
  return out;
}

void write_manifest(const std::string& path, const std::vector<Utterance>& utterances) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write manifest '" + path + "'", ErrorCode::kIo);
  for (const auto& u : utterances)
    out << u.path << '|' << u.transcript << '|' << u.speaker << '|' << format_number(u.duration) << '\n';
}

std::vector<Utterance> load_manifest(const std::string& path, const std::vector<ToySpeakerSpec>& speakers,
                                     double min_seconds, double max_seconds) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest '" + path + "'", ErrorCode::kIo);
  const fs::path base = fs::path(path).parent_path();
  std::vector<Utterance> out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    const std::string where = path + ":" + std::to_string(number) + ": ";
    const auto f = split_fields(line);
    if (f.size() != 4) throw Error(where + "expected 'path|transcript|speaker|duration'", ErrorCode::kFormat);
    Utterance u{f[0], f[1], f[2], parse_number(f[3], where)};
    const fs::path audio = fs::path(u.path).is_absolute() ? fs::path(u.path) : base / u.path;
    if (!fs::exists(audio)) throw Error(where + "missing audio file '" + audio.string() + "'", ErrorCode::kIo);
    u.path = audio.string();
    if (std::none_of(speakers.begin(), speakers.end(), [&](const ToySpeakerSpec& s) { return s.name == u.speaker; }))
      throw Error(where + "unknown speaker '" + u.speaker + "'", ErrorCode::kInvalidInput);
    if (u.transcript.empty()) throw Error(where + "empty transcript", ErrorCode::kInvalidInput);
    try {
      encode_transcript(u.transcript);
    } catch (const Error& e) {
      throw Error(where + e.what(), ErrorCode::kInvalidInput);
    }
    if (u.duration < min_seconds || u.duration > max_seconds) continue;
    out.push_back(std::move(u));
  }
  return out;
}

Split split_heldout(const std::vector<Utterance>& utterances, int per_speaker) {
  std::map<std::string, int> remaining;
  for (const auto& u : utterances) ++remaining[u.speaker];
  Split s;
  for (const auto& u : utterances) {
    int& left = remaining[u.speaker];
    (left-- <= per_speaker ? s.heldout : s.train).push_back(u);
  }
  return s;
}

}  // namespace acevc::corpus
