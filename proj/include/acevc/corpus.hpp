#pragma once

// Dataset layer: manifests of (audio, transcript, speaker) records, the
// speaker table, and a deterministic synthetic multi-speaker corpus.
//
// Manifest: one record per line, `path|transcript|speaker|duration`, with
// paths relative to the manifest's directory. Speaker table
// (speakers.txt): `name|base_f0|f0_jitter|formant1|formant2|rate`.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace acevc::corpus {

/// Token alphabet; character i maps to CTC id i + 1 (0 is the blank).
inline constexpr std::string_view kAlphabet = "abcde";
inline constexpr int kVocabSize = static_cast<int>(kAlphabet.size()) + 1;

int token_id(char c);
char token_char(int id);
/// Throws for characters outside the alphabet.
std::vector<int> encode_transcript(std::string_view text);
/// Blank ids are skipped.
std::string decode_tokens(const std::vector<int>& ids);

struct ToySpeakerSpec {
  std::string name;
  double base_f0 = 0.0;    // Hz
  double f0_jitter = 0.0;  // relative depth of the slow intonation contour
  double formant1 = 0.0;   // timbre resonances, Hz
  double formant2 = 0.0;
  double rate = 1.0;       // speaking-rate multiplier (> 1 is faster)
};

struct Utterance {
  std::string path;  // resolved against the manifest directory
  std::string transcript;
  std::string speaker;
  double duration = 0.0;  // seconds
};

struct ToyCorpusOptions {
  int speakers = 8;
  int utterances = 30;  // per speaker
  std::uint64_t seed = 7;
};

/// Speaker table for a toy corpus: base f0 evenly spaced over [90, 320] Hz,
/// rates spread over [0.7, 1.4] in an order decorrelated from f0.
std::vector<ToySpeakerSpec> toy_speakers(int count, std::uint64_t seed);

/// Renders one utterance: per token, a harmonic source at the speaker's f0
/// shaped by the token's two vowel formants and the speaker's two timbre
/// formants. Returns 22050 Hz samples.
std::vector<double> render_tokens(const ToySpeakerSpec& speaker, const std::vector<int>& tokens,
                                  const std::vector<double>& token_seconds, std::uint64_t seed);

/// Writes WAVs, manifest.txt and speakers.txt into `dir` and returns the
/// records. Fully deterministic per seed.
std::vector<Utterance> generate_toy_corpus(const std::string& dir, const ToyCorpusOptions& options);

std::vector<ToySpeakerSpec> load_speakers(const std::string& path);
void write_speakers(const std::string& path, const std::vector<ToySpeakerSpec>& speakers);

/// Parses and validates a manifest. Records outside [min_seconds,
/// max_seconds] are dropped. Unknown speakers, out-of-alphabet tokens and
/// malformed lines raise errors naming the line.
std::vector<Utterance> load_manifest(const std::string& path, const std::vector<ToySpeakerSpec>& speakers,
                                     double min_seconds = 0.0, double max_seconds = 1e9);

void write_manifest(const std::string& path, const std::vector<Utterance>& utterances);

struct Split {
  std::vector<Utterance> train;
  std::vector<Utterance> heldout;
};

/// Holds out the last `per_speaker` records of every speaker (manifest order).
Split split_heldout(const std::vector<Utterance>& utterances, int per_speaker);

}  // namespace acevc::corpus
