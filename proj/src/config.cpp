#include "acevc/config.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "acevc/error.hpp"

namespace acevc {

namespace {

std::string trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return std::string(s.substr(begin, end - begin + 1));
}

std::string section_of(const std::string& key) { return key.substr(0, key.find('.')); }

}  // namespace

Config Config::defaults() {
  Config c;
  c.values_ = {
      {"corpus.speakers", "8"},
      {"corpus.utterances", "30"},
      {"corpus.heldout", "5"},
      {"corpus.seed", "7"},
      {"corpus.min_seconds", "1.0"},
      {"corpus.max_seconds", "8.0"},

      {"dsp.griffin_lim_iters", "60"},

      {"sre.subsample", "4"},
      {"sre.width", "128"},
      {"sre.blocks", "2"},
      {"sre.heads", "4"},
      {"sre.kernel", "7"},
      {"sre.content_dim", "64"},
      {"sre.speaker_dim", "64"},
      {"sre.margin", "2"},
      {"sre.scale", "30"},
      {"sre.alpha", "1.0"},
      {"sre.beta", "1.0"},
      {"sre.lr_backbone", "1e-4"},
      {"sre.lr_heads", "1e-3"},
      {"sre.steps", "1500"},
      {"sre.asr_batch", "4"},
      {"sre.sv_batch", "8"},
      {"sre.sv_frames", "172"},
      {"sre.pretrain_steps", "1500"},
      {"sre.pretrain_lr", "5e-4"},
      {"sre.shift_pool", "-4,-3,-2,2,3,4"},

      {"synth.hidden", "192"},
      {"synth.encoder_blocks", "2"},
      {"synth.decoder_blocks", "2"},
      {"synth.heads", "2"},
      {"synth.ff_dim", "384"},
      {"synth.kernel", "3"},
      {"synth.predictor_kernel", "3"},
      {"synth.lambda1", "0.1"},
      {"synth.lambda2", "0.1"},
      {"synth.lr", "1e-3"},
      {"synth.steps", "2000"},
      {"synth.batch", "8"},

      {"train.seed", "1234"},

      {"eval.probe_hidden", "256"},
      {"eval.probe_steps", "600"},
      {"eval.probe_lr", "1e-3"},
      {"eval.target_seconds", "10.0"},
      {"eval.trials", "20"},
  };
  return c;
}

Config Config::parse(std::string_view text, const std::string& origin) {
  Config c = defaults();
  std::istringstream in{std::string(text)};
  std::string line, section;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    const std::string where = origin + ":" + std::to_string(number) + ": ";
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']' || body.size() < 3)
        throw Error(where + "malformed section header '" + body + "'", ErrorCode::kInvalidInput);
      section = trim(std::string_view(body).substr(1, body.size() - 2));
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw Error(where + "expected 'key = value', got '" + body + "'", ErrorCode::kInvalidInput);
    std::string key = trim(std::string_view(body).substr(0, eq));
    if (key.empty()) throw Error(where + "empty key", ErrorCode::kInvalidInput);
    if (key.find('.') == std::string::npos) {
      if (section.empty())
        throw Error(where + "key '" + key + "' outside any [section]", ErrorCode::kInvalidInput);
      key = section + "." + key;
    }
    try {
      c.set(key, trim(std::string_view(body).substr(eq + 1)));
    } catch (const Error& e) {
      throw Error(where + e.what(), ErrorCode::kInvalidInput);
    }
  }
  return c;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file '" + path + "'", ErrorCode::kIo);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

void Config::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw Error("unknown config key '" + key + "'", ErrorCode::kInvalidInput);
  it->second = value;
}

std::string Config::get_string(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw Error("unknown config key '" + key + "'", ErrorCode::kInvalidInput);
  return it->second;
}

double Config::get_double(const std::string& key) const {
  const std::string s = get_string(key);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0' || errno != 0)
    throw Error("config key '" + key + "' expects a number, got '" + s + "'", ErrorCode::kInvalidInput);
  return v;
}

long Config::get_int(const std::string& key) const {
  const std::string s = get_string(key);
  char* end = nullptr;
  errno = 0;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || *end != '\0' || errno != 0)
    throw Error("config key '" + key + "' expects an integer, got '" + s + "'", ErrorCode::kInvalidInput);
  return v;
}

bool Config::get_bool(const std::string& key) const {
  const std::string s = get_string(key);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw Error("config key '" + key + "' expects true/false, got '" + s + "'", ErrorCode::kInvalidInput);
}

std::vector<double> Config::get_doubles(const std::string& key) const {
  std::vector<double> out;
  std::stringstream in(get_string(key));
  std::string item;
  while (std::getline(in, item, ',')) {
    const std::string t = trim(item);
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (t.empty() || *end != '\0')
      throw Error("config key '" + key + "' expects a comma-separated number list", ErrorCode::kInvalidInput);
    out.push_back(v);
  }
  return out;
}

std::string Config::to_text() const {
  std::string out, current;
  for (const auto& [key, value] : values_) {
    const std::string section = section_of(key);
    if (section != current) {
      if (!current.empty()) out += "\n";
      out += "[" + section + "]\n";
      current = section;
    }
    out += key.substr(section.size() + 1) + " = " + value + "\n";
  }
  return out;
}

std::string Config::section_text(const std::vector<std::string>& sections) const {
  std::string out;
  for (const auto& [key, value] : values_)
    for (const auto& s : sections)
      if (section_of(key) == s) out += key + " = " + value + "\n";
  return out;
}

}  // namespace acevc
