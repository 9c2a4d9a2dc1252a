#pragma once

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mqs/common/error.hpp"
#include "mqs/common/rng.hpp"
#include "mqs/common/strings.hpp"
#include "mqs/nn/model.hpp"
#include "mqs/text/synth.hpp"
#include "mqs/train/trainer.hpp"

namespace mqs::cli {

// Everything the command-line tools can be told through a config file. The
// model's vocab_size is resolved from the data, never from the file.
struct AppConfig {
  nn::ModelConfig model;
  train::TrainConfig train;
  std::size_t vocab_min_freq = 1;
  text::SynthConfig synth = text::SynthConfig::defaults();
};

namespace detail {

inline long long parse_int(const std::string& key, const std::string& value) {
  long long out = 0;
  const char* first = value.data();
  const char* last = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  MQS_CHECK(ec == std::errc() && ptr == last, ConfigError,
            "config: key \"" + key + "\" needs an integer, got \"" + value + "\"");
  return out;
}

inline std::size_t parse_size(const std::string& key, const std::string& value) {
  const long long v = parse_int(key, value);
  MQS_CHECK(v >= 0, ConfigError, "config: key \"" + key + "\" must be >= 0");
  return static_cast<std::size_t>(v);
}

inline double parse_double(const std::string& key, const std::string& value) {
  MQS_CHECK(!value.empty(), ConfigError, "config: key \"" + key + "\" is empty");
  char* end = nullptr;
  const double out = std::strtod(value.c_str(), &end);
  MQS_CHECK(end == value.c_str() + value.size(), ConfigError,
            "config: key \"" + key + "\" needs a number, got \"" + value + "\"");
  return out;
}

inline void apply_entry(AppConfig& c, const std::string& key, const std::string& value) {
  auto as_int = [&] { return static_cast<int>(parse_int(key, value)); };
  auto as_size = [&] { return parse_size(key, value); };
  auto as_double = [&] { return parse_double(key, value); };
  auto as_list = [&] { return split_list(value, '|'); };

  if (key == "model.d_model") c.model.d_model = as_int();
  else if (key == "model.n_heads") c.model.n_heads = as_int();
  else if (key == "model.n_enc_layers") c.model.n_enc_layers = as_int();
  else if (key == "model.n_dec_layers") c.model.n_dec_layers = as_int();
  else if (key == "model.d_ff") c.model.d_ff = as_int();
  else if (key == "model.max_len") c.model.max_len = as_int();
  else if (key == "model.dropout_rate") c.model.dropout_rate = as_double();
  else if (key == "train.mode") c.train.mode = train::mode_from_name(value);
  else if (key == "train.learning_rate") c.train.learning_rate = as_double();
  else if (key == "train.beta1") c.train.beta1 = as_double();
  else if (key == "train.beta2") c.train.beta2 = as_double();
  else if (key == "train.adam_eps") c.train.adam_eps = as_double();
  else if (key == "train.batch_size") c.train.batch_size = as_size();
  else if (key == "train.epochs") c.train.epochs = as_int();
  else if (key == "train.grad_clip_norm") c.train.grad_clip_norm = as_double();
  else if (key == "train.eval_every") c.train.eval_every = as_int();
  else if (key == "contrast.tau") c.train.contrastive.tau = as_double();
  else if (key == "contrast.queue_capacity") c.train.contrastive.queue_capacity = as_size();
  else if (key == "contrast.n_h") c.train.contrastive.n_h = as_size();
  else if (key == "contrast.alpha") c.train.contrastive.alpha = as_double();
  else if (key == "contrast.beta") c.train.contrastive.beta = as_double();
  else if (key == "contrast.momentum") c.train.contrastive.momentum = as_double();
  else if (key == "vocab.min_freq") c.vocab_min_freq = as_size();
  else if (key == "synth.pair_count") c.synth.pair_count = as_size();
  else if (key == "synth.focus_phrases") c.synth.focus_phrases = as_list();
  else if (key == "synth.templates") c.synth.templates = as_list();
  else if (key == "synth.distractors") c.synth.distractors = as_list();
  else if (key == "synth.distractors_min") c.synth.distractors_min = as_size();
  else if (key == "synth.distractors_max") c.synth.distractors_max = as_size();
  else if (key == "synth.max_len") c.synth.max_len = as_size();
  else throw ConfigError("config: unknown key \"" + key + "\"");
}

}  // namespace detail

// Flat key = value lines. Full-line comments start with '#'; values may
// contain anything after the first '=', including '|' separated lists. An
// empty file means "all defaults".
inline AppConfig parse_config_text(const std::string& text) {
  AppConfig c;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    MQS_CHECK(eq != std::string::npos, ConfigError,
              "config: line " + std::to_string(line_no) + " is not key = value: \"" +
                  stripped + "\"");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    MQS_CHECK(!key.empty(), ConfigError,
              "config: line " + std::to_string(line_no) + " has an empty key");
    MQS_CHECK(seen.insert(key).second, ConfigError,
              "config: duplicate key \"" + key + "\"");
    detail::apply_entry(c, key, value);
  }
  c.train.validate();
  c.synth.validate();
  return c;
}

inline AppConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  MQS_CHECK(in.good(), IoError, "cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

// Stable digest of every field, used to stamp manifests and telling apart
// incompatible runs at a glance.
inline std::uint64_t config_fingerprint(const AppConfig& c) {
  std::string s;
  s += std::to_string(c.model.d_model) + "|" + std::to_string(c.model.n_heads) + "|";
  s += std::to_string(c.model.n_enc_layers) + "|" + std::to_string(c.model.n_dec_layers) + "|";
  s += std::to_string(c.model.d_ff) + "|" + std::to_string(c.model.max_len) + "|";
  s += format_double(c.model.dropout_rate) + "|";
  s += std::string(train::mode_name(c.train.mode)) + "|";
  s += format_double(c.train.learning_rate) + "|";
  s += format_double(c.train.beta1) + "|" + format_double(c.train.beta2) + "|";
  s += format_double(c.train.adam_eps) + "|";
  s += std::to_string(c.train.batch_size) + "|" + std::to_string(c.train.epochs) + "|";
  s += format_double(c.train.grad_clip_norm) + "|" + std::to_string(c.train.eval_every) + "|";
  s += format_double(c.train.contrastive.tau) + "|";
  s += std::to_string(c.train.contrastive.queue_capacity) + "|";
  s += std::to_string(c.train.contrastive.n_h) + "|";
  s += format_double(c.train.contrastive.alpha) + "|";
  s += format_double(c.train.contrastive.beta) + "|";
  s += format_double(c.train.contrastive.momentum) + "|";
  s += std::to_string(c.vocab_min_freq) + "|";
  s += std::to_string(c.synth.pair_count) + "|";
  s += join(c.synth.focus_phrases, "\x1f") + "|";
  s += join(c.synth.templates, "\x1f") + "|";
  s += join(c.synth.distractors, "\x1f") + "|";
  s += std::to_string(c.synth.distractors_min) + "|";
  s += std::to_string(c.synth.distractors_max) + "|";
  s += std::to_string(c.synth.max_len);
  return fnv1a(s);
}

}  // namespace mqs::cli
