#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "mqs/common/error.hpp"
#include "mqs/nn/model.hpp"
#include "mqs/nn/tensor.hpp"

namespace mqs::nn {

// On-disk training state. Sections beyond the model weights are optional:
// inference-only files carry model+vocab+meta, full training state adds the
// key encoder, queue, and optimizer moments.
template <typename T>
struct Checkpoint {
  ModelConfig config;
  ModelParams<T> model;
  std::vector<std::string> vocab_tokens;

  ModelParams<T> key;  // momentum encoder slice; empty when absent

  bool has_queue = false;
  std::size_t queue_capacity = 0;
  Mat<T> queue;  // one entry per row; 0 x 0 when absent

  bool has_optim = false;
  std::uint64_t optim_step = 0;
  ModelParams<T> optim_m, optim_v;

  std::map<std::string, std::string> meta;
};

namespace ckpt_detail {

constexpr char kMagic[8] = {'M', 'Q', 'S', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

inline void put_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

inline void put_u64(std::string& out, std::uint64_t v) {
  char b[8];
  std::memcpy(b, &v, 8);
  out.append(b, 8);
}

inline void put_f64(std::string& out, double v) {
  char b[8];
  std::memcpy(b, &v, 8);
  out.append(b, 8);
}

inline void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

template <typename T>
void put_mat(std::string& out, const Mat<T>& m) {
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  const std::size_t bytes = static_cast<std::size_t>(m.size()) * sizeof(T);
  const std::size_t at = out.size();
  out.resize(at + bytes);
  if (bytes > 0) std::memcpy(out.data() + at, m.data(), bytes);
}

template <typename T>
void put_params(std::string& out, const ModelParams<T>& params) {
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& [path, m] : params) {
    put_str(out, path);
    put_mat(out, m);
  }
}

class Reader {
 public:
  Reader(const std::string& buf, const std::string& path) : buf_(buf), path_(path) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, buf_.data() + at_, 4);
    at_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v;
    std::memcpy(&v, buf_.data() + at_, 8);
    at_ += 8;
    return v;
  }

  double f64() {
    need(8);
    double v;
    std::memcpy(&v, buf_.data() + at_, 8);
    at_ += 8;
    return v;
  }

  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s = buf_.substr(at_, n);
    at_ += n;
    return s;
  }

  template <typename T>
  Mat<T> mat() {
    const std::uint32_t rows = u32();
    const std::uint32_t cols = u32();
    Mat<T> m(rows, cols);
    const std::size_t bytes = static_cast<std::size_t>(m.size()) * sizeof(T);
    need(bytes);
    if (bytes > 0) std::memcpy(m.data(), buf_.data() + at_, bytes);
    at_ += bytes;
    return m;
  }

  template <typename T>
  ModelParams<T> params() {
    const std::uint32_t count = u32();
    ModelParams<T> out;
    for (std::uint32_t i = 0; i < count; ++i) {
      std::string path = str();
      out.emplace(std::move(path), mat<T>());
    }
    return out;
  }

  void skip(std::size_t n) {
    need(n);
    at_ += n;
  }

  std::size_t pos() const { return at_; }
  bool done() const { return at_ >= buf_.size(); }

 private:
  void need(std::size_t n) {
    if (at_ + n > buf_.size()) {
      throw IoError("checkpoint " + path_ + ": truncated or corrupt");
    }
  }

  const std::string& buf_;
  std::string path_;
  std::size_t at_ = 0;
};

}  // namespace ckpt_detail

template <typename T>
void save_checkpoint(const std::string& path, const Checkpoint<T>& c) {
  namespace d = ckpt_detail;
  c.config.validate();
  std::string out;
  out.append(d::kMagic, sizeof(d::kMagic));
  d::put_u32(out, d::kVersion);
  d::put_u32(out, static_cast<std::uint32_t>(sizeof(T)));
  d::put_u32(out, static_cast<std::uint32_t>(c.config.vocab_size));
  d::put_u32(out, static_cast<std::uint32_t>(c.config.d_model));
  d::put_u32(out, static_cast<std::uint32_t>(c.config.n_heads));
  d::put_u32(out, static_cast<std::uint32_t>(c.config.n_enc_layers));
  d::put_u32(out, static_cast<std::uint32_t>(c.config.n_dec_layers));
  d::put_u32(out, static_cast<std::uint32_t>(c.config.d_ff));
  d::put_u32(out, static_cast<std::uint32_t>(c.config.max_len));
  d::put_f64(out, c.config.dropout_rate);

  auto section = [&](const std::string& name, const std::string& payload) {
    d::put_str(out, name);
    d::put_u64(out, payload.size());
    out.append(payload);
  };

  {
    std::string p;
    d::put_params(p, c.model);
    section("model", p);
  }
  if (!c.vocab_tokens.empty()) {
    std::string p;
    d::put_u32(p, static_cast<std::uint32_t>(c.vocab_tokens.size()));
    for (const auto& tok : c.vocab_tokens) d::put_str(p, tok);
    section("vocab", p);
  }
  if (!c.key.empty()) {
    std::string p;
    d::put_params(p, c.key);
    section("key", p);
  }
  if (c.has_queue) {
    std::string p;
    d::put_u64(p, c.queue_capacity);
    d::put_mat(p, c.queue);
    section("queue", p);
  }
  if (c.has_optim) {
    std::string p;
    d::put_u64(p, c.optim_step);
    d::put_params(p, c.optim_m);
    d::put_params(p, c.optim_v);
    section("optim", p);
  }
  if (!c.meta.empty()) {
    std::string p;
    d::put_u32(p, static_cast<std::uint32_t>(c.meta.size()));
    for (const auto& [k, v] : c.meta) {
      d::put_str(p, k);
      d::put_str(p, v);
    }
    section("meta", p);
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open checkpoint for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("error writing checkpoint: " + path);
}

// Loads whatever sections are present; unknown sections are skipped so files
// stay forward-readable.
template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path) {
  namespace d = ckpt_detail;
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint: " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), {});
  d::Reader r(buf, path);

  if (buf.size() < sizeof(d::kMagic) ||
      std::memcmp(buf.data(), d::kMagic, sizeof(d::kMagic)) != 0) {
    throw IoError("checkpoint " + path + ": bad magic string");
  }
  r.skip(sizeof(d::kMagic));
  const std::uint32_t version = r.u32();
  if (version != d::kVersion) {
    throw IoError("checkpoint " + path + ": unsupported version " + std::to_string(version));
  }
  const std::uint32_t scalar = r.u32();
  if (scalar != sizeof(T)) {
    throw IoError("checkpoint " + path + ": scalar width " + std::to_string(scalar) +
                  " does not match this reader");
  }

  Checkpoint<T> c;
  c.config.vocab_size = static_cast<int>(r.u32());
  c.config.d_model = static_cast<int>(r.u32());
  c.config.n_heads = static_cast<int>(r.u32());
  c.config.n_enc_layers = static_cast<int>(r.u32());
  c.config.n_dec_layers = static_cast<int>(r.u32());
  c.config.d_ff = static_cast<int>(r.u32());
  c.config.max_len = static_cast<int>(r.u32());
  c.config.dropout_rate = r.f64();
  c.config.validate();

  bool saw_model = false;
  while (!r.done()) {
    const std::string name = r.str();
    const std::uint64_t payload = r.u64();
    const std::size_t end = r.pos() + payload;
    if (name == "model") {
      c.model = r.params<T>();
      saw_model = true;
    } else if (name == "vocab") {
      const std::uint32_t n = r.u32();
      c.vocab_tokens.reserve(n);
      for (std::uint32_t i = 0; i < n; ++i) c.vocab_tokens.push_back(r.str());
    } else if (name == "key") {
      c.key = r.params<T>();
    } else if (name == "queue") {
      c.has_queue = true;
      c.queue_capacity = r.u64();
      c.queue = r.mat<T>();
    } else if (name == "optim") {
      c.has_optim = true;
      c.optim_step = r.u64();
      c.optim_m = r.params<T>();
      c.optim_v = r.params<T>();
    } else if (name == "meta") {
      const std::uint32_t n = r.u32();
      for (std::uint32_t i = 0; i < n; ++i) {
        std::string k = r.str();
        c.meta[std::move(k)] = r.str();
      }
    } else {
      r.skip(payload);
    }
    MQS_CHECK(r.pos() == end, IoError,
              "checkpoint " + path + ": section \"" + name + "\" has inconsistent size");
  }
  MQS_CHECK(saw_model, IoError, "checkpoint " + path + ": missing model section");
  validate_params(c.config, c.model);
  return c;
}

}  // namespace mqs::nn
