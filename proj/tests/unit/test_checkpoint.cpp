#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <string>

#include "mqs/nn/checkpoint.hpp"
#include "mqs/nn/model.hpp"

using namespace mqs;
using namespace mqs::nn;

namespace {

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.vocab_size = 12;
  cfg.d_model = 4;
  cfg.n_heads = 2;
  cfg.n_enc_layers = 1;
  cfg.n_dec_layers = 1;
  cfg.d_ff = 8;
  cfg.max_len = 6;
  return cfg;
}

Checkpoint<double> full_checkpoint() {
  Checkpoint<double> c;
  c.config = small_config();
  c.model = init_params<double>(c.config, 7);
  c.vocab_tokens = {"<pad>", "<bos>", "<eos>", "<unk>", "dry", "eyes"};
  c.key = encoder_subset(c.model);
  c.has_queue = true;
  c.queue_capacity = 16;
  c.queue = Mat<double>::Random(3, c.config.d_model);
  c.has_optim = true;
  c.optim_step = 42;
  for (const auto& [path, m] : c.model) {
    c.optim_m.emplace(path, Mat<double>::Constant(m.rows(), m.cols(), 0.5));
    c.optim_v.emplace(path, Mat<double>::Constant(m.rows(), m.cols(), 0.25));
  }
  c.meta = {{"mode", "qfcl"}, {"epoch", "3"}};
  return c;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  return std::string((std::istreambuf_iterator<char>(f)), {});
}

void spit(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  REQUIRE(f.good());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) : path("ckpt_test_" + name + ".bin") {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("checkpoint round trip preserves every section") {
  const TempFile f("roundtrip");
  const auto c = full_checkpoint();
  save_checkpoint(f.path, c);
  const auto back = load_checkpoint<double>(f.path);

  CHECK(back.config == c.config);
  REQUIRE(back.model.size() == c.model.size());
  for (const auto& [path, m] : c.model) CHECK(back.model.at(path) == m);
  CHECK(back.vocab_tokens == c.vocab_tokens);
  REQUIRE(back.key.size() == c.key.size());
  for (const auto& [path, m] : c.key) CHECK(back.key.at(path) == m);
  CHECK(back.has_queue);
  CHECK(back.queue_capacity == c.queue_capacity);
  CHECK(back.queue == c.queue);
  CHECK(back.has_optim);
  CHECK(back.optim_step == c.optim_step);
  for (const auto& [path, m] : c.optim_m) CHECK(back.optim_m.at(path) == m);
  for (const auto& [path, m] : c.optim_v) CHECK(back.optim_v.at(path) == m);
  CHECK(back.meta == c.meta);
}

TEST_CASE("saving the same state twice is byte-identical") {
  const TempFile a("dup_a"), b("dup_b");
  const auto c = full_checkpoint();
  save_checkpoint(a.path, c);
  save_checkpoint(b.path, c);
  CHECK(slurp(a.path) == slurp(b.path));
}

TEST_CASE("inference-only checkpoints omit training sections") {
  const TempFile f("infer");
  Checkpoint<double> c;
  c.config = small_config();
  c.model = init_params<double>(c.config, 9);
  c.vocab_tokens = {"<pad>", "<bos>", "<eos>", "<unk>", "fever"};
  save_checkpoint(f.path, c);

  const auto back = load_checkpoint<double>(f.path);
  CHECK(back.key.empty());
  CHECK_FALSE(back.has_queue);
  CHECK(back.queue.size() == 0);
  CHECK_FALSE(back.has_optim);
  CHECK(back.meta.empty());
  for (const auto& [path, m] : c.model) CHECK(back.model.at(path) == m);
  // A stripped file really is smaller than the full training state.
  const TempFile g("full_for_size");
  save_checkpoint(g.path, full_checkpoint());
  CHECK(slurp(f.path).size() < slurp(g.path).size());
}

TEST_CASE("unknown sections are skipped for forward compatibility") {
  const TempFile f("forward");
  Checkpoint<double> c;
  c.config = small_config();
  c.model = init_params<double>(c.config, 3);
  save_checkpoint(f.path, c);

  std::string bytes = slurp(f.path);
  std::string payload = "opaque-bytes-from-the-future";
  ckpt_detail::put_str(bytes, "shiny_new_section");
  ckpt_detail::put_u64(bytes, payload.size());
  bytes += payload;
  spit(f.path, bytes);

  const auto back = load_checkpoint<double>(f.path);
  for (const auto& [path, m] : c.model) CHECK(back.model.at(path) == m);
}

TEST_CASE("corrupt checkpoints are rejected with io errors") {
  SECTION("missing file") {
    CHECK_THROWS_AS(load_checkpoint<double>("no_such_checkpoint.bin"), IoError);
  }
  SECTION("bad magic") {
    const TempFile f("badmagic");
    spit(f.path, "NOTACKPT-and-some-other-bytes-here");
    CHECK_THROWS_AS(load_checkpoint<double>(f.path), IoError);
  }
  SECTION("too short for a header") {
    const TempFile f("short");
    spit(f.path, "MQ");
    CHECK_THROWS_AS(load_checkpoint<double>(f.path), IoError);
  }
  SECTION("truncated body") {
    const TempFile f("trunc");
    Checkpoint<double> c;
    c.config = small_config();
    c.model = init_params<double>(c.config, 3);
    save_checkpoint(f.path, c);
    std::string bytes = slurp(f.path);
    bytes.resize(bytes.size() - 31);
    spit(f.path, bytes);
    CHECK_THROWS_AS(load_checkpoint<double>(f.path), IoError);
  }
  SECTION("scalar width mismatch") {
    const TempFile f("width");
    Checkpoint<double> c;
    c.config = small_config();
    c.model = init_params<double>(c.config, 3);
    save_checkpoint(f.path, c);
    CHECK_THROWS_AS(load_checkpoint<float>(f.path), IoError);
  }
}
