#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "support/fd_check.hpp"
#include "mqs/common/rng.hpp"
#include "mqs/contrast/losses.hpp"
#include "mqs/contrast/memory_queue.hpp"
#include "mqs/contrast/momentum.hpp"
#include "mqs/nn/model.hpp"

using namespace mqs;
using namespace mqs::contrast;
using nn::Mat;

namespace {

Mat<double> row3(double a, double b, double c) {
  Mat<double> m(1, 3);
  m << a, b, c;
  return m;
}

Mat<double> random_unit_row(Rng& rng, Eigen::Index d) {
  Mat<double> m(1, d);
  for (Eigen::Index j = 0; j < d; ++j) m(0, j) = rng.normal();
  return m / m.norm();
}

}  // namespace

TEST_CASE("momentum update hand cases") {
  nn::ModelParams<double> key, query;
  key.emplace("w", Mat<double>::Constant(1, 1, 2.0));
  query.emplace("w", Mat<double>::Constant(1, 1, 1.0));

  SECTION("typical coefficient") {
    momentum_update(key, query, 0.999);
    CHECK(key.at("w")(0, 0) == Catch::Approx(1.999).epsilon(1e-12));
  }
  SECTION("coefficient one freezes the key") {
    momentum_update(key, query, 1.0);
    CHECK(key.at("w")(0, 0) == 2.0);
  }
  SECTION("coefficient zero copies the query") {
    momentum_update(key, query, 0.0);
    CHECK(key.at("w")(0, 0) == 1.0);
  }
  SECTION("out-of-range coefficient") {
    CHECK_THROWS_AS(momentum_update(key, query, 1.5), ConfigError);
    CHECK_THROWS_AS(momentum_update(key, query, -0.1), ConfigError);
  }
}

TEST_CASE("repeated momentum updates contract toward the query") {
  nn::ModelParams<double> key, query;
  key.emplace("w", Mat<double>::Constant(2, 2, 5.0));
  query.emplace("w", Mat<double>::Constant(2, 2, 1.0));
  const double m = 0.9;
  double prev_gap = 4.0;
  for (int n = 1; n <= 160; ++n) {
    momentum_update(key, query, m);
    const double gap = std::abs(key.at("w")(0, 0) - 1.0);
    CHECK(gap == Catch::Approx(4.0 * std::pow(m, n)).epsilon(1e-9));
    CHECK(gap < prev_gap);
    prev_gap = gap;
  }
  CHECK(prev_gap < 1e-6);  // 4 * 0.9^160 = 1.9e-7
}

TEST_CASE("momentum update touches only the key slice") {
  nn::ModelConfig cfg;
  cfg.vocab_size = 12;
  cfg.d_model = 4;
  cfg.n_heads = 2;
  cfg.n_enc_layers = 1;
  cfg.n_dec_layers = 1;
  cfg.d_ff = 8;
  cfg.max_len = 6;
  const auto query = nn::init_params<double>(cfg, 1);
  auto key = nn::encoder_subset(nn::init_params<double>(cfg, 2));
  const auto query_before = query;
  const auto key_before = key;

  momentum_update(key, query, 0.5);

  for (const auto& [path, m] : query) CHECK(m == query_before.at(path));
  for (const auto& [path, k] : key) {
    const Mat<double> expect = 0.5 * key_before.at(path) + 0.5 * query.at(path);
    CHECK(k.isApprox(expect, 1e-12));
  }
  CHECK(key.count("dec.0.self.wq") == 0);
}

TEST_CASE("momentum update rejects structural drift") {
  nn::ModelParams<double> key, query;
  key.emplace("w", Mat<double>::Zero(2, 2));
  SECTION("missing query path") {
    CHECK_THROWS_AS(momentum_update(key, query, 0.5), StructuralError);
  }
  SECTION("shape mismatch") {
    query.emplace("w", Mat<double>::Zero(2, 3));
    CHECK_THROWS_AS(momentum_update(key, query, 0.5), StructuralError);
  }
}

TEST_CASE("memory queue is strictly first-in first-out") {
  MemoryQueue<double> q(3, 3);
  CHECK(q.capacity() == 3);
  CHECK(q.size() == 0);
  CHECK(q.as_matrix().rows() == 0);

  const auto a = row3(1, 0, 0), b = row3(0, 1, 0), c = row3(0, 0, 1), d = row3(1, 1, 0);
  q.enqueue({a, b});
  REQUIRE(q.size() == 2);
  CHECK(q.entries()[0] == a);
  CHECK(q.entries()[1] == b);

  q.enqueue({c, d});  // evicts a
  REQUIRE(q.size() == 3);
  CHECK(q.entries()[0] == b);
  CHECK(q.entries()[1] == c);
  CHECK(q.entries()[2] == d);

  const auto snap = q.as_matrix();
  REQUIRE(snap.rows() == 3);
  CHECK(snap.row(0) == b.row(0));
  CHECK(snap.row(2) == d.row(0));

  const auto back = MemoryQueue<double>::from_matrix(3, snap);
  CHECK(back.as_matrix() == snap);
}

TEST_CASE("memory queue validates its inputs") {
  CHECK_THROWS_AS(MemoryQueue<double>(0, 3), ConfigError);
  MemoryQueue<double> q(2, 3);
  CHECK_THROWS_AS(q.enqueue({row3(1, 0, 0), row3(0, 1, 0), row3(0, 0, 1)}), UsageError);
  CHECK_THROWS_AS(q.enqueue({Mat<double>::Zero(1, 4)}), StructuralError);
  CHECK_THROWS_AS(q.enqueue({Mat<double>::Zero(2, 3)}), StructuralError);
  CHECK_THROWS_AS(MemoryQueue<double>::from_matrix(1, Mat<double>::Zero(2, 3)),
                  StructuralError);
}

TEST_CASE("memory queue matches a sliding-window replay") {
  for (std::size_t cap : {std::size_t{1}, std::size_t{7}, std::size_t{16}}) {
    MemoryQueue<double> q(cap, 2);
    std::vector<Mat<double>> window;  // oracle: plain list trimmed at the front
    Rng rng(1000 + cap);
    double stamp = 0.0;
    for (int step = 0; step < 300; ++step) {
      const std::size_t batch_size = rng.bounded(std::min<std::uint64_t>(cap, 4) + 1);
      std::vector<Mat<double>> batch;
      for (std::size_t i = 0; i < batch_size; ++i) {
        batch.push_back(Mat<double>::Constant(1, 2, stamp));
        stamp += 1.0;
      }
      step_queue(q, batch);
      for (const auto& r : batch) window.push_back(r);
      while (window.size() > cap) window.erase(window.begin());

      REQUIRE(q.size() == window.size());
      for (std::size_t i = 0; i < window.size(); ++i) {
        REQUIRE(q.entries()[i] == window[i]);
      }
    }
  }
}

TEST_CASE("cosine similarity hand cases") {
  const auto x = row3(1, 0, 0);
  CHECK(cosine_sim(x, row3(2, 0, 0)) == Catch::Approx(1.0));
  CHECK(cosine_sim(x, row3(0, 5, 0)) == Catch::Approx(0.0).margin(1e-15));
  CHECK(cosine_sim(x, row3(-3, 0, 0)) == Catch::Approx(-1.0));
  CHECK(cosine_sim(row3(1, 1, 0), row3(0, 1, 1)) == Catch::Approx(0.5));
  CHECK_THROWS_AS(cosine_sim(x, Mat<double>(Mat<double>::Zero(1, 3))), NumericError);
  CHECK_THROWS_AS(cosine_sim(x, Mat<double>(Mat<double>::Ones(1, 4))), StructuralError);
}

TEST_CASE("contrastive loss hand value") {
  // Anchor aligned with the positive, one orthogonal and one opposite
  // negative, tau = 1: scores are (1, 0, -1), so the loss is
  // -log(e / (e + 1 + e^-1)) = 0.40760596...
  const auto anchor = row3(1, 0, 0);
  const double loss =
      info_nce<double>(anchor, row3(1, 0, 0), {row3(0, 1, 0), row3(-1, 0, 0)}, 1.0);
  const double expect = -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0 + std::exp(-1.0)));
  CHECK(loss == Catch::Approx(expect).margin(1e-9));
  CHECK(loss == Catch::Approx(0.4076059644443806).margin(1e-6));
}

TEST_CASE("contrastive loss limiting cases") {
  const auto anchor = row3(0.3, -0.2, 0.9);
  SECTION("no negatives means zero loss") {
    CHECK(info_nce<double>(anchor, anchor, {}, 0.07) == 0.0);
    CHECK(info_nce<double>(anchor, row3(1, 2, 3), {}, 0.5) == 0.0);
  }
  SECTION("negatives identical to the positive give log(K+1)") {
    const auto pos = row3(1, 1, 1);
    for (int k : {1, 5, 9}) {
      std::vector<Mat<double>> negs(static_cast<std::size_t>(k), pos);
      const double loss = info_nce<double>(anchor, pos, negs, 0.07);
      CHECK(loss == Catch::Approx(std::log(1.0 + k)).epsilon(1e-12));
    }
  }
  SECTION("temperature drops out when all scores tie") {
    const auto pos = row3(1, 1, 1);
    std::vector<Mat<double>> negs(3, pos);
    CHECK(info_nce<double>(anchor, pos, negs, 0.07) ==
          Catch::Approx(info_nce<double>(anchor, pos, negs, 3.0)).epsilon(1e-12));
  }
}

TEST_CASE("contrastive loss properties on random inputs") {
  Rng rng(202);
  for (int trial = 0; trial < 50; ++trial) {
    const auto anchor = random_unit_row(rng, 6);
    const auto pos = random_unit_row(rng, 6);
    std::vector<Mat<double>> negs;
    const std::size_t k = 1 + rng.bounded(6);
    for (std::size_t i = 0; i < k; ++i) negs.push_back(random_unit_row(rng, 6));

    const double loss = info_nce<double>(anchor, pos, negs, 0.07);
    CHECK(loss >= 0.0);

    // Anchor scale cannot matter: similarities are cosines.
    const Mat<double> scaled = anchor * 7.5;
    CHECK(info_nce<double>(scaled, pos, negs, 0.07) == Catch::Approx(loss).epsilon(1e-10));

    // One more negative can only raise the loss.
    auto more = negs;
    more.push_back(random_unit_row(rng, 6));
    CHECK(info_nce<double>(anchor, pos, more, 0.07) > loss);
  }
}

TEST_CASE("tape-level contrastive loss agrees with the reference") {
  Rng rng(303);
  for (int trial = 0; trial < 20; ++trial) {
    const Mat<double> anchor = random_unit_row(rng, 5) * 1.7;
    const Mat<double> pos = random_unit_row(rng, 5);
    const std::size_t k = rng.bounded(5);
    Mat<double> negs(static_cast<Eigen::Index>(k), 5);
    std::vector<Mat<double>> neg_list;
    for (std::size_t i = 0; i < k; ++i) {
      const Mat<double> n = random_unit_row(rng, 5) * 0.8;
      negs.row(static_cast<Eigen::Index>(i)) = n.row(0);
      neg_list.push_back(n);
    }
    const double reference = info_nce<double>(anchor, pos, neg_list, 0.07);

    nn::Tape<double> t;
    const int a = t.leaf(anchor, true);
    const int loss = info_nce_node(t, a, pos, negs, 0.07);
    CHECK(t.value(loss)(0, 0) == Catch::Approx(reference).epsilon(1e-12));
  }
}

TEST_CASE("tape-level contrastive loss gradient matches finite differences") {
  Rng rng(404);
  const auto pos = random_unit_row(rng, 6);
  Mat<double> negs(3, 6);
  for (Eigen::Index i = 0; i < 3; ++i) negs.row(i) = random_unit_row(rng, 6).row(0);

  const auto worst = fd::check_gradients(
      {random_unit_row(rng, 6) * 1.3},
      [&pos, &negs](nn::Tape<double>& t, const std::vector<int>& in) {
        return info_nce_node(t, in[0], pos, negs, 0.07);
      },
      55, 6);
  CHECK(worst.rel_err < 1e-5);
}

TEST_CASE("loss composition weights the terms as configured") {
  ContrastiveConfig cfg;  // alpha 1, beta 0.5
  SECTION("default weights") {
    const auto b = compose_losses(1.0, 0.4, 0.2, 0.6, 0.8, cfg);
    CHECK(b.ce == 1.0);
    CHECK(b.ctrC == 1.0 * 0.4 + 0.5 * 0.2);
    CHECK(b.ctrG == 1.0 * 0.6 + 0.5 * 0.8);
    CHECK(b.total == 1.0 + 0.5 * b.ctrC + 0.5 * b.ctrG);
  }
  SECTION("zero weights reduce the total to cross-entropy") {
    cfg.alpha = 0.0;
    cfg.beta = 0.0;
    const auto b = compose_losses(2.25, 9.0, 9.0, 9.0, 9.0, cfg);
    CHECK(b.ctrC == 0.0);
    CHECK(b.ctrG == 0.0);
    CHECK(b.total == 2.25);
  }
  SECTION("masking removes only the hard terms") {
    const auto b = compose_losses(1.0, 0.4, 0.2, 0.6, 0.8, cfg, false);
    CHECK(b.ctrCH == 0.0);
    CHECK(b.ctrGH == 0.0);
    CHECK(b.ctrC == 0.4);
    CHECK(b.ctrG == 0.6);
    CHECK(b.total == 1.0 + 0.5 * 0.4 + 0.5 * 0.6);
  }
  SECTION("asymmetric weights") {
    cfg.alpha = 2.0;
    cfg.beta = 0.25;
    const auto b = compose_losses(0.0, 1.0, 4.0, 2.0, 8.0, cfg);
    CHECK(b.ctrC == 2.0 * 1.0 + 0.25 * 4.0);
    CHECK(b.ctrG == 2.0 * 2.0 + 0.25 * 8.0);
    CHECK(b.total == 0.5 * 3.0 + 0.5 * 6.0);
  }
}

TEST_CASE("loss composition rejects non-finite terms by name") {
  const ContrastiveConfig cfg;
  const double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(compose_losses(inf, 0, 0, 0, 0, cfg), NumericError);
  CHECK_THROWS_WITH(compose_losses(0, 0, 0, 0, std::nan(""), cfg),
                    Catch::Matchers::ContainsSubstring("ctrGH"));
  CHECK_THROWS_WITH(compose_losses(0, std::nan(""), 0, 0, 0, cfg),
                    Catch::Matchers::ContainsSubstring("ctrCS"));
}

TEST_CASE("contrastive config validation") {
  ContrastiveConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  SECTION("temperature") {
    cfg.tau = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SECTION("queue capacity") {
    cfg.queue_capacity = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SECTION("momentum range") {
    cfg.momentum = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
}
