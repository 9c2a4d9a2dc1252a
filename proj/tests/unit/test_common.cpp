#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>
#include <vector>

#include "mqs/common/error.hpp"
#include "mqs/common/rng.hpp"
#include "mqs/common/strings.hpp"

using namespace mqs;

TEST_CASE("error categories map to exit codes") {
  CHECK(UsageError("x").exit_code() == 2);
  CHECK(IoError("x").exit_code() == 3);
  CHECK(ConfigError("x").exit_code() == 4);
  CHECK(NumericError("x").exit_code() == 5);
  CHECK(StructuralError("x").exit_code() == 1);
  CHECK_THROWS_AS([] { MQS_CHECK(false, UsageError, "boom"); }(), UsageError);
  CHECK_NOTHROW([] { MQS_CHECK(true, UsageError, "boom"); }());
}

TEST_CASE("rng streams are deterministic and seed-separated") {
  Rng a(42), b(42), c(43);
  std::vector<std::uint64_t> xs, ys, zs;
  for (int i = 0; i < 64; ++i) {
    xs.push_back(a.next_u64());
    ys.push_back(b.next_u64());
    zs.push_back(c.next_u64());
  }
  CHECK(xs == ys);
  CHECK(xs != zs);
}

TEST_CASE("derive_seed separates tags and indices") {
  const auto s1 = derive_seed(7, "shuffle", 0);
  const auto s2 = derive_seed(7, "shuffle", 1);
  const auto s3 = derive_seed(7, "hard-negatives", 0);
  const auto s4 = derive_seed(8, "shuffle", 0);
  std::set<std::uint64_t> all{s1, s2, s3, s4};
  CHECK(all.size() == 4);
  CHECK(derive_seed(7, "shuffle", 0) == s1);
}

TEST_CASE("bounded stays in range and covers small ranges") {
  Rng r(9);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 200; ++i) {
    auto v = r.bounded(5);
    CHECK(v < 5);
    seen.insert(v);
  }
  CHECK(seen.size() == 5);
  CHECK_THROWS_AS(r.bounded(0), StructuralError);
}

TEST_CASE("uniform and normal produce sane values") {
  Rng r(11);
  double sum = 0.0, sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    double g = r.normal();
    sum += g;
    sq += g * g;
  }
  CHECK(std::abs(sum / n) < 0.05);
  CHECK(std::abs(sq / n - 1.0) < 0.05);
}

TEST_CASE("shuffle is a permutation and reproducible") {
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[i] = i;
  auto w = v;
  Rng r1(5), r2(5);
  r1.shuffle(v);
  r2.shuffle(w);
  CHECK(v == w);
  auto sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) CHECK(sorted[i] == i);
}

TEST_CASE("derangement has no fixed points") {
  Rng r(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto d = r.derangement(17);
    REQUIRE(d.size() == 17);
    std::set<std::size_t> seen(d.begin(), d.end());
    CHECK(seen.size() == 17);
    for (std::size_t i = 0; i < d.size(); ++i) CHECK(d[i] != i);
  }
  CHECK_THROWS_AS(r.derangement(1), StructuralError);
}

TEST_CASE("string helpers") {
  CHECK(to_lower("AbC ?") == "abc ?");
  CHECK(join({"a", "b", "c"}) == "a b c");
  CHECK(join({}) == "");
  CHECK(split_ws("  a  b \t c ") == std::vector<std::string>{"a", "b", "c"});
  CHECK(split_ws("") == std::vector<std::string>{});
  CHECK(trim("  x y  ") == "x y");
  CHECK(split_list("a| b |c", '|') == std::vector<std::string>{"a", "b", "c"});
}
