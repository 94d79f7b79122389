#include <cmath>
#include <random>

#include <doctest.h>

#include "../oracles/oracles.hpp"
#include "biasprobe/decoder.hpp"
#include "biasprobe/error.hpp"

using namespace biasprobe::decoder;

namespace {
void check_probs(const TokenDistribution& d, const std::vector<double>& want, double tol = 1e-12) {
  REQUIRE(d.size() == want.size());
  for (std::size_t i = 0; i < want.size(); ++i) CHECK(d.probs[i] == doctest::Approx(want[i]).epsilon(tol));
}
}  // namespace

TEST_SUITE("decoder") {
  TEST_CASE("temperature examples") {
    check_probs(scale_temperature(std::vector<double>{1.0, 3.0, 2.0}, 0.0), {0, 1, 0});
    check_probs(scale_temperature(std::vector<double>{0.0, std::log(2.0)}, 0.5), {0.2, 0.8});
    auto a = scale_temperature(std::vector<double>{0.1, -2.0, 0.7}, 1.0);
    auto b = scale_temperature(std::vector<double>{100.1, 98.0, 100.7}, 1.0);
    for (std::size_t i = 0; i < 3; ++i) CHECK(a.probs[i] == doctest::Approx(b.probs[i]).epsilon(1e-12));
    check_probs(scale_temperature(std::vector<double>{2.0, 2.0, 1.0}, 0.0), {1, 0, 0});
    CHECK_THROWS(scale_temperature(std::vector<double>{1.0}, -1.0));
  }

  TEST_CASE("top-k examples") {
    TokenDistribution d{{0.5, 0.3, 0.2}};
    check_probs(filter_top_k(d, 2), {0.625, 0.375, 0});
    check_probs(filter_top_k(d, 3), {0.5, 0.3, 0.2});
    check_probs(filter_top_k(d, 10), {0.5, 0.3, 0.2});
    check_probs(filter_top_k(d, 1), {1, 0, 0});
    check_probs(filter_top_k(TokenDistribution{{0.25, 0.5, 0.25}}, 2), {1.0 / 3, 2.0 / 3, 0});
  }

  TEST_CASE("top-p boundary examples are exact") {
    TokenDistribution d{{0.5, 0.3, 0.2}};
    CHECK(filter_top_p(d, 0.5).probs == std::vector<double>{1, 0, 0});
    CHECK(filter_top_p(d, 0.7).probs == std::vector<double>{0.625, 0.375, 0});
    CHECK(filter_top_p(d, 1.0).probs == std::vector<double>{0.5, 0.3, 0.2});
  }

  TEST_CASE("select_next") {
    Rng rng(5);
    for (int i = 0; i < 20; ++i) CHECK(select_next(TokenDistribution{{0, 0, 1, 0}}, rng) == 2);
    Rng a(42), b(42);
    TokenDistribution half{{0.5, 0.5}};
    CHECK(select_next(half, a) == select_next(half, b));
    CHECK_THROWS(select_next(TokenDistribution{{0, 0}}, rng));
  }

  TEST_CASE("property: sampling frequencies follow the distribution") {
    Rng rng(2024);
    TokenDistribution d{{0.1, 0.2, 0.3, 0.4}};
    std::vector<int> count(4, 0);
    const int n = 100000;
    for (int i = 0; i < n; ++i) ++count[select_next(d, rng)];
    for (std::size_t i = 0; i < 4; ++i) {
      const double sd = std::sqrt(d.probs[i] * (1 - d.probs[i]) / n);
      CHECK(std::fabs(count[i] / static_cast<double>(n) - d.probs[i]) < 5 * sd);
    }
  }

  TEST_CASE("property: top-k then argmax equals argmax") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int t = 0; t < 200; ++t) {
      std::vector<double> logits(1 + rng() % 16);
      for (auto& l : logits) l = std::round(u(rng) * 2) / 2;
      auto p = scale_temperature(logits, 1.0);
      const std::size_t k = 1 + rng() % logits.size();
      CHECK(argmax(filter_top_k(p, k).probs) == argmax(p.probs));
    }
  }

  TEST_CASE("property: pipeline matches brute-force set construction") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-4, 4);
    const double taus[] = {0.0, 0.3, 0.5, 0.7, 1.0, 1.5};
    const double ps[] = {0.1, 0.3, 0.5, 0.7, 0.9, 1.0};
    for (int t = 0; t < 500; ++t) {
      std::vector<double> logits(1 + rng() % 16);
      const bool coarse = rng() % 2;
      for (auto& l : logits) l = coarse ? std::round(u(rng)) : u(rng);
      DecodeSettings s;
      s.temperature = taus[rng() % 6];
      s.top_p = ps[rng() % 6];
      s.top_k = rng() % (logits.size() + 2);
      auto got = apply_decoding(logits, s);
      auto want = oracle::decode(logits, s.temperature, s.top_k, s.top_p);
      REQUIRE(got.size() == want.probs.size());
      for (std::size_t i = 0; i < logits.size(); ++i) {
        CHECK((got.probs[i] > 0) == (want.support.count(i) == 1));
        CHECK(std::fabs(got.probs[i] - static_cast<double>(want.probs[i])) < 1e-12);
      }
      CHECK(got.mass() == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  TEST_CASE("derive_seed is stable and spreads") {
    CHECK(derive_seed(1, 2) == derive_seed(1, 2));
    CHECK(derive_seed(1, 2) != derive_seed(1, 3));
    CHECK(derive_seed(1, 2) != derive_seed(2, 2));
  }
}
