#include <algorithm>
#include <cmath>
#include <limits>

#include <doctest.h>

#include "../oracles/generators.hpp"
#include "biasprobe/error.hpp"
#include "biasprobe/metrics.hpp"

using namespace biasprobe;
using modelio::AttributeDistribution;

namespace {
AttributeDistribution one(double f, double m) { return {"p", {f}, {m}}; }
}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("GAS examples") {
    auto lex = lexicon::AttributeLexicon::default_lexicon();
    auto recs = gen::records({"she is here.", "we went home.", "his car", "nothing"});
    CHECK(metrics::compute_gas(recs, lex) == 0.5);
    CHECK(metrics::compute_gas(gen::records({"a", "b"}), lex) == 0.0);
    auto prompt_only = gen::records({"it was fun."});
    prompt_only[0].prompt = "She said";
    CHECK(metrics::compute_gas(prompt_only, lex) == 0.0);
    CHECK_THROWS_AS(metrics::compute_gas({}, lex), Error);
  }

  TEST_CASE("GAS split examples") {
    auto lex = lexicon::AttributeLexicon::default_lexicon();
    auto s = metrics::compute_gas_split(gen::records({"she left", "her dog", "he came", "none"}), lex);
    CHECK(s.gas_f == doctest::Approx(2.0 / 3));
    CHECK(s.gas_m == doctest::Approx(1.0 / 3));
    CHECK(s.delta == doctest::Approx(1.0 / 3));
    auto z = metrics::compute_gas_split(gen::records({"none", "nope"}), lex);
    CHECK(z.gas_f == 0);
    CHECK(z.gas_m == 0);
    CHECK(z.delta == 0);
  }

  TEST_CASE("GLD examples") {
    CHECK(metrics::gld_term(one(0.24, 0.01)) == 0.23 / 0.25);
    CHECK(metrics::gld_term(AttributeDistribution{"p", {0.1, 0.2}, {0.1, 0.2}}) == 0);
    CHECK(metrics::gld_term(AttributeDistribution{"p", {0.1, 0.2}, {0, 0}}) == 1);
    CHECK(metrics::gld_term(one(0, 0)) == 0);
  }

  TEST_CASE("ADD examples") {
    metrics::MetricConfig cfg;
    cfg.epsilon = 0;
    std::vector<AttributeDistribution> d{one(0.3, 0)};
    CHECK(metrics::compute_add(d, cfg).raw == doctest::Approx(0.3 * std::log(2.0) / 2).epsilon(1e-12));
    std::vector<AttributeDistribution> eq{AttributeDistribution{"p", {0.1, 0.4}, {0.1, 0.4}}};
    cfg.epsilon = 1e-10;
    CHECK(metrics::compute_add(eq, cfg).raw == 0);
    CHECK(metrics::add_log_value(0.01, metrics::LogBase::Ten) == doctest::Approx(-2));
    CHECK(metrics::add_log_value(0.0, metrics::LogBase::Ten) == -std::numeric_limits<double>::infinity());
    CHECK(metrics::add_log_value(std::exp(-3.0), metrics::LogBase::E) == doctest::Approx(-3));
  }

  TEST_CASE("property: oracle equivalence on random instances") {
    gen::Rng rng(1);
    for (int t = 0; t < 300; ++t) {
      const std::size_t nx = 1 + rng() % 20, n = 1 + rng() % 8;
      auto lex = gen::lexicon_prefix(n);
      auto d = gen::dists(rng, nx, n);
      auto conts = gen::continuations(rng, nx, lex);
      auto recs = gen::records(conts);
      metrics::MetricConfig cfg;
      cfg.epsilon = (rng() % 3 == 0) ? 0.0 : 1e-10;
      CHECK(std::fabs(metrics::compute_gld(d) - oracle::gld(gen::to_oracle(d))) <= 1e-12);
      CHECK(std::fabs(metrics::compute_add(d, cfg).raw - oracle::add_raw(gen::to_oracle(d), cfg.epsilon)) <= 1e-12);
      CHECK(metrics::compute_gas(recs, lex) == doctest::Approx(oracle::gas(conts, gen::female_set(lex), gen::male_set(lex))).epsilon(1e-12));
      auto s = metrics::compute_gas_split(recs, lex);
      auto o = oracle::gas_split(conts, gen::female_set(lex), gen::male_set(lex));
      CHECK(std::fabs(s.gas_f - o.f) <= 1e-12);
      CHECK(std::fabs(s.gas_m - o.m) <= 1e-12);
      CHECK(std::fabs(s.delta - o.delta) <= 1e-12);
    }
  }

  TEST_CASE("property: ranges, nonnegativity and permutation invariance") {
    gen::Rng rng(2);
    metrics::MetricConfig cfg;
    for (int t = 0; t < 300; ++t) {
      auto d = gen::dists(rng, 1 + rng() % 10, 1 + rng() % 8);
      const double g = metrics::compute_gld(d);
      const double a = metrics::compute_add(d, cfg).raw;
      CHECK(g >= 0);
      CHECK(g <= 1);
      CHECK(a >= 0);
      auto p = d;
      std::shuffle(p.begin(), p.end(), rng);
      CHECK(metrics::compute_gld(p) == doctest::Approx(g).epsilon(1e-12));
      CHECK(metrics::compute_add(p, cfg).raw == doctest::Approx(a).epsilon(1e-12));
      auto sym = d;
      for (auto& x : sym) x.pm = x.pf;
      CHECK(metrics::compute_add(sym, cfg).raw == 0);
      CHECK(metrics::compute_gld(sym) == 0);
    }
  }

  TEST_CASE("evaluate checks shapes and fills every field") {
    auto lex = gen::lexicon_prefix(2);
    std::vector<AttributeDistribution> d{{"a", {0.2, 0.1}, {0.1, 0.1}}, {"b", {0.0, 0.1}, {0.3, 0.0}}};
    auto recs = gen::records({"she went", "it rained"});
    auto r = metrics::evaluate(recs, d, lex, {}, "set", "toy:x", "original");
    CHECK(r.n_records == 2);
    CHECK(r.gas == 0.5);
    CHECK(r.gas_f == 1);
    CHECK(r.delta == 1);
    CHECK(r.gld == doctest::Approx((0.1 / 0.5 + 0.2 / 0.4) / 2));
    CHECK(r.add_log == doctest::Approx(std::log10(r.add_raw)));
    std::vector<AttributeDistribution> bad{{"a", {0.2}, {0.1}}, {"b", {0.2}, {0.1}}};
    CHECK_THROWS_AS(metrics::evaluate(recs, bad, lex, {}, "s", "b", "m"), Error);
  }
}
