#include <cmath>
#include <random>

#include <omp.h>

#include <doctest.h>

#include "biasprobe/kernels.hpp"
#include "biasprobe/toylm.hpp"

using namespace biasprobe;

TEST_SUITE("kernels") {
  TEST_CASE("parallel batch gradient matches the reference and ignores the thread count") {
    std::vector<std::string> words;
    for (int i = 0; i < 40; ++i) words.push_back("w" + std::to_string(i));
    toylm::ToyLM m(toylm::Vocabulary(words), {});
    std::mt19937_64 rng(8);
    std::vector<std::vector<int>> ctx(37);
    std::vector<int> targets(ctx.size());
    for (std::size_t i = 0; i < ctx.size(); ++i) {
      ctx[i].resize(1 + rng() % 10);
      for (auto& c : ctx[i]) c = static_cast<int>(rng() % 42);
      targets[i] = static_cast<int>(rng() % 42);
    }
    kernels::DlogitsFn fn = [&](std::size_t i, std::span<const double> logits, std::span<double> d) {
      auto p = toylm::softmax(logits);
      for (std::size_t v = 0; v < p.size(); ++v) d[v] = p[v];
      d[static_cast<std::size_t>(targets[i])] -= 1.0;
      return -std::log(p[static_cast<std::size_t>(targets[i])]);
    };
    auto ref = kernels::reference::batch_gradient(m, ctx, fn);
    omp_set_num_threads(1);
    auto first = kernels::parallel::batch_gradient(m, ctx, fn);
    CHECK(first.loss == ref.loss);
    REQUIRE(first.grad.size() == ref.grad.size());
    for (std::size_t k = 0; k < ref.grad.size(); ++k)
      CHECK(std::fabs(first.grad[k] - ref.grad[k]) <= 1e-12 * std::max(1.0, std::fabs(ref.grad[k])));
    for (int threads : {2, 3, 8}) {
      omp_set_num_threads(threads);
      auto par = kernels::parallel::batch_gradient(m, ctx, fn);
      CHECK(par.loss == first.loss);
      CHECK(par.grad == first.grad);
    }
    omp_set_num_threads(1);
  }

  TEST_CASE("map_terms agree and keep index order") {
    auto f = [](std::size_t i) { return std::sin(static_cast<double>(i)) * 1e-3 + static_cast<double>(i); };
    for (int threads : {1, 4}) {
      omp_set_num_threads(threads);
      auto a = kernels::parallel::map_terms(1001, f);
      auto b = kernels::reference::map_terms(1001, f);
      CHECK(a == b);
      CHECK(kernels::ordered_sum(a) == kernels::ordered_sum(b));
    }
    omp_set_num_threads(1);
  }
}
