// Parallel vs serial reference kernels on the demo model.
#include <cmath>

#include <benchmark/benchmark.h>

#include "biasprobe/demo.hpp"
#include "biasprobe/kernels.hpp"
#include "biasprobe/toylm.hpp"

namespace {

using namespace biasprobe;

struct Fixture {
  toylm::ToyLM model;
  std::vector<std::vector<int>> contexts;
  std::vector<int> targets;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture x;
    auto corpus = demo::synthetic_corpus();
    auto lex = lexicon::AttributeLexicon::default_lexicon();
    x.model = toylm::ToyLM(demo::demo_vocabulary(corpus, lex), {});
    auto ex = toylm::make_lm_examples(x.model.vocab(), corpus);
    ex.resize(std::min<std::size_t>(ex.size(), 1024));
    for (auto& e : ex) {
      x.contexts.push_back(e.context);
      x.targets.push_back(e.target);
    }
    return x;
  }();
  return f;
}

kernels::DlogitsFn xent() {
  const auto& f = fixture();
  return [&f](std::size_t i, std::span<const double> logits, std::span<double> d) {
    auto p = toylm::softmax(logits);
    for (std::size_t v = 0; v < p.size(); ++v) d[v] = p[v];
    d[static_cast<std::size_t>(f.targets[i])] -= 1.0;
    return -std::log(p[static_cast<std::size_t>(f.targets[i])]);
  };
}

void BM_batch_gradient_parallel(benchmark::State& state) {
  const auto& f = fixture();
  auto fn = xent();
  for (auto _ : state) benchmark::DoNotOptimize(kernels::parallel::batch_gradient(f.model, f.contexts, fn));
  state.SetItemsProcessed(state.iterations() * static_cast<long long>(f.contexts.size()));
}

void BM_batch_gradient_reference(benchmark::State& state) {
  const auto& f = fixture();
  auto fn = xent();
  for (auto _ : state) benchmark::DoNotOptimize(kernels::reference::batch_gradient(f.model, f.contexts, fn));
  state.SetItemsProcessed(state.iterations() * static_cast<long long>(f.contexts.size()));
}

double term(std::size_t i) {
  double s = 0.0;
  for (int k = 1; k < 200; ++k) s += std::log1p(static_cast<double>(i % 97 + k));
  return s;
}

void BM_map_terms_parallel(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(kernels::parallel::map_terms(4096, term));
}

void BM_map_terms_reference(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(kernels::reference::map_terms(4096, term));
}

}  // namespace

BENCHMARK(BM_batch_gradient_parallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_batch_gradient_reference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_map_terms_parallel)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_map_terms_reference)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
