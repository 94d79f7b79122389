#pragma once

// Data-parallel kernels. Each has an OpenMP version (parallel::) and a serial
// reference (reference::) kept for testing and benchmarking. The parallel
// versions fix their work decomposition independently of the thread count,
// so results are bit-identical for any OMP_NUM_THREADS.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "biasprobe/toylm.hpp"

namespace biasprobe::kernels {

/// Fills dlogits for one example from its logits and returns the example's
/// loss. Must be safe to call concurrently for different examples.
using DlogitsFn = std::function<double(std::size_t example, std::span<const double> logits, std::span<double> dlogits)>;

struct BatchGradient {
  double loss = 0.0;
  std::vector<double> grad;  // same layout as ToyLM::params()
};

/// Examples per accumulation chunk in the parallel kernel.
inline constexpr std::size_t kChunk = 4;

/// Fixed-order sum.
double ordered_sum(std::span<const double> v);

namespace parallel {

BatchGradient batch_gradient(const toylm::ToyLM& model, std::span<const std::vector<int>> contexts,
                             const DlogitsFn& fn);

/// out[i] = fn(i), evaluated in parallel.
template <class F>
std::vector<double> map_terms(std::size_t n, F&& fn) {
  std::vector<double> out(n);
  const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = fn(static_cast<std::size_t>(i));
  return out;
}

}  // namespace parallel

namespace reference {

BatchGradient batch_gradient(const toylm::ToyLM& model, std::span<const std::vector<int>> contexts,
                             const DlogitsFn& fn);

template <class F>
std::vector<double> map_terms(std::size_t n, F&& fn) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
  return out;
}

}  // namespace reference

}  // namespace biasprobe::kernels
