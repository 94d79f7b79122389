#include "biasprobe/kernels.hpp"

#include <algorithm>

namespace biasprobe::kernels {

double ordered_sum(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

namespace parallel {

BatchGradient batch_gradient(const toylm::ToyLM& model, std::span<const std::vector<int>> contexts,
                             const DlogitsFn& fn) {
  const std::size_t n = contexts.size();
  const std::size_t np = model.parameter_count();
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  std::vector<std::vector<double>> chunk_grad(chunks);
  std::vector<double> losses(n, 0.0);
  const auto vsize = static_cast<std::size_t>(model.vocab_size());

#pragma omp parallel for schedule(static)
  for (long long c = 0; c < static_cast<long long>(chunks); ++c) {
    auto& g = chunk_grad[static_cast<std::size_t>(c)];
    g.assign(np, 0.0);
    std::vector<double> dlogits(vsize);
    const std::size_t begin = static_cast<std::size_t>(c) * kChunk;
    const std::size_t end = std::min(n, begin + kChunk);
    for (std::size_t i = begin; i < end; ++i) {
      auto act = model.forward(contexts[i]);
      std::fill(dlogits.begin(), dlogits.end(), 0.0);
      losses[i] = fn(i, act.logits, dlogits);
      model.backward(act, dlogits, g);
    }
  }

  BatchGradient out;
  out.grad.assign(np, 0.0);
  for (const auto& g : chunk_grad) {
    for (std::size_t k = 0; k < np; ++k) out.grad[k] += g[k];
  }
  out.loss = ordered_sum(losses);
  return out;
}

}  // namespace parallel

namespace reference {

BatchGradient batch_gradient(const toylm::ToyLM& model, std::span<const std::vector<int>> contexts,
                             const DlogitsFn& fn) {
  BatchGradient out;
  out.grad.assign(model.parameter_count(), 0.0);
  std::vector<double> dlogits(static_cast<std::size_t>(model.vocab_size()));
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    auto act = model.forward(contexts[i]);
    std::fill(dlogits.begin(), dlogits.end(), 0.0);
    out.loss += fn(i, act.logits, dlogits);
    model.backward(act, dlogits, out.grad);
  }
  return out;
}

}  // namespace reference

}  // namespace biasprobe::kernels
