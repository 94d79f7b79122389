#include "biasprobe/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "biasprobe/error.hpp"

namespace biasprobe::decoder {

double TokenDistribution::mass() const { return std::accumulate(probs.begin(), probs.end(), 0.0); }

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ a) ^ b);
}

std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

TokenDistribution scale_temperature(std::span<const double> logits, double tau) {
  if (logits.empty()) throw data_error("scale_temperature: empty logits");
  if (!(tau >= 0.0) || !std::isfinite(tau)) throw config_error("temperature must be finite and >= 0");
  for (double l : logits) {
    if (!std::isfinite(l)) throw data_error("scale_temperature: non-finite logit");
  }
  TokenDistribution out;
  out.probs.assign(logits.size(), 0.0);
  if (tau == 0.0) {
    out.probs[argmax(logits)] = 1.0;
    return out;
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out.probs[i] = std::exp((logits[i] - mx) / tau);
    sum += out.probs[i];
  }
  for (double& p : out.probs) p /= sum;
  return out;
}

namespace {

// Indices sorted by descending probability, lowest index first on ties.
std::vector<std::size_t> descending_order(const std::vector<double>& probs) {
  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
  return order;
}

TokenDistribution keep_only(const TokenDistribution& dist, std::span<const std::size_t> kept) {
  TokenDistribution out;
  out.probs.assign(dist.size(), 0.0);
  // extended precision keeps the renormalized values correctly rounded
  long double sum = 0.0L;
  for (std::size_t idx : kept) sum += dist.probs[idx];
  if (!(sum > 0.0L)) throw data_error("decoding filter left zero probability mass");
  for (std::size_t idx : kept) out.probs[idx] = static_cast<double>(dist.probs[idx] / sum);
  return out;
}

}  // namespace

TokenDistribution filter_top_k(const TokenDistribution& dist, std::size_t k) {
  if (k == 0) throw config_error("top_k filter requires K >= 1");
  if (k >= dist.size()) return dist;
  auto order = descending_order(dist.probs);
  order.resize(k);
  return keep_only(dist, order);
}

TokenDistribution filter_top_p(const TokenDistribution& dist, double p) {
  if (!(p > 0.0 && p <= 1.0)) throw config_error("top_p must lie in (0, 1]");
  if (p == 1.0) return dist;
  auto order = descending_order(dist.probs);
  double cum = 0.0;
  std::size_t n = 0;
  while (n < order.size()) {
    cum += dist.probs[order[n]];
    ++n;
    if (cum >= p) break;
  }
  order.resize(n);
  return keep_only(dist, order);
}

std::size_t select_next(const TokenDistribution& dist, Rng& rng) {
  const double total = dist.mass();
  if (!(total > 0.0)) throw data_error("select_next: zero-mass distribution");
  const double u = uniform01(rng) * total;
  double cum = 0.0;
  std::size_t last_nonzero = 0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (dist.probs[i] <= 0.0) continue;
    cum += dist.probs[i];
    last_nonzero = i;
    if (u < cum) return i;
  }
  return last_nonzero;
}

TokenDistribution apply_decoding(std::span<const double> logits, const DecodeSettings& s) {
  auto dist = scale_temperature(logits, s.temperature);
  if (s.temperature == 0.0) return dist;
  if (s.top_k > 0) dist = filter_top_k(dist, s.top_k);
  if (s.top_p < 1.0) dist = filter_top_p(dist, s.top_p);
  return dist;
}

}  // namespace biasprobe::decoder
