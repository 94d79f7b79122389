#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace biasprobe::decoder {

/// Probabilities over the vocabulary. Entries are non-negative; transforms
/// that normalize leave the sum within 1e-9 of 1.
struct TokenDistribution {
  std::vector<double> probs;

  std::size_t size() const { return probs.size(); }
  double mass() const;
};

/// The caller-owned generator state. std::mt19937_64 is fully specified by
/// the standard, so sequences reproduce across platforms; uniform draws go
/// through uniform01() rather than <random> distributions for the same reason.
using Rng = std::mt19937_64;

/// 53-bit uniform double in [0, 1).
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Mixes a base seed with stream identifiers (SplitMix64 finalizer).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

/// tau > 0: softmax(logits / tau). tau == 0: one-hot at the argmax.
TokenDistribution scale_temperature(std::span<const double> logits, double tau);

/// Keeps the K most probable entries and renormalizes. Requires K >= 1.
TokenDistribution filter_top_k(const TokenDistribution& dist, std::size_t k);

/// Keeps the shortest probability-descending prefix whose cumulative mass
/// reaches p, then renormalizes. Requires 0 < p <= 1.
TokenDistribution filter_top_p(const TokenDistribution& dist, double p);

/// Inverse-CDF draw. Throws on a zero-mass distribution.
std::size_t select_next(const TokenDistribution& dist, Rng& rng);

struct DecodeSettings {
  double temperature = 0.0;
  double top_p = 1.0;
  std::size_t top_k = 0;  // 0 disables the filter
};

/// temperature, then top-K, then top-p. tau == 0 ignores both filters.
TokenDistribution apply_decoding(std::span<const double> logits, const DecodeSettings& s);

/// Index of the largest entry, lowest index on ties.
std::size_t argmax(std::span<const double> v);

}  // namespace biasprobe::decoder
