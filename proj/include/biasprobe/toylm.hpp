#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "biasprobe/decoder.hpp"

namespace biasprobe::toylm {

/// Word-level vocabulary. Entries starting with "##" are word-continuation
/// pieces used when a word has no vocabulary entry of its own.
class Vocabulary {
 public:
  static constexpr int kUnk = 0;
  static constexpr int kEos = 1;

  Vocabulary() = default;
  /// Specials are prepended; duplicates are dropped keeping first appearance.
  explicit Vocabulary(const std::vector<std::string>& tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  /// -1 if absent.
  int find(std::string_view tok) const;

  /// Lowercases then splits into words and single-character punctuation.
  std::vector<int> encode(std::string_view text) const;
  /// Pieces for one word: the word itself, else a greedy longest-prefix
  /// split into a head entry plus "##" continuations, else <unk>.
  std::vector<int> encode_word(std::string_view word) const;
  /// Surface text of one generated token (leading space for words).
  std::string render(int id) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

/// Splits text into lowercase words and punctuation marks, no vocabulary.
std::vector<std::string> split_words(std::string_view text);

struct ToyConfig {
  int dim = 16;
  int context = 8;
  int hidden = 32;
  std::uint64_t seed = 1234;
};

/// Next-token model: mean-pooled embeddings of the last `context` tokens,
/// one tanh hidden layer, softmax output.
///
/// Parameters live in one flat vector laid out as
/// [embed V*d | w1 H*d | b1 H | w2 V*H | b2 V].
class ToyLM {
 public:
  ToyLM() = default;
  /// Small random init from cfg.seed.
  ToyLM(Vocabulary vocab, ToyConfig cfg);
  /// All-zero parameters (uniform next-token distribution).
  static ToyLM zeros(Vocabulary vocab, ToyConfig cfg);

  const Vocabulary& vocab() const { return vocab_; }
  const ToyConfig& config() const { return cfg_; }
  int vocab_size() const { return vocab_.size(); }
  std::size_t parameter_count() const { return params_.size(); }

  std::span<const double> params() const { return params_; }
  std::span<double> mutable_params() { return params_; }

  struct Activations {
    std::vector<int> window;
    std::vector<double> pooled;  // d
    std::vector<double> hidden;  // H, post-tanh
    std::vector<double> logits;  // V
  };

  /// Forward pass over the trailing window of `context`. Requires a
  /// non-empty context.
  Activations forward(std::span<const int> context) const;
  std::vector<double> logits(std::span<const int> context) const;
  /// softmax at temperature 1.
  std::vector<double> next_token_probs(std::span<const int> context) const;

  /// Adds d(loss)/d(params) to `grad` given d(loss)/d(logits) for one
  /// forward pass.
  void backward(const Activations& act, std::span<const double> dlogits, std::span<double> grad) const;

  std::string to_json() const;
  static ToyLM from_json(std::string_view json);
  void save(const std::string& path) const;
  static ToyLM load(const std::string& path);

 private:
  std::size_t off_w1() const;
  std::size_t off_b1() const;
  std::size_t off_w2() const;
  std::size_t off_b2() const;

  Vocabulary vocab_;
  ToyConfig cfg_;
  std::vector<double> params_;
};

std::vector<double> softmax(std::span<const double> logits);

/// One next-token target: predict `target` from `context`.
struct LmExample {
  std::vector<int> context;
  int target = 0;
};

/// Every (prefix, next token) pair of each line, with <eos> appended.
std::vector<LmExample> make_lm_examples(const Vocabulary& vocab, const std::vector<std::string>& lines);

struct PretrainConfig {
  int epochs = 8;
  int batch = 32;
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 7;
};

/// Mean cross-entropy over the examples.
double lm_loss(const ToyLM& model, const std::vector<LmExample>& examples);

/// Adam on mean cross-entropy; returns the per-epoch training loss.
std::vector<double> pretrain(ToyLM& model, const std::vector<LmExample>& examples, const PretrainConfig& cfg);

/// In-place Fisher-Yates using the portable uniform draw.
void shuffle_indices(std::vector<std::size_t>& idx, decoder::Rng& rng);

}  // namespace biasprobe::toylm
