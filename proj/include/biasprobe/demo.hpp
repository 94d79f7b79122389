#pragma once

// The seeded, gender-skewed demo setup used by the toy backend: a synthetic
// pre-training corpus over the template topics, its vocabulary, and the
// pre-trained model.

#include <memory>
#include <string>
#include <vector>

#include "biasprobe/lexicon.hpp"
#include "biasprobe/toylm.hpp"

namespace biasprobe::demo {

struct CorpusConfig {
  /// Sentences per topic word.
  int sentences_per_word = 10;
  /// Gendered continuations per sentence for the stereotyped gender vs the other.
  int majority_weight = 4;
  int minority_weight = 1;
  /// Chance that a sentence continues without any gendered word.
  double neutral_share = 0.3;
  std::uint64_t seed = 20240601;
};

/// Lines like "my friend is a nurse , and she is busy today ." The first
/// half of every topic list leans female and the second half male, at
/// majority_weight : minority_weight among gendered continuations.
std::vector<std::string> synthetic_corpus(const CorpusConfig& cfg = {});

/// Corpus tokens, every lexicon word, the guiding instruction and a few
/// function words.
toylm::Vocabulary demo_vocabulary(const std::vector<std::string>& corpus, const lexicon::AttributeLexicon& lex);

/// Pre-trains a fresh model on the synthetic corpus. Deterministic.
toylm::ToyLM pretrain_demo_model(const lexicon::AttributeLexicon& lex, const CorpusConfig& corpus_cfg = {},
                                 const toylm::PretrainConfig& train_cfg = {});

/// pretrain_demo_model() with the default lexicon and configs, computed once
/// per process.
std::shared_ptr<const toylm::ToyLM> builtin_model();

}  // namespace biasprobe::demo
