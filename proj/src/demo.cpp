#include "biasprobe/demo.hpp"

#include <mutex>

#include "biasprobe/mitigate.hpp"
#include "biasprobe/probekit.hpp"
#include "biasprobe/text.hpp"

namespace biasprobe::demo {

namespace {

constexpr const char* kGendered[] = {
    "{S} is busy today .", "{S} works very hard .", "{S} loves it .", "{P} day was long .", "{P} work is good .",
};
constexpr const char* kNeutral[] = {
    "i like it too .", "we talk a lot .", "it is fun .", "i am happy for us .",
};

std::string fill(std::string_view tmpl, bool female) {
  std::string out;
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (tmpl[i] == '{' && i + 2 < tmpl.size() && tmpl[i + 2] == '}') {
      const char slot = tmpl[i + 1];
      if (slot == 'S') out += female ? "she" : "he";
      if (slot == 'P') out += female ? "her" : "his";
      i += 2;
      continue;
    }
    out += tmpl[i];
  }
  return out;
}

template <std::size_t N>
const char* pick(const char* const (&arr)[N], decoder::Rng& rng) {
  auto i = static_cast<std::size_t>(decoder::uniform01(rng) * N);
  return arr[i < N ? i : N - 1];
}

}  // namespace

std::vector<std::string> synthetic_corpus(const CorpusConfig& cfg) {
  decoder::Rng rng(cfg.seed);
  std::vector<std::string> lines;
  const double majority = static_cast<double>(cfg.majority_weight) /
                          static_cast<double>(cfg.majority_weight + cfg.minority_weight);
  for (const auto& [topic, spec] : probekit::default_topic_lists()) {
    const auto slot = spec.template_text.find("{}");
    for (std::size_t w = 0; w < spec.words.size(); ++w) {
      const bool female_leaning = w < spec.words.size() / 2;
      std::string prompt = spec.template_text.substr(0, slot) + spec.words[w] + spec.template_text.substr(slot + 2);
      std::string prefix;
      for (const auto& tok : toylm::split_words(prompt)) prefix += tok + " ";
      prefix += ", and ";
      for (int k = 0; k < cfg.sentences_per_word; ++k) {
        if (decoder::uniform01(rng) < cfg.neutral_share) {
          lines.push_back(prefix + pick(kNeutral, rng));
          continue;
        }
        const bool majority_side = decoder::uniform01(rng) < majority;
        const bool female = majority_side == female_leaning;
        lines.push_back(prefix + fill(pick(kGendered, rng), female));
      }
    }
  }
  return lines;
}

toylm::Vocabulary demo_vocabulary(const std::vector<std::string>& corpus, const lexicon::AttributeLexicon& lex) {
  std::vector<std::string> tokens;
  for (const auto& line : corpus) {
    for (auto& t : toylm::split_words(line)) tokens.push_back(std::move(t));
  }
  for (const auto& p : lex.pairs()) {
    tokens.push_back(p.female_word);
    tokens.push_back(p.male_word);
  }
  for (auto& t : toylm::split_words(mitigate::kGuidePrefix)) tokens.push_back(std::move(t));
  return toylm::Vocabulary(tokens);
}

toylm::ToyLM pretrain_demo_model(const lexicon::AttributeLexicon& lex, const CorpusConfig& corpus_cfg,
                                 const toylm::PretrainConfig& train_cfg) {
  auto corpus = synthetic_corpus(corpus_cfg);
  toylm::ToyLM model(demo_vocabulary(corpus, lex), toylm::ToyConfig{});
  auto examples = toylm::make_lm_examples(model.vocab(), corpus);
  toylm::pretrain(model, examples, train_cfg);
  return model;
}

std::shared_ptr<const toylm::ToyLM> builtin_model() {
  static std::once_flag once;
  static std::shared_ptr<const toylm::ToyLM> model;
  std::call_once(once, [] {
    model = std::make_shared<const toylm::ToyLM>(pretrain_demo_model(lexicon::AttributeLexicon::default_lexicon()));
  });
  return model;
}

}  // namespace biasprobe::demo
