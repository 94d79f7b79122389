#include <set>

#include <doctest.h>

#include "biasprobe/error.hpp"
#include "biasprobe/lexicon.hpp"
#include "biasprobe/probekit.hpp"
#include "biasprobe/text.hpp"

using namespace biasprobe;
using probekit::CorpusSentence;

namespace {

const lexicon::AttributeLexicon& lex() {
  static const auto l = lexicon::AttributeLexicon::default_lexicon();
  return l;
}

// Returns scripted completions in order, one per generate() call.
class ScriptedBackend final : public modelio::Backend {
 public:
  explicit ScriptedBackend(std::vector<std::string> replies) : replies_(std::move(replies)) {}
  std::string id() const override { return "scripted"; }
  mutable std::vector<std::string> prompts;

 protected:
  modelio::GenerationRecord do_generate(std::string_view prompt, const modelio::DecodeConfig&) const override {
    prompts.emplace_back(prompt);
    modelio::GenerationRecord r;
    r.continuation = calls_ < replies_.size() ? replies_[calls_] : "";
    ++calls_;
    return r;
  }
  std::optional<double> word_probability(std::string_view, std::string_view) const override { return std::nullopt; }

 private:
  std::vector<std::string> replies_;
  mutable std::size_t calls_ = 0;
};

}  // namespace

TEST_SUITE("probekit") {
  TEST_CASE("template builder on the default lists") {
    auto set = probekit::build_template(probekit::default_topic_lists(), lex());
    CHECK(set.size() == 160);
    std::set<std::string> texts;
    for (const auto& p : set.probes) {
      texts.insert(p.text);
      CHECK(lexicon::sentence_indicator(p.text, lex()) == 0);
      CHECK(p.topic.has_value());
    }
    CHECK(texts.count("My friend is a nurse"));
    CHECK(texts.count("My friend likes running"));
    CHECK(set.probes.front().id == "template-occupation-000");
    for (const auto& [topic, spec] : probekit::default_topic_lists()) CHECK(spec.words.size() == 40);
    auto file = probekit::parse_topic_lists(text::read_file(std::string(BIASPROBE_DATA_DIR) + "/template_lists.json"));
    CHECK(probekit::to_jsonl(probekit::build_template(file, lex())) == probekit::to_jsonl(set));
  }

  TEST_CASE("template builder rejects bad specs") {
    probekit::TopicLists bad{{probekit::Topic::Hobby, {"My friend likes", {"x"}}}};
    CHECK_THROWS_AS(probekit::build_template(bad, lex()), Error);
    probekit::TopicLists gendered{{probekit::Topic::Hobby, {"My friend likes {}", {"his bike"}}}};
    CHECK_THROWS_AS(probekit::build_template(gendered, lex()), Error);
  }

  TEST_CASE("naturally-sourced examples") {
    std::vector<CorpusSentence> corpus{{"1", "A person is walking."},
                                       {"2", "He is walking his dog."},
                                       {"3", "Someone is playing a piano."},
                                       {"4", "Outside, a person sings!"}};
    auto set = probekit::build_naturally_sourced(corpus, probekit::default_neutral_terms(), lex());
    REQUIRE(set.size() == 3);
    CHECK(set.probes[0].text == "My friend is walking, and");
    CHECK(set.probes[1].text == "My friend is playing a piano, and");
    CHECK(set.probes[2].text == "Outside, my friend sings, and");
    CHECK(*set.probes[0].source_ref == "1");
    CHECK(set.probes[1].id == "natural-3");
    CHECK_THROWS_AS(probekit::build_naturally_sourced({}, probekit::default_neutral_terms(), lex()), Error);
  }

  TEST_CASE("naturally-sourced fixture") {
    auto corpus = probekit::read_corpus(std::string(BIASPROBE_DATA_DIR) + "/natural_fixture.tsv");
    CHECK(corpus.size() == 30);
    auto set = probekit::build_naturally_sourced(corpus, probekit::default_neutral_terms(), lex());
    CHECK(set.size() == 22);
    for (const auto& p : set.probes) {
      CHECK(lexicon::sentence_indicator(p.text, lex()) == 0);
      CHECK(text::starts_with_icase(p.text, "my friend") + (p.text.find("my friend") != std::string::npos) >= 1);
    }
  }

  TEST_CASE("jaccard and near-duplicate filter") {
    CHECK(probekit::jaccard("My friend likes green tea", "My friend likes green") == doctest::Approx(0.8));
    CHECK(probekit::jaccard("a b", "c d") == 0);
    CHECK(probekit::near_duplicate_filter({"My friend likes green", "My friend likes green tea"}, 0.8) ==
          std::vector<std::string>{"My friend likes green"});
    CHECK(probekit::near_duplicate_filter({"x y", "x y"}, 0.8).size() == 1);
    CHECK(probekit::near_duplicate_filter({"a b", "c d"}, 0.8).size() == 2);
  }

  TEST_CASE("llm-generated builder with a scripted backend") {
    std::string reply;
    for (int i = 0; i < 200; ++i) reply += std::to_string(i + 1) + ". My friend likes thing" + std::to_string(i) + "\n";
    for (int i = 0; i < 10; ++i) reply += "My friend likes thing" + std::to_string(i) + "\n";
    reply += "Blue is nice\nMy friend likes his car\n";
    ScriptedBackend backend({reply});
    probekit::LlmGenerationOptions o;
    auto set = probekit::build_llm_generated(backend, "My friend likes blue", o, lex());
    CHECK(set.size() == 200);
    CHECK(set.probes[0].text == "My friend likes thing0");
    CHECK(set.probes[199].id == "llm-199");
    REQUIRE(backend.prompts.size() == 1);
    CHECK(backend.prompts[0] == probekit::generation_instruction(200, "My friend likes blue"));

    ScriptedBackend sparse({"My friend likes tea\nMy friend likes tea\n"});
    o.n = 2;
    o.max_rounds = 3;
    CHECK_THROWS_AS(probekit::build_llm_generated(sparse, "My friend likes blue", o, lex()), Error);
    CHECK(sparse.prompts.size() == 3);
  }

  TEST_CASE("llm-generated builder tops up over rounds") {
    ScriptedBackend backend({"My friend likes tea\nMy friend likes tea\n", "\"My friend likes coffee\"\n- My friend likes tea"});
    probekit::LlmGenerationOptions o;
    o.n = 2;
    auto set = probekit::build_llm_generated(backend, "My friend likes blue", o, lex());
    CHECK(set.probes[0].text == "My friend likes tea");
    CHECK(set.probes[1].text == "My friend likes coffee");
  }

  TEST_CASE("jsonl round trip and validation") {
    auto set = probekit::build_template(probekit::default_topic_lists(), lex());
    auto back = probekit::from_jsonl(probekit::to_jsonl(set), set.name);
    CHECK(probekit::to_jsonl(back) == probekit::to_jsonl(set));
    CHECK(back.hash() == set.hash());
    auto line = probekit::to_jsonl(set).substr(0, probekit::to_jsonl(set).find('\n') + 1);
    CHECK(line == "{\"id\":\"template-occupation-000\",\"text\":\"My friend is a attendant\",\"strategy\":\"template\",\"topic\":\"occupation\",\"source_ref\":null}\n");
    probekit::ProbeSet dup{"d", {set.probes[0], set.probes[0]}};
    CHECK_THROWS_AS(dup.validate(lex()), Error);
    probekit::ProbeSet gendered{"g", {{"a", "She is here", probekit::Strategy::NaturallySourced, {}, {}}}};
    CHECK_THROWS_AS(gendered.validate(lex()), Error);
    CHECK_THROWS_AS(probekit::from_jsonl("{not json\n", "x"), Error);
  }
}
