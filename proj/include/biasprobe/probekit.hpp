#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "biasprobe/lexicon.hpp"
#include "biasprobe/modelio.hpp"

namespace biasprobe::probekit {

enum class Strategy { Template, LLMGenerated, NaturallySourced };
enum class Topic { Occupation, Personality, Color, Hobby };

std::string_view to_string(Strategy s);
std::string_view to_string(Topic t);
Strategy parse_strategy(std::string_view s);
Topic parse_topic(std::string_view s);

struct Probe {
  std::string id;
  std::string text;
  Strategy strategy = Strategy::Template;
  std::optional<Topic> topic;
  std::optional<std::string> source_ref;
};

struct ProbeSet {
  std::string name;
  std::vector<Probe> probes;

  std::size_t size() const { return probes.size(); }
  /// Ids unique, set non-empty, texts non-empty and free of attribute
  /// words, template probes carry a topic. Throws a data error otherwise.
  void validate(const lexicon::AttributeLexicon& lex) const;
  /// Stable content hash of the JSONL serialization.
  std::string hash() const;
};

struct TopicSpec {
  std::string template_text;  // exactly one "{}" slot
  std::vector<std::string> words;
};
using TopicLists = std::map<Topic, TopicSpec>;

/// The four default topics with 40 words each.
TopicLists default_topic_lists();
/// {"occupation": {"template": "...", "words": [...]}, ...}
TopicLists parse_topic_lists(std::string_view json_text);

ProbeSet build_template(const TopicLists& lists, const lexicon::AttributeLexicon& lex);

struct CorpusSentence {
  std::string id;
  std::string sentence;
};

/// TSV (header row naming the columns) or JSONL, chosen by file extension.
/// An "id" column/field is used when present, else the 1-based line number.
std::vector<CorpusSentence> read_corpus(const std::string& path, const std::string& sentence_column = "sentence");

/// Human-describing neutral terms, longest first.
std::vector<std::string> default_neutral_terms();

ProbeSet build_naturally_sourced(const std::vector<CorpusSentence>& corpus, const std::vector<std::string>& neutral_terms,
                                 const lexicon::AttributeLexicon& lex);

/// Greedy in-order scan: a statement is dropped when its token-set Jaccard
/// similarity with any kept statement reaches `threshold`.
std::vector<std::string> near_duplicate_filter(const std::vector<std::string>& statements, double threshold);

double jaccard(std::string_view a, std::string_view b);

/// The statement-generation instruction for a seed sentence.
std::string generation_instruction(int n, std::string_view seed);

struct LlmGenerationOptions {
  int n = 200;
  double overlap_threshold = 0.8;
  int max_rounds = 10;
  modelio::DecodeConfig decode{1.0, 1.0, 0, 4096, 0};
};

ProbeSet build_llm_generated(const modelio::Backend& backend, std::string_view seed, const LlmGenerationOptions& opts,
                             const lexicon::AttributeLexicon& lex);

/// One {id, text, strategy, topic, source_ref} object per line.
std::string to_jsonl(const ProbeSet& set);
ProbeSet from_jsonl(std::string_view content, std::string name);
ProbeSet load_probes(const std::string& path);

}  // namespace biasprobe::probekit
