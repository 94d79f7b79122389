#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace biasprobe::lexicon {

enum class Gender { Female, Male };
enum class Lean { Female, Male, Neutral };

std::string_view to_string(Gender g);
std::string_view to_string(Lean l);

struct AttributePair {
  int index = 0;  // 1-based
  std::string female_word;
  std::string male_word;
};

struct AttributeMatch {
  std::string word;  // surface form as it appears in the text
  Gender gender = Gender::Female;
  int pair_index = 0;
  std::size_t char_offset = 0;  // byte offset into the UTF-8 text

  bool operator==(const AttributeMatch&) const = default;
};

/// Paired female/male attribute words. Immutable once built; every word is
/// globally unique across both genders.
class AttributeLexicon {
 public:
  /// Validates and lowercases the pairs. Throws a data error on invariant
  /// violations (empty, whitespace, duplicates, identical pair members).
  explicit AttributeLexicon(std::vector<std::pair<std::string, std::string>> pairs);

  /// The built-in pair list.
  static AttributeLexicon default_lexicon();
  /// "female<TAB>male" per line, '#' starts a comment.
  static AttributeLexicon parse_tsv(std::string_view content);
  static AttributeLexicon load(const std::string& path);

  std::size_t size() const { return pairs_.size(); }
  const std::vector<AttributePair>& pairs() const { return pairs_; }
  const AttributePair& pair(int index) const { return pairs_.at(static_cast<std::size_t>(index - 1)); }

  struct Entry {
    Gender gender;
    int pair_index;
  };
  /// Exact lookup of a lowercase word.
  std::optional<Entry> find(std::string_view lower_word) const;

  std::vector<std::string> female_words() const;
  std::vector<std::string> male_words() const;

  /// Canonical TSV serialization; the hash of this text identifies the lexicon.
  std::string to_tsv() const;
  std::string hash() const;

 private:
  std::vector<AttributePair> pairs_;
  std::unordered_map<std::string, Entry> index_;
};

/// Every case-insensitive, word-delimited occurrence of a lexicon word,
/// ordered by offset. Clitic forms ("she's", "he'll") match the base word.
std::vector<AttributeMatch> detect_attributes(std::string_view text, const AttributeLexicon& lex);

/// 1 iff the text contains any attribute word.
int sentence_indicator(std::string_view text, const AttributeLexicon& lex);

/// Majority gender of the matches; ties go to the earliest match.
Lean lean(std::string_view text, const AttributeLexicon& lex);

}  // namespace biasprobe::lexicon
