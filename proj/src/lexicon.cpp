#include "biasprobe/lexicon.hpp"

#include <array>
#include <cctype>

#include "biasprobe/error.hpp"
#include "biasprobe/text.hpp"

namespace biasprobe::lexicon {

std::string_view to_string(Gender g) { return g == Gender::Female ? "female" : "male"; }

std::string_view to_string(Lean l) {
  switch (l) {
    case Lean::Female: return "female";
    case Lean::Male: return "male";
    case Lean::Neutral: return "neutral";
  }
  return "neutral";
}

namespace {

void validate_word(const std::string& w, std::size_t line) {
  if (w.empty()) throw data_error("lexicon pair " + std::to_string(line) + ": empty word");
  for (char c : w) {
    if (std::isspace(static_cast<unsigned char>(c)))
      throw data_error("lexicon pair " + std::to_string(line) + ": word '" + w + "' contains whitespace");
  }
}

}  // namespace

AttributeLexicon::AttributeLexicon(std::vector<std::pair<std::string, std::string>> pairs) {
  if (pairs.empty()) throw data_error("lexicon must contain at least one pair");
  pairs_.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    std::string f = text::to_lower_ascii(text::trim(pairs[i].first));
    std::string m = text::to_lower_ascii(text::trim(pairs[i].second));
    validate_word(f, i + 1);
    validate_word(m, i + 1);
    if (f == m) throw data_error("lexicon pair " + std::to_string(i + 1) + ": female and male word are identical");
    const int index = static_cast<int>(i + 1);
    for (const auto& [w, g] : {std::pair{f, Gender::Female}, std::pair{m, Gender::Male}}) {
      if (!index_.emplace(w, Entry{g, index}).second)
        throw data_error("lexicon word '" + w + "' appears more than once");
    }
    pairs_.push_back({index, std::move(f), std::move(m)});
  }
}

AttributeLexicon AttributeLexicon::default_lexicon() {
  return AttributeLexicon({
      {"she", "he"},         {"her", "his"},         {"hers", "him"},       {"herself", "himself"},
      {"woman", "man"},      {"women", "men"},       {"girl", "boy"},       {"girls", "boys"},
      {"female", "male"},    {"mrs", "mr"},          {"lady", "gentleman"}, {"mother", "father"},
      {"sister", "brother"}, {"daughter", "son"},
  });
}

AttributeLexicon AttributeLexicon::parse_tsv(std::string_view content) {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::size_t lineno = 0;
  for (const auto& raw : text::split_lines(content)) {
    ++lineno;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string_view::npos || line.find('\t', tab + 1) != std::string_view::npos)
      throw data_error("lexicon line " + std::to_string(lineno) + ": expected 'female<TAB>male'");
    pairs.emplace_back(std::string(line.substr(0, tab)), std::string(line.substr(tab + 1)));
  }
  return AttributeLexicon(std::move(pairs));
}

AttributeLexicon AttributeLexicon::load(const std::string& path) { return parse_tsv(text::read_file(path)); }

std::optional<AttributeLexicon::Entry> AttributeLexicon::find(std::string_view lower_word) const {
  auto it = index_.find(std::string(lower_word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> AttributeLexicon::female_words() const {
  std::vector<std::string> out;
  for (const auto& p : pairs_) out.push_back(p.female_word);
  return out;
}

std::vector<std::string> AttributeLexicon::male_words() const {
  std::vector<std::string> out;
  for (const auto& p : pairs_) out.push_back(p.male_word);
  return out;
}

std::string AttributeLexicon::to_tsv() const {
  std::string out;
  for (const auto& p : pairs_) out += p.female_word + "\t" + p.male_word + "\n";
  return out;
}

std::string AttributeLexicon::hash() const { return text::hex64(text::fnv1a64(to_tsv())); }

namespace {

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

// Length of an apostrophe at s[i]: ASCII ' or U+2019 (E2 80 99). 0 if none.
std::size_t apostrophe_len(std::string_view s, std::size_t i) {
  if (s[i] == '\'') return 1;
  if (i + 2 < s.size() && static_cast<unsigned char>(s[i]) == 0xE2 &&
      static_cast<unsigned char>(s[i + 1]) == 0x80 && static_cast<unsigned char>(s[i + 2]) == 0x99)
    return 3;
  return 0;
}

constexpr std::array<std::string_view, 6> kClitics = {"s", "ll", "d", "re", "ve", "m"};

}  // namespace

std::vector<AttributeMatch> detect_attributes(std::string_view text, const AttributeLexicon& lex) {
  std::vector<AttributeMatch> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    // An apostrophe that does not sit inside a word acts as plain punctuation.
    if (const std::size_t al = apostrophe_len(text, i); al > 0 || !is_word_byte(static_cast<unsigned char>(text[i]))) {
      i += al > 0 ? al : 1;
      continue;
    }
    // token = word bytes, possibly joined by apostrophes
    const std::size_t start = i;
    std::size_t first_apos = std::string_view::npos;
    std::size_t first_apos_len = 0;
    while (i < n) {
      const std::size_t al = apostrophe_len(text, i);
      if (al == 0 && is_word_byte(static_cast<unsigned char>(text[i]))) {
        ++i;
        continue;
      }
      if (al > 0 && i + al < n && is_word_byte(static_cast<unsigned char>(text[i + al]))) {
        if (first_apos == std::string_view::npos) {
          first_apos = i;
          first_apos_len = al;
        }
        i += al;
        continue;
      }
      break;
    }
    std::string_view token = text.substr(start, i - start);
    std::string lowered = text::to_lower_ascii(token);
    auto entry = lex.find(lowered);
    std::string_view surface = token;
    if (!entry && first_apos != std::string_view::npos) {
      std::string_view base = text.substr(start, first_apos - start);
      std::string suffix = text::to_lower_ascii(text.substr(first_apos + first_apos_len, i - first_apos - first_apos_len));
      bool clitic = false;
      for (auto c : kClitics) clitic = clitic || suffix == c;
      if (clitic) {
        entry = lex.find(text::to_lower_ascii(base));
        surface = base;
      }
    }
    if (entry) out.push_back({std::string(surface), entry->gender, entry->pair_index, start});
  }
  return out;
}

int sentence_indicator(std::string_view text, const AttributeLexicon& lex) {
  return detect_attributes(text, lex).empty() ? 0 : 1;
}

Lean lean(std::string_view text, const AttributeLexicon& lex) {
  auto matches = detect_attributes(text, lex);
  if (matches.empty()) return Lean::Neutral;
  std::size_t female = 0;
  for (const auto& m : matches) female += m.gender == Gender::Female ? 1 : 0;
  const std::size_t male = matches.size() - female;
  if (female > male) return Lean::Female;
  if (male > female) return Lean::Male;
  return matches.front().gender == Gender::Female ? Lean::Female : Lean::Male;
}

}  // namespace biasprobe::lexicon
