#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "biasprobe/decoder.hpp"
#include "biasprobe/lexicon.hpp"
#include "biasprobe/toylm.hpp"

namespace biasprobe::modelio {

struct DecodeConfig {
  double temperature = 0.0;
  double top_p = 1.0;
  std::size_t top_k = 0;
  int max_new_tokens = 50;
  std::uint64_t seed = 0;

  /// Throws a config error when a field is out of range.
  void validate() const;
  bool greedy() const { return temperature == 0.0; }
  decoder::DecodeSettings settings() const { return {temperature, top_p, top_k}; }
  bool operator==(const DecodeConfig&) const = default;
};

struct TokenLogprob {
  std::string text;
  double logprob = 0.0;
  bool operator==(const TokenLogprob&) const = default;
};

struct GenerationRecord {
  std::string probe_id;
  std::string prompt;
  std::string continuation;
  std::vector<TokenLogprob> tokens;
  DecodeConfig decode;
  std::string backend_id;
  /// False when the backend cannot guarantee the same output for the same seed.
  bool reproducible = true;
};

/// P(w | x) for every female and male attribute word, indexed by pair.
struct AttributeDistribution {
  std::string probe_id;
  std::vector<double> pf;
  std::vector<double> pm;
};

enum class BackendKind { Http, Replay, Toy };

struct BackendDescriptor {
  BackendKind kind = BackendKind::Toy;
  std::string endpoint_or_path;
  std::string model_name;
  /// Name of the environment variable holding the bearer token.
  std::optional<std::string> auth_env;

  void validate() const;
};

std::string_view to_string(BackendKind k);
BackendKind parse_backend_kind(std::string_view s);

/// Uniform generation and scoring surface. Implementations are safe for
/// concurrent calls.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string id() const = 0;

  /// Continuation of a non-empty prompt. probe_id is left empty.
  GenerationRecord generate(std::string_view prompt, const DecodeConfig& decode) const;
  /// Teacher-forced P(w | prompt) from the full next-token distribution.
  AttributeDistribution score_attribute_words(std::string_view prompt, const lexicon::AttributeLexicon& lex) const;

 protected:
  virtual GenerationRecord do_generate(std::string_view prompt, const DecodeConfig& decode) const = 0;
  /// Probability of one word following the prompt; nullopt when the backend
  /// cannot score the word.
  virtual std::optional<double> word_probability(std::string_view prompt, std::string_view word) const = 0;
};

/// In-process toy language model.
class ToyBackend final : public Backend {
 public:
  explicit ToyBackend(std::shared_ptr<const toylm::ToyLM> model, std::string name = "toy");
  std::string id() const override { return "toy:" + name_; }
  const toylm::ToyLM& model() const { return *model_; }

 protected:
  GenerationRecord do_generate(std::string_view prompt, const DecodeConfig& decode) const override;
  std::optional<double> word_probability(std::string_view prompt, std::string_view word) const override;

 private:
  std::shared_ptr<const toylm::ToyLM> model_;
  std::string name_;
};

/// Replays recorded generations and next-token log-probabilities.
///
/// One JSON object per line:
///   {"prompt_hash": hex FNV-1a-64 of the prompt, "prompt": optional,
///    "continuation": str, "token_logprobs": [[token, logprob], ...],
///    "next_token_top_logprobs": {word: logprob, ...}}
/// Words absent from next_token_top_logprobs score 0 (outside the recorded
/// top-k).
class ReplayBackend final : public Backend {
 public:
  struct Entry {
    std::string prompt;
    std::string continuation;
    std::vector<TokenLogprob> tokens;
    std::map<std::string, double> next_token_logprobs;
  };

  explicit ReplayBackend(std::string_view jsonl, std::string name = "replay");
  static ReplayBackend load(const std::string& path);
  std::string id() const override { return "replay:" + name_; }

  static std::string prompt_hash(std::string_view prompt);
  static nlohmann::json entry_to_json(std::string_view prompt, const Entry& e);
  std::size_t size() const { return entries_.size(); }

 protected:
  GenerationRecord do_generate(std::string_view prompt, const DecodeConfig& decode) const override;
  std::optional<double> word_probability(std::string_view prompt, std::string_view word) const override;

 private:
  const Entry& lookup(std::string_view prompt) const;
  std::unordered_map<std::string, Entry> entries_;
  std::string name_;
};

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
};

/// OpenAI-compatible text completion endpoint (POST {base}/v1/completions).
class HttpBackend final : public Backend {
 public:
  HttpBackend(std::string base_url, std::string model, std::optional<std::string> api_key = std::nullopt,
              RetryPolicy retry = {});
  std::string id() const override { return "http:" + model_; }

  /// Wire body for a generation request.
  nlohmann::json generation_request(std::string_view prompt, const DecodeConfig& decode) const;
  /// Wire body for an echo scoring request of `prompt + " " + word`.
  nlohmann::json scoring_request(std::string_view prompt, std::string_view word) const;

 protected:
  GenerationRecord do_generate(std::string_view prompt, const DecodeConfig& decode) const override;
  std::optional<double> word_probability(std::string_view prompt, std::string_view word) const override;

 private:
  nlohmann::json post(const nlohmann::json& body) const;

  std::string scheme_host_port_;
  std::string path_prefix_;
  std::string model_;
  std::optional<std::string> api_key_;
  RetryPolicy retry_;
};

/// Builds a backend. Toy: path to a checkpoint or "builtin" for the seeded
/// biased demo model. Replay: path to a replay JSONL. Http: base URL.
std::shared_ptr<Backend> make_backend(const BackendDescriptor& desc);

nlohmann::json to_json(const DecodeConfig& d);
DecodeConfig decode_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GenerationRecord& r);
GenerationRecord record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AttributeDistribution& d);
AttributeDistribution distribution_from_json(const nlohmann::json& j);

/// A run line: GenerationRecord fields plus a "distribution" object.
struct RunEntry {
  GenerationRecord record;
  AttributeDistribution distribution;
};
std::string write_run_jsonl(const std::vector<RunEntry>& entries);
std::vector<RunEntry> read_run_jsonl(std::string_view content);

}  // namespace biasprobe::modelio
