#include "biasprobe/modelio.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <thread>

#include <httplib.h>

#include "biasprobe/demo.hpp"
#include "biasprobe/error.hpp"
#include "biasprobe/text.hpp"

namespace biasprobe::modelio {

using nlohmann::json;

void DecodeConfig::validate() const {
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) throw config_error("temperature must be >= 0");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw config_error("top_p must lie in (0, 1]");
  if (max_new_tokens < 0) throw config_error("max_new_tokens must be >= 0");
}

std::string_view to_string(BackendKind k) {
  switch (k) {
    case BackendKind::Http: return "http";
    case BackendKind::Replay: return "replay";
    case BackendKind::Toy: return "toy";
  }
  return "toy";
}

BackendKind parse_backend_kind(std::string_view s) {
  if (s == "http") return BackendKind::Http;
  if (s == "replay") return BackendKind::Replay;
  if (s == "toy") return BackendKind::Toy;
  throw config_error("unknown backend kind: " + std::string(s));
}

void BackendDescriptor::validate() const {
  if (endpoint_or_path.empty()) throw config_error("backend: endpoint or path is required");
  if (kind == BackendKind::Http && model_name.empty()) throw config_error("http backend: model name is required");
}

GenerationRecord Backend::generate(std::string_view prompt, const DecodeConfig& decode) const {
  if (prompt.empty()) throw data_error("generate: empty prompt");
  decode.validate();
  auto r = do_generate(prompt, decode);
  r.prompt = std::string(prompt);
  r.decode = decode;
  r.backend_id = id();
  return r;
}

AttributeDistribution Backend::score_attribute_words(std::string_view prompt, const lexicon::AttributeLexicon& lex) const {
  if (prompt.empty()) throw data_error("score_attribute_words: empty prompt");
  AttributeDistribution d;
  d.pf.reserve(lex.size());
  d.pm.reserve(lex.size());
  std::string missing;
  auto score = [&](const std::string& w, std::vector<double>& out) {
    auto p = word_probability(prompt, w);
    if (!p) {
      missing += (missing.empty() ? "" : ", ") + w;
      out.push_back(0.0);
    } else {
      out.push_back(*p);
    }
  };
  for (const auto& pair : lex.pairs()) {
    score(pair.female_word, d.pf);
    score(pair.male_word, d.pm);
  }
  if (!missing.empty()) throw backend_error(id() + ": unscorable attribute words: " + missing);
  return d;
}

// --- toy -------------------------------------------------------------------

ToyBackend::ToyBackend(std::shared_ptr<const toylm::ToyLM> model, std::string name)
    : model_(std::move(model)), name_(std::move(name)) {
  if (!model_) throw internal_error("ToyBackend: null model");
}

GenerationRecord ToyBackend::do_generate(std::string_view prompt, const DecodeConfig& decode) const {
  const auto& vocab = model_->vocab();
  auto ctx = vocab.encode(prompt);
  if (ctx.empty()) throw data_error("toy backend: prompt has no tokens");
  decoder::Rng rng(decode.seed);
  GenerationRecord r;
  for (int t = 0; t < decode.max_new_tokens; ++t) {
    auto logits = model_->logits(ctx);
    auto dist = decoder::apply_decoding(logits, decode.settings());
    const auto next = decoder::select_next(dist, rng);
    if (static_cast<int>(next) == toylm::Vocabulary::kEos) break;
    auto probs = toylm::softmax(logits);
    std::string piece = vocab.render(static_cast<int>(next));
    r.continuation += piece;
    r.tokens.push_back({piece, std::log(probs[next])});
    ctx.push_back(static_cast<int>(next));
  }
  return r;
}

std::optional<double> ToyBackend::word_probability(std::string_view prompt, std::string_view word) const {
  const auto& vocab = model_->vocab();
  auto ctx = vocab.encode(prompt);
  if (ctx.empty()) throw data_error("toy backend: prompt has no tokens");
  auto pieces = vocab.encode_word(text::to_lower_ascii(word));
  double p = 1.0;
  for (int piece : pieces) {
    if (piece == toylm::Vocabulary::kUnk) return std::nullopt;
    p *= model_->next_token_probs(ctx)[static_cast<std::size_t>(piece)];
    ctx.push_back(piece);
  }
  return p;
}

// --- replay ----------------------------------------------------------------

std::string ReplayBackend::prompt_hash(std::string_view prompt) { return text::hex64(text::fnv1a64(prompt)); }

ReplayBackend::ReplayBackend(std::string_view jsonl, std::string name) : name_(std::move(name)) {
  std::size_t lineno = 0;
  for (const auto& line : text::split_lines(jsonl)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      auto j = json::parse(line);
      Entry e;
      e.prompt = j.value("prompt", "");
      e.continuation = j.at("continuation").get<std::string>();
      const json toks = j.value("token_logprobs", json::array());
      for (const auto& t : toks) {
        e.tokens.push_back({t.at(0).get<std::string>(), t.at(1).get<double>()});
      }
      const json top = j.value("next_token_top_logprobs", json::object());
      for (const auto& [k, v] : top.items()) {
        e.next_token_logprobs[std::string(text::trim(k))] = v.get<double>();
      }
      std::string hash = j.at("prompt_hash").get<std::string>();
      if (!e.prompt.empty() && prompt_hash(e.prompt) != hash)
        throw data_error("replay line " + std::to_string(lineno) + ": prompt_hash does not match prompt");
      entries_[hash] = std::move(e);
    } catch (const json::exception& ex) {
      throw data_error("replay line " + std::to_string(lineno) + ": " + ex.what());
    }
  }
}

ReplayBackend ReplayBackend::load(const std::string& path) {
  return ReplayBackend(text::read_file(path), std::filesystem::path(path).stem().string());
}

json ReplayBackend::entry_to_json(std::string_view prompt, const Entry& e) {
  json toks = json::array();
  for (const auto& t : e.tokens) toks.push_back(json::array({t.text, t.logprob}));
  json top = json::object();
  for (const auto& [k, v] : e.next_token_logprobs) top[k] = v;
  return json{{"prompt_hash", prompt_hash(prompt)}, {"prompt", std::string(prompt)}, {"continuation", e.continuation},
              {"token_logprobs", toks}, {"next_token_top_logprobs", top}};
}

const ReplayBackend::Entry& ReplayBackend::lookup(std::string_view prompt) const {
  auto it = entries_.find(prompt_hash(prompt));
  if (it == entries_.end()) throw backend_error(id() + ": no recorded entry for prompt: " + std::string(prompt));
  return it->second;
}

GenerationRecord ReplayBackend::do_generate(std::string_view prompt, const DecodeConfig& decode) const {
  const auto& e = lookup(prompt);
  GenerationRecord r;
  r.continuation = e.continuation;
  r.tokens = e.tokens;
  if (r.tokens.empty() && !r.continuation.empty()) r.tokens.push_back({r.continuation, 0.0});
  if (static_cast<int>(r.tokens.size()) > decode.max_new_tokens) {
    r.tokens.resize(static_cast<std::size_t>(decode.max_new_tokens));
    r.continuation.clear();
    for (const auto& t : r.tokens) r.continuation += t.text;
  }
  return r;
}

std::optional<double> ReplayBackend::word_probability(std::string_view prompt, std::string_view word) const {
  const auto& e = lookup(prompt);
  auto it = e.next_token_logprobs.find(std::string(word));
  if (it == e.next_token_logprobs.end()) return 0.0;
  return std::exp(it->second);
}

// --- http ------------------------------------------------------------------

HttpBackend::HttpBackend(std::string base_url, std::string model, std::optional<std::string> api_key, RetryPolicy retry)
    : model_(std::move(model)), api_key_(std::move(api_key)), retry_(retry) {
  auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) throw config_error("http backend: URL needs a scheme: " + base_url);
  auto path_start = base_url.find('/', scheme_end + 3);
  scheme_host_port_ = base_url.substr(0, path_start);
  std::string path = path_start == std::string::npos ? "" : base_url.substr(path_start);
  while (!path.empty() && path.back() == '/') path.pop_back();
  if (path.size() >= 12 && path.compare(path.size() - 12, 12, "/completions") == 0) {
    path_prefix_ = path;
  } else if (path.size() >= 3 && path.compare(path.size() - 3, 3, "/v1") == 0) {
    path_prefix_ = path + "/completions";
  } else {
    path_prefix_ = path + "/v1/completions";
  }
  if (scheme_host_port_.rfind("http://", 0) != 0)
    throw config_error("http backend: only http:// endpoints are supported: " + base_url);
}

json HttpBackend::generation_request(std::string_view prompt, const DecodeConfig& decode) const {
  return json{{"model", model_},         {"prompt", std::string(prompt)}, {"max_tokens", decode.max_new_tokens},
              {"temperature", decode.temperature}, {"top_p", decode.top_p}, {"logprobs", 1},
              {"echo", false},           {"seed", decode.seed}};
}

json HttpBackend::scoring_request(std::string_view prompt, std::string_view word) const {
  return json{{"model", model_}, {"prompt", std::string(prompt) + " " + std::string(word)},
              {"max_tokens", 0}, {"temperature", 0.0}, {"top_p", 1.0}, {"logprobs", 0}, {"echo", true}, {"seed", 0}};
}

json HttpBackend::post(const json& body) const {
  httplib::Client cli(scheme_host_port_);
  cli.set_connection_timeout(10, 0);
  cli.set_read_timeout(120, 0);
  httplib::Headers headers;
  if (api_key_) headers.emplace("Authorization", "Bearer " + *api_key_);
  const std::string payload = body.dump();
  std::string last_error;
  auto backoff = retry_.initial_backoff;
  for (int attempt = 1; attempt <= retry_.attempts; ++attempt) {
    auto res = cli.Post(path_prefix_, headers, payload, "application/json");
    if (!res) {
      last_error = "connection failed: " + httplib::to_string(res.error());
    } else if (res->status == 200) {
      try {
        return json::parse(res->body);
      } catch (const json::exception& e) {
        throw backend_error(id() + ": malformed JSON response: " + e.what());
      }
    } else if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
    } else {
      throw backend_error(id() + ": HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    if (attempt < retry_.attempts) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
  throw backend_error(id() + ": request failed after " + std::to_string(retry_.attempts) + " attempts: " + last_error);
}

namespace {

const json& first_choice(const json& resp, const std::string& who) {
  if (!resp.contains("choices") || !resp["choices"].is_array() || resp["choices"].empty())
    throw backend_error(who + ": response has no choices");
  return resp["choices"][0];
}

const json& logprobs_of(const json& choice, const std::string& who) {
  if (!choice.contains("logprobs") || !choice["logprobs"].is_object() || !choice["logprobs"].contains("tokens") ||
      !choice["logprobs"].contains("token_logprobs"))
    throw backend_error(who + ": response lacks per-token logprobs");
  return choice["logprobs"];
}

}  // namespace

GenerationRecord HttpBackend::do_generate(std::string_view prompt, const DecodeConfig& decode) const {
  auto resp = post(generation_request(prompt, decode));
  const auto& choice = first_choice(resp, id());
  const auto& lp = logprobs_of(choice, id());
  const auto& toks = lp["tokens"];
  const auto& vals = lp["token_logprobs"];
  if (!toks.is_array() || !vals.is_array() || toks.size() != vals.size())
    throw backend_error(id() + ": tokens and token_logprobs differ in length");
  GenerationRecord r;
  for (std::size_t i = 0; i < toks.size() && static_cast<int>(i) < decode.max_new_tokens; ++i) {
    if (vals[i].is_null()) throw backend_error(id() + ": missing logprob for generated token " + std::to_string(i));
    r.tokens.push_back({toks[i].get<std::string>(), vals[i].get<double>()});
    r.continuation += r.tokens.back().text;
  }
  const std::string text = choice.value("text", r.continuation);
  if (text != r.continuation && toks.size() <= static_cast<std::size_t>(decode.max_new_tokens))
    throw backend_error(id() + ": completion text does not match its tokens");
  r.reproducible = decode.greedy();
  return r;
}

std::optional<double> HttpBackend::word_probability(std::string_view prompt, std::string_view word) const {
  auto resp = post(scoring_request(prompt, word));
  const auto& choice = first_choice(resp, id());
  const auto& lp = logprobs_of(choice, id());
  const auto& toks = lp["tokens"];
  const auto& vals = lp["token_logprobs"];
  if (!toks.is_array() || !vals.is_array() || toks.size() != vals.size())
    throw backend_error(id() + ": tokens and token_logprobs differ in length");
  std::vector<std::size_t> offsets;
  if (lp.contains("text_offset") && lp["text_offset"].is_array() && lp["text_offset"].size() == toks.size()) {
    for (const auto& o : lp["text_offset"]) offsets.push_back(o.get<std::size_t>());
  } else {
    std::size_t pos = 0;
    for (const auto& t : toks) {
      offsets.push_back(pos);
      pos += t.get<std::string>().size();
    }
  }
  const std::size_t boundary = prompt.size();
  double logp = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const std::size_t start = offsets[i];
    const std::size_t end = start + toks[i].get<std::string>().size();
    if (start < boundary && end > boundary) return std::nullopt;  // token straddles prompt and word
    if (start < boundary) continue;
    if (vals[i].is_null()) return std::nullopt;
    logp += vals[i].get<double>();
    any = true;
  }
  if (!any) return std::nullopt;
  return std::exp(logp);
}

// --- factory ---------------------------------------------------------------

std::shared_ptr<Backend> make_backend(const BackendDescriptor& desc) {
  desc.validate();
  switch (desc.kind) {
    case BackendKind::Toy: {
      if (desc.endpoint_or_path == "builtin")
        return std::make_shared<ToyBackend>(demo::builtin_model(), desc.model_name.empty() ? "builtin" : desc.model_name);
      auto model = std::make_shared<const toylm::ToyLM>(toylm::ToyLM::load(desc.endpoint_or_path));
      std::string name = desc.model_name.empty() ? std::filesystem::path(desc.endpoint_or_path).stem().string() : desc.model_name;
      return std::make_shared<ToyBackend>(std::move(model), name);
    }
    case BackendKind::Replay: {
      auto content = text::read_file(desc.endpoint_or_path);
      std::string name = desc.model_name.empty() ? std::filesystem::path(desc.endpoint_or_path).stem().string() : desc.model_name;
      return std::make_shared<ReplayBackend>(content, name);
    }
    case BackendKind::Http: {
      std::optional<std::string> key;
      if (desc.auth_env) {
        if (const char* v = std::getenv(desc.auth_env->c_str()); v && *v) key = v;
      }
      return std::make_shared<HttpBackend>(desc.endpoint_or_path, desc.model_name, key);
    }
  }
  throw internal_error("unreachable backend kind");
}

// --- serialization ---------------------------------------------------------

json to_json(const DecodeConfig& d) {
  return json{{"temperature", d.temperature}, {"top_p", d.top_p}, {"top_k", d.top_k},
              {"max_new_tokens", d.max_new_tokens}, {"seed", d.seed}};
}

DecodeConfig decode_from_json(const json& j) {
  DecodeConfig d;
  d.temperature = j.value("temperature", d.temperature);
  d.top_p = j.value("top_p", d.top_p);
  d.top_k = j.value("top_k", d.top_k);
  d.max_new_tokens = j.value("max_new_tokens", d.max_new_tokens);
  d.seed = j.value("seed", d.seed);
  return d;
}

json to_json(const GenerationRecord& r) {
  json toks = json::array();
  for (const auto& t : r.tokens) toks.push_back(json::array({t.text, t.logprob}));
  return json{{"probe_id", r.probe_id},   {"prompt", r.prompt},         {"continuation", r.continuation},
              {"tokens", toks},           {"decode", to_json(r.decode)}, {"backend_id", r.backend_id},
              {"reproducible", r.reproducible}};
}

GenerationRecord record_from_json(const json& j) {
  GenerationRecord r;
  r.probe_id = j.at("probe_id").get<std::string>();
  r.prompt = j.at("prompt").get<std::string>();
  r.continuation = j.at("continuation").get<std::string>();
  for (const auto& t : j.value("tokens", json::array())) r.tokens.push_back({t.at(0).get<std::string>(), t.at(1).get<double>()});
  r.decode = decode_from_json(j.value("decode", json::object()));
  r.backend_id = j.value("backend_id", "");
  r.reproducible = j.value("reproducible", true);
  return r;
}

json to_json(const AttributeDistribution& d) { return json{{"probe_id", d.probe_id}, {"pf", d.pf}, {"pm", d.pm}}; }

AttributeDistribution distribution_from_json(const json& j) {
  AttributeDistribution d;
  d.probe_id = j.value("probe_id", "");
  d.pf = j.at("pf").get<std::vector<double>>();
  d.pm = j.at("pm").get<std::vector<double>>();
  if (d.pf.size() != d.pm.size()) throw data_error("distribution: pf and pm lengths differ");
  for (double v : d.pf)
    if (!(v >= 0.0 && v <= 1.0)) throw data_error("distribution: probability outside [0, 1]");
  for (double v : d.pm)
    if (!(v >= 0.0 && v <= 1.0)) throw data_error("distribution: probability outside [0, 1]");
  return d;
}

std::string write_run_jsonl(const std::vector<RunEntry>& entries) {
  std::string out;
  for (const auto& e : entries) {
    auto j = to_json(e.record);
    j["distribution"] = json{{"pf", e.distribution.pf}, {"pm", e.distribution.pm}};
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<RunEntry> read_run_jsonl(std::string_view content) {
  std::vector<RunEntry> out;
  std::size_t lineno = 0;
  for (const auto& line : text::split_lines(content)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      auto j = json::parse(line);
      RunEntry e;
      e.record = record_from_json(j);
      e.distribution = distribution_from_json(j.at("distribution"));
      e.distribution.probe_id = e.record.probe_id;
      out.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw data_error("run file line " + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return out;
}

}  // namespace biasprobe::modelio
