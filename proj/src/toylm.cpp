#include "biasprobe/toylm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include <json.hpp>

#include "biasprobe/error.hpp"
#include "biasprobe/kernels.hpp"
#include "biasprobe/text.hpp"

namespace biasprobe::toylm {

using nlohmann::json;

namespace {

bool is_word_char(unsigned char c) { return std::isalnum(c) || c == '\'' || c >= 0x80; }
bool is_punct_token(std::string_view t) { return t.size() == 1 && !is_word_char(static_cast<unsigned char>(t[0])); }

}  // namespace

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (is_word_char(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
      continue;
    }
    if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
    if (!std::isspace(c)) out.emplace_back(1, ch);
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) {
  auto add = [this](const std::string& t) {
    if (ids_.emplace(t, static_cast<int>(tokens_.size())).second) tokens_.push_back(t);
  };
  add("<unk>");
  add("<eos>");
  for (const auto& t : tokens) {
    if (t.empty()) throw data_error("vocabulary: empty token");
    add(t);
  }
}

int Vocabulary::find(std::string_view tok) const {
  auto it = ids_.find(std::string(tok));
  return it == ids_.end() ? -1 : it->second;
}

std::vector<int> Vocabulary::encode_word(std::string_view word) const {
  if (int id = find(word); id >= 0) return {id};
  // greedy longest-prefix: head piece, then "##" continuations
  std::vector<int> pieces;
  std::size_t pos = 0;
  while (pos < word.size()) {
    int found = -1;
    std::size_t len = word.size() - pos;
    for (; len > 0; --len) {
      std::string cand = pos == 0 ? std::string(word.substr(0, len)) : "##" + std::string(word.substr(pos, len));
      found = find(cand);
      if (found >= 0) break;
    }
    if (found < 0) return {kUnk};
    pieces.push_back(found);
    pos += len;
  }
  return pieces;
}

std::vector<int> Vocabulary::encode(std::string_view text) const {
  std::vector<int> out;
  for (const auto& w : split_words(text)) {
    auto pieces = encode_word(w);
    out.insert(out.end(), pieces.begin(), pieces.end());
  }
  return out;
}

std::string Vocabulary::render(int id) const {
  if (id == kEos) return "";
  const std::string& t = token(id);
  if (t.rfind("##", 0) == 0) return t.substr(2);
  if (is_punct_token(t)) return t;
  return " " + t;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  const double mx = *std::max_element(p.begin(), p.end());
  double sum = 0.0;
  for (double& v : p) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : p) v /= sum;
  return p;
}

ToyLM::ToyLM(Vocabulary vocab, ToyConfig cfg) : vocab_(std::move(vocab)), cfg_(cfg) {
  if (cfg_.dim <= 0 || cfg_.context <= 0 || cfg_.hidden <= 0) throw config_error("toy model dimensions must be positive");
  const std::size_t v = static_cast<std::size_t>(vocab_.size());
  const std::size_t d = static_cast<std::size_t>(cfg_.dim);
  const std::size_t h = static_cast<std::size_t>(cfg_.hidden);
  params_.assign(v * d + h * d + h + v * h + v, 0.0);
  decoder::Rng rng(cfg_.seed);
  auto fill = [&](std::size_t off, std::size_t n, double scale) {
    for (std::size_t i = 0; i < n; ++i) params_[off + i] = (2.0 * decoder::uniform01(rng) - 1.0) * scale;
  };
  fill(0, v * d, 0.5);
  fill(off_w1(), h * d, 1.0 / std::sqrt(static_cast<double>(d)));
  fill(off_w2(), v * h, 1.0 / std::sqrt(static_cast<double>(h)));
}

ToyLM ToyLM::zeros(Vocabulary vocab, ToyConfig cfg) {
  ToyLM m(std::move(vocab), cfg);
  std::fill(m.params_.begin(), m.params_.end(), 0.0);
  return m;
}

std::size_t ToyLM::off_w1() const { return static_cast<std::size_t>(vocab_.size()) * static_cast<std::size_t>(cfg_.dim); }
std::size_t ToyLM::off_b1() const { return off_w1() + static_cast<std::size_t>(cfg_.hidden * cfg_.dim); }
std::size_t ToyLM::off_w2() const { return off_b1() + static_cast<std::size_t>(cfg_.hidden); }
std::size_t ToyLM::off_b2() const {
  return off_w2() + static_cast<std::size_t>(vocab_.size()) * static_cast<std::size_t>(cfg_.hidden);
}

ToyLM::Activations ToyLM::forward(std::span<const int> context) const {
  if (context.empty()) throw data_error("toy model: empty context");
  const std::size_t d = static_cast<std::size_t>(cfg_.dim);
  const std::size_t h = static_cast<std::size_t>(cfg_.hidden);
  const std::size_t v = static_cast<std::size_t>(vocab_.size());
  const std::size_t start = context.size() > static_cast<std::size_t>(cfg_.context) ? context.size() - cfg_.context : 0;

  Activations a;
  a.window.assign(context.begin() + static_cast<std::ptrdiff_t>(start), context.end());
  a.pooled.assign(d, 0.0);
  for (int tok : a.window) {
    if (tok < 0 || tok >= vocab_.size()) throw data_error("toy model: token id out of range");
    const double* e = &params_[static_cast<std::size_t>(tok) * d];
    for (std::size_t k = 0; k < d; ++k) a.pooled[k] += e[k];
  }
  const double inv = 1.0 / static_cast<double>(a.window.size());
  for (double& x : a.pooled) x *= inv;

  a.hidden.assign(h, 0.0);
  const double* w1 = &params_[off_w1()];
  const double* b1 = &params_[off_b1()];
  for (std::size_t j = 0; j < h; ++j) {
    double s = b1[j];
    for (std::size_t k = 0; k < d; ++k) s += w1[j * d + k] * a.pooled[k];
    a.hidden[j] = std::tanh(s);
  }

  a.logits.assign(v, 0.0);
  const double* w2 = &params_[off_w2()];
  const double* b2 = &params_[off_b2()];
  for (std::size_t t = 0; t < v; ++t) {
    double s = b2[t];
    for (std::size_t j = 0; j < h; ++j) s += w2[t * h + j] * a.hidden[j];
    a.logits[t] = s;
  }
  return a;
}

std::vector<double> ToyLM::logits(std::span<const int> context) const { return forward(context).logits; }

std::vector<double> ToyLM::next_token_probs(std::span<const int> context) const { return softmax(logits(context)); }

void ToyLM::backward(const Activations& a, std::span<const double> dlogits, std::span<double> grad) const {
  const std::size_t d = static_cast<std::size_t>(cfg_.dim);
  const std::size_t h = static_cast<std::size_t>(cfg_.hidden);
  const std::size_t v = static_cast<std::size_t>(vocab_.size());
  const double* w1 = &params_[off_w1()];
  const double* w2 = &params_[off_w2()];
  double* gw1 = &grad[off_w1()];
  double* gb1 = &grad[off_b1()];
  double* gw2 = &grad[off_w2()];
  double* gb2 = &grad[off_b2()];

  std::vector<double> dh(h, 0.0);
  for (std::size_t t = 0; t < v; ++t) {
    const double dz = dlogits[t];
    if (dz == 0.0) continue;
    gb2[t] += dz;
    for (std::size_t j = 0; j < h; ++j) {
      gw2[t * h + j] += dz * a.hidden[j];
      dh[j] += dz * w2[t * h + j];
    }
  }
  std::vector<double> dx(d, 0.0);
  for (std::size_t j = 0; j < h; ++j) {
    const double da = dh[j] * (1.0 - a.hidden[j] * a.hidden[j]);
    gb1[j] += da;
    for (std::size_t k = 0; k < d; ++k) {
      gw1[j * d + k] += da * a.pooled[k];
      dx[k] += da * w1[j * d + k];
    }
  }
  const double inv = 1.0 / static_cast<double>(a.window.size());
  for (int tok : a.window) {
    double* ge = &grad[static_cast<std::size_t>(tok) * d];
    for (std::size_t k = 0; k < d; ++k) ge[k] += dx[k] * inv;
  }
}

std::string ToyLM::to_json() const {
  json j;
  j["format"] = "biasprobe-toylm";
  j["version"] = 1;
  j["seed"] = cfg_.seed;
  j["dim"] = cfg_.dim;
  j["context"] = cfg_.context;
  j["hidden"] = cfg_.hidden;
  j["vocab"] = vocab_.tokens();
  j["params"] = params_;
  return j.dump();
}

ToyLM ToyLM::from_json(std::string_view s) {
  json j;
  try {
    j = json::parse(s);
  } catch (const json::exception& e) {
    throw data_error(std::string("toy checkpoint: ") + e.what());
  }
  if (j.value("format", "") != "biasprobe-toylm" || j.value("version", 0) != 1)
    throw data_error("toy checkpoint: unsupported format or version");
  try {
    ToyConfig cfg;
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.dim = j.at("dim").get<int>();
    cfg.context = j.at("context").get<int>();
    cfg.hidden = j.at("hidden").get<int>();
    auto tokens = j.at("vocab").get<std::vector<std::string>>();
    if (tokens.size() < 2 || tokens[0] != "<unk>" || tokens[1] != "<eos>")
      throw data_error("toy checkpoint: vocabulary must start with <unk>, <eos>");
    tokens.erase(tokens.begin(), tokens.begin() + 2);
    ToyLM m = zeros(Vocabulary(tokens), cfg);
    auto params = j.at("params").get<std::vector<double>>();
    if (params.size() != m.params_.size()) throw data_error("toy checkpoint: parameter count mismatch");
    m.params_ = std::move(params);
    return m;
  } catch (const json::exception& e) {
    throw data_error(std::string("toy checkpoint: ") + e.what());
  }
}

void ToyLM::save(const std::string& path) const { text::write_file(path, to_json() + "\n"); }

ToyLM ToyLM::load(const std::string& path) { return from_json(text::read_file(path)); }

std::vector<LmExample> make_lm_examples(const Vocabulary& vocab, const std::vector<std::string>& lines) {
  std::vector<LmExample> out;
  for (const auto& line : lines) {
    auto toks = vocab.encode(line);
    if (toks.empty()) continue;
    toks.push_back(Vocabulary::kEos);
    for (std::size_t t = 1; t < toks.size(); ++t) {
      out.push_back({std::vector<int>(toks.begin(), toks.begin() + static_cast<std::ptrdiff_t>(t)), toks[t]});
    }
  }
  return out;
}

namespace {

double cross_entropy_grad(std::span<const double> logits, int target, std::span<double> dlogits, double scale) {
  auto p = softmax(logits);
  for (std::size_t t = 0; t < p.size(); ++t) dlogits[t] = scale * p[t];
  dlogits[static_cast<std::size_t>(target)] -= scale;
  return -std::log(std::max(p[static_cast<std::size_t>(target)], 1e-300));
}

}  // namespace

double lm_loss(const ToyLM& model, const std::vector<LmExample>& examples) {
  if (examples.empty()) return 0.0;
  auto terms = kernels::parallel::map_terms(examples.size(), [&](std::size_t i) {
    auto p = model.next_token_probs(examples[i].context);
    return -std::log(std::max(p[static_cast<std::size_t>(examples[i].target)], 1e-300));
  });
  return kernels::ordered_sum(terms) / static_cast<double>(examples.size());
}

void shuffle_indices(std::vector<std::size_t>& idx, decoder::Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    auto j = static_cast<std::size_t>(decoder::uniform01(rng) * static_cast<double>(i));
    if (j >= i) j = i - 1;
    std::swap(idx[i - 1], idx[j]);
  }
}

std::vector<double> pretrain(ToyLM& model, const std::vector<LmExample>& examples, const PretrainConfig& cfg) {
  if (examples.empty()) throw data_error("pretrain: no training examples");
  const std::size_t np = model.parameter_count();
  std::vector<double> m(np, 0.0), v(np, 0.0);
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  decoder::Rng rng(cfg.seed);
  std::vector<double> epoch_loss;
  long long step = 0;
  const auto batch = static_cast<std::size_t>(std::max(1, cfg.batch));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_indices(order, rng);
    double total = 0.0;
    for (std::size_t b = 0; b < order.size(); b += batch) {
      const std::size_t end = std::min(order.size(), b + batch);
      std::vector<std::vector<int>> contexts;
      std::vector<int> targets;
      for (std::size_t i = b; i < end; ++i) {
        contexts.push_back(examples[order[i]].context);
        targets.push_back(examples[order[i]].target);
      }
      const double scale = 1.0 / static_cast<double>(contexts.size());
      auto g = kernels::parallel::batch_gradient(
          model, contexts, [&](std::size_t i, std::span<const double> logits, std::span<double> dlogits) {
            return cross_entropy_grad(logits, targets[i], dlogits, scale);
          });
      total += g.loss;
      ++step;
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      auto p = model.mutable_params();
      for (std::size_t k = 0; k < np; ++k) {
        m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g.grad[k];
        v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g.grad[k] * g.grad[k];
        p[k] -= cfg.lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg.adam_eps);
      }
    }
    epoch_loss.push_back(total / static_cast<double>(examples.size()));
  }
  return epoch_loss;
}

}  // namespace biasprobe::toylm
