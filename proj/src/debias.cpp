#include "biasprobe/debias.hpp"

#include <cmath>

#include "biasprobe/error.hpp"
#include "biasprobe/kernels.hpp"
#include "biasprobe/runner.hpp"
#include "biasprobe/text.hpp"

namespace biasprobe::debias {

namespace {

void check_input(std::span<const modelio::AttributeDistribution> dists) {
  if (dists.empty()) throw data_error("debias losses: no inputs");
  for (const auto& d : dists) {
    if (d.pf.size() != d.pm.size()) throw data_error("debias losses: pf and pm lengths differ");
  }
}

double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

struct InputLosses {
  double d, g, l;
};

InputLosses input_losses(const modelio::AttributeDistribution& x, double eps) {
  return {0.5 * metrics::add_term(x, eps), sum(x.pf) + sum(x.pm), metrics::gld_term(x)};
}

}  // namespace

LossBreakdown compute_losses(std::span<const modelio::AttributeDistribution> dists, const LossConfig& cfg) {
  check_input(dists);
  const std::size_t n = dists.size();
  auto d = kernels::parallel::map_terms(n, [&](std::size_t i) { return input_losses(dists[i], cfg.epsilon).d; });
  auto g = kernels::parallel::map_terms(n, [&](std::size_t i) { return input_losses(dists[i], cfg.epsilon).g; });
  auto l = kernels::parallel::map_terms(n, [&](std::size_t i) { return input_losses(dists[i], cfg.epsilon).l; });
  LossBreakdown b;
  b.l_d = kernels::ordered_sum(d);
  b.l_g = kernels::ordered_sum(g);
  b.l_l = kernels::ordered_sum(l);
  b.total = cfg.weights.d * b.l_d + cfg.weights.g * b.l_g + cfg.weights.l * b.l_l;
  return b;
}

LossGradient loss_gradients(std::span<const modelio::AttributeDistribution> dists, const LossConfig& cfg) {
  check_input(dists);
  const double eps = cfg.epsilon;
  const auto& w = cfg.weights;
  LossGradient grad;
  grad.dpf.resize(dists.size());
  grad.dpm.resize(dists.size());
  for (std::size_t x = 0; x < dists.size(); ++x) {
    const auto& in = dists[x];
    const std::size_t n = in.pf.size();
    const double sf = sum(in.pf), sm = sum(in.pm);
    const double s = sf + sm;
    // d/dpf_i of |sf - sm| / s and d/dpm_i of the same
    double dl_f = 0.0, dl_m = 0.0;
    if (s > 0.0) {
      const double diff = sf - sm;
      dl_f = sign(diff) / s - std::abs(diff) / (s * s);
      dl_m = -sign(diff) / s - std::abs(diff) / (s * s);
    }
    auto& gf = grad.dpf[x];
    auto& gm = grad.dpm[x];
    gf.assign(n, 0.0);
    gm.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double a = in.pf[i] + eps;
      const double b = in.pm[i] + eps;
      // d/da [a ln(2a/(a+b)) + b ln(2b/(a+b))] = ln(2a/(a+b)), halved
      double dd_f = 0.0, dd_m = 0.0;
      if (a > 0.0 && b > 0.0) {
        dd_f = 0.5 * std::log(2.0 * a / (a + b));
        dd_m = 0.5 * std::log(2.0 * b / (a + b));
      } else if (a > 0.0 || b > 0.0) {
        // one side exactly zero (eps == 0): the zero side's derivative is -inf; clamp
        dd_f = a > 0.0 ? 0.5 * std::log(2.0) : -1e300;
        dd_m = b > 0.0 ? 0.5 * std::log(2.0) : -1e300;
      }
      gf[i] = w.d * dd_f + w.g + w.l * dl_f;
      gm[i] = w.d * dd_m + w.g + w.l * dl_m;
    }
  }
  return grad;
}

GradientCheck check_gradients(std::span<const modelio::AttributeDistribution> dists, const LossConfig& cfg,
                              double fd_step, double kink_guard) {
  if (!(fd_step > 0.0)) throw config_error("check_gradients: fd_step must be > 0");
  auto analytic = loss_gradients(dists, cfg);
  std::vector<modelio::AttributeDistribution> work(dists.begin(), dists.end());
  GradientCheck out;
  auto rel = [](double a, double n) { return std::abs(a - n) / std::max({1.0, std::abs(a), std::abs(n)}); };
  for (std::size_t x = 0; x < work.size(); ++x) {
    const bool kink = std::abs(sum(work[x].pf) - sum(work[x].pm)) <= kink_guard;
    if (kink) ++out.kink_inputs;
    for (int side = 0; side < 2; ++side) {
      auto& vec = side == 0 ? work[x].pf : work[x].pm;
      const auto& an = side == 0 ? analytic.dpf[x] : analytic.dpm[x];
      // the total is a sum of per-input terms, so only input x moves
      std::span<const modelio::AttributeDistribution> one(&work[x], 1);
      for (std::size_t i = 0; i < vec.size(); ++i) {
        const double orig = vec[i];
        const double hi = orig + fd_step, lo = orig - fd_step;
        vec[i] = hi;
        const double up = compute_losses(one, cfg).total;
        vec[i] = lo;
        const double down = compute_losses(one, cfg).total;
        vec[i] = orig;
        const double numeric = (up - down) / (hi - lo);
        const double e = rel(an[i], numeric);
        if (kink) {
          out.kink_rel_error = std::max(out.kink_rel_error, e);
        } else {
          out.max_rel_error = std::max(out.max_rel_error, e);
        }
      }
    }
  }
  return out;
}

namespace {

struct AttributeTokens {
  std::vector<int> female;
  std::vector<int> male;
};

AttributeTokens attribute_tokens(const toylm::Vocabulary& vocab, const lexicon::AttributeLexicon& lex) {
  AttributeTokens t;
  for (const auto& p : lex.pairs()) {
    const int f = vocab.find(p.female_word);
    const int m = vocab.find(p.male_word);
    if (f < 0) throw data_error("toy vocabulary lacks attribute word '" + p.female_word + "'");
    if (m < 0) throw data_error("toy vocabulary lacks attribute word '" + p.male_word + "'");
    t.female.push_back(f);
    t.male.push_back(m);
  }
  return t;
}

std::vector<std::vector<int>> encode_probes(const toylm::Vocabulary& vocab, const probekit::ProbeSet& probes) {
  std::vector<std::vector<int>> out;
  for (const auto& p : probes.probes) {
    auto toks = vocab.encode(p.text);
    if (toks.empty()) throw data_error("probe " + p.id + " has no toy tokens");
    out.push_back(std::move(toks));
  }
  return out;
}

modelio::AttributeDistribution gather(const std::vector<double>& probs, const AttributeTokens& t) {
  modelio::AttributeDistribution d;
  for (int id : t.female) d.pf.push_back(probs[static_cast<std::size_t>(id)]);
  for (int id : t.male) d.pm.push_back(probs[static_cast<std::size_t>(id)]);
  return d;
}

}  // namespace

std::vector<modelio::AttributeDistribution> attribute_distributions(const toylm::ToyLM& model,
                                                                    const probekit::ProbeSet& probes,
                                                                    const lexicon::AttributeLexicon& lex) {
  const auto tokens = attribute_tokens(model.vocab(), lex);
  const auto contexts = encode_probes(model.vocab(), probes);
  std::vector<modelio::AttributeDistribution> out;
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    out.push_back(gather(model.next_token_probs(contexts[i]), tokens));
    out.back().probe_id = probes.probes[i].id;
  }
  return out;
}

TuneResult tune_toy_model(const toylm::ToyLM& model, const probekit::ProbeSet& probes,
                          const lexicon::AttributeLexicon& lex, const LossConfig& cfg, const TuneOptions& opts) {
  if (opts.steps < 0) throw config_error("tune: steps must be >= 0");
  if (opts.batch < 1) throw config_error("tune: batch must be >= 1");
  if (cfg.weights.d < 0 || cfg.weights.g < 0 || cfg.weights.l < 0) throw config_error("tune: loss weights must be >= 0");
  if (probes.probes.empty()) throw data_error("tune: empty probe set");
  TuneResult result{model, {}};
  const auto tokens = attribute_tokens(model.vocab(), lex);
  const auto contexts = encode_probes(model.vocab(), probes);

  std::vector<std::size_t> order(contexts.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  decoder::Rng rng(opts.seed);
  toylm::shuffle_indices(order, rng);
  std::size_t cursor = 0;
  const auto batch = static_cast<std::size_t>(opts.batch);

  for (int step = 0; step < opts.steps; ++step) {
    std::vector<std::vector<int>> batch_ctx;
    for (std::size_t b = 0; b < batch; ++b) {
      if (cursor == order.size()) {
        toylm::shuffle_indices(order, rng);
        cursor = 0;
      }
      batch_ctx.push_back(contexts[order[cursor++]]);
    }
    // forward once to get the batch distributions and loss gradients
    std::vector<std::vector<double>> probs(batch_ctx.size());
    std::vector<modelio::AttributeDistribution> dists(batch_ctx.size());
    for (std::size_t b = 0; b < batch_ctx.size(); ++b) {
      probs[b] = result.model.next_token_probs(batch_ctx[b]);
      dists[b] = gather(probs[b], tokens);
    }
    const auto losses = compute_losses(dists, cfg);
    if (!std::isfinite(losses.total))
      throw data_error("tune: non-finite loss at step " + std::to_string(step));
    result.trace.push_back(losses);
    const auto dp = loss_gradients(dists, cfg);

    auto g = kernels::parallel::batch_gradient(
        result.model, batch_ctx, [&](std::size_t b, std::span<const double>, std::span<double> dlogits) {
          // dL/dz_v = p_v (g_v - sum_u g_u p_u), g nonzero on attribute tokens only
          const auto& p = probs[b];
          std::vector<double> gp(p.size(), 0.0);
          for (std::size_t i = 0; i < tokens.female.size(); ++i) {
            gp[static_cast<std::size_t>(tokens.female[i])] += dp.dpf[b][i];
            gp[static_cast<std::size_t>(tokens.male[i])] += dp.dpm[b][i];
          }
          double inner = 0.0;
          for (std::size_t v = 0; v < p.size(); ++v) inner += gp[v] * p[v];
          for (std::size_t v = 0; v < p.size(); ++v) dlogits[v] = p[v] * (gp[v] - inner);
          return 0.0;
        });
    auto params = result.model.mutable_params();
    for (std::size_t k = 0; k < params.size(); ++k) params[k] -= opts.lr * g.grad[k];
  }
  return result;
}

std::string trace_to_csv(const std::vector<LossBreakdown>& trace) {
  std::string out = "step,l_d,l_g,l_l,total\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& t = trace[i];
    out += std::to_string(i) + "," + text::format_double(t.l_d, 12) + "," + text::format_double(t.l_g, 12) + "," +
           text::format_double(t.l_l, 12) + "," + text::format_double(t.total, 12) + "\n";
  }
  return out;
}

std::string LossSelection::label() const {
  if (d && g && l) return "debias_tuning";
  std::string s = "wo";
  if (!d) s += "_l_d";
  if (!g) s += "_l_g";
  if (!l) s += "_l_l";
  return s;
}

metrics::BiasReport evaluate_toy(const toylm::ToyLM& model, const probekit::ProbeSet& eval_probes,
                                 const lexicon::AttributeLexicon& lex, const EvalOptions& opts, std::string method) {
  modelio::ToyBackend backend(std::make_shared<const toylm::ToyLM>(model), "eval");
  runner::RunOptions run_opts;
  run_opts.decode = opts.decode;
  run_opts.jobs = 1;
  auto run = runner::run_probes(backend, eval_probes, lex, run_opts);
  return metrics::evaluate_run(run, lex, opts.metric, opts.set_name, std::move(method));
}

metrics::BiasReport ablate(const toylm::ToyLM& model, const probekit::ProbeSet& train_probes,
                           const probekit::ProbeSet& eval_probes, const lexicon::AttributeLexicon& lex,
                           LossSelection which, const LossConfig& cfg, const TuneOptions& opts,
                           const EvalOptions& eval) {
  if (!which.d && !which.g && !which.l) throw config_error("ablate: at least one loss must stay enabled");
  LossConfig c = cfg;
  if (!which.d) c.weights.d = 0.0;
  if (!which.g) c.weights.g = 0.0;
  if (!which.l) c.weights.l = 0.0;
  auto tuned = tune_toy_model(model, train_probes, lex, c, opts);
  return evaluate_toy(tuned.model, eval_probes, lex, eval, which.label());
}

}  // namespace biasprobe::debias
