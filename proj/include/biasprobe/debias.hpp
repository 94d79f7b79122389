#pragma once

#include <span>
#include <string>
#include <vector>

#include "biasprobe/lexicon.hpp"
#include "biasprobe/metrics.hpp"
#include "biasprobe/modelio.hpp"
#include "biasprobe/probekit.hpp"
#include "biasprobe/toylm.hpp"

namespace biasprobe::debias {

struct LossWeights {
  double d = 1.0;
  double g = 1.0;
  double l = 1.0;
};

struct LossConfig {
  double epsilon = 1e-10;
  LossWeights weights;
};

struct LossBreakdown {
  double l_d = 0.0;
  double l_g = 0.0;
  double l_l = 0.0;
  double total = 0.0;
};

/// Losses summed over inputs (no averaging):
///   l_d  half the smoothed pairwise divergence terms,
///   l_g  total attribute-word probability,
///   l_l  normalized female/male mass difference (0/0 counts as 0).
LossBreakdown compute_losses(std::span<const modelio::AttributeDistribution> dists, const LossConfig& cfg);

/// d(total)/d(pf_i(x)) and d(total)/d(pm_i(x)), one entry per input.
struct LossGradient {
  std::vector<std::vector<double>> dpf;
  std::vector<std::vector<double>> dpm;
};

/// Analytic gradient. |.| uses the sign subgradient, 0 at an exact tie.
LossGradient loss_gradients(std::span<const modelio::AttributeDistribution> dists, const LossConfig& cfg);

struct GradientCheck {
  double max_rel_error = 0.0;   // over inputs away from the |.| kink
  double kink_rel_error = 0.0;  // worst error on kink-adjacent inputs, reported only
  std::size_t kink_inputs = 0;
};

/// Central differences of compute_losses against loss_gradients. Relative
/// error is |a - n| / max(1, |a|, |n|). Inputs with |sum pf - sum pm| <=
/// kink_guard are reported separately.
GradientCheck check_gradients(std::span<const modelio::AttributeDistribution> dists, const LossConfig& cfg,
                              double fd_step, double kink_guard = 1e-4);

struct TuneOptions {
  int steps = 500;
  double lr = 2e-4;
  int batch = 16;
  std::uint64_t seed = 0;
};

struct TuneResult {
  toylm::ToyLM model;
  std::vector<LossBreakdown> trace;  // one per step, on that step's batch before the update
};

/// Attribute distribution at the first position after each prompt.
std::vector<modelio::AttributeDistribution> attribute_distributions(const toylm::ToyLM& model,
                                                                    const probekit::ProbeSet& probes,
                                                                    const lexicon::AttributeLexicon& lex);

/// Plain gradient descent over every model parameter on the weighted loss,
/// back-propagated through the softmax at the first continuation position.
TuneResult tune_toy_model(const toylm::ToyLM& model, const probekit::ProbeSet& probes,
                          const lexicon::AttributeLexicon& lex, const LossConfig& cfg, const TuneOptions& opts);

/// "step,l_d,l_g,l_l,total"
std::string trace_to_csv(const std::vector<LossBreakdown>& trace);

/// Which losses stay switched on.
struct LossSelection {
  bool d = true;
  bool g = true;
  bool l = true;
  std::string label() const;  // "debias_tuning" or "wo_l_g" style
};

struct EvalOptions {
  modelio::DecodeConfig decode;  // greedy by default
  metrics::MetricConfig metric;
  std::string set_name = "toy_heldout";
};

/// GAS, GLD and ADD of a toy model on prompts.
metrics::BiasReport evaluate_toy(const toylm::ToyLM& model, const probekit::ProbeSet& eval_probes,
                                 const lexicon::AttributeLexicon& lex, const EvalOptions& opts, std::string method);

/// Tunes with the unselected loss weights zeroed and evaluates on held-out probes.
metrics::BiasReport ablate(const toylm::ToyLM& model, const probekit::ProbeSet& train_probes,
                           const probekit::ProbeSet& eval_probes, const lexicon::AttributeLexicon& lex,
                           LossSelection which, const LossConfig& cfg, const TuneOptions& opts,
                           const EvalOptions& eval);

}  // namespace biasprobe::debias
