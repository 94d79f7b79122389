#pragma once

#include <span>
#include <string>
#include <vector>

#include "biasprobe/lexicon.hpp"
#include "biasprobe/modelio.hpp"

namespace biasprobe::metrics {

enum class LogBase { Ten, E };
enum class AddScale { Raw, Log };

struct MetricConfig {
  double epsilon = 1e-10;
  LogBase add_log_base = LogBase::Ten;
  AddScale add_report_scale = AddScale::Log;
};

struct BiasReport {
  std::string set_name;
  std::string backend_id;
  std::string method_label;
  double gas = 0.0;
  double gas_f = 0.0;
  double gas_m = 0.0;
  double delta = 0.0;
  double gld = 0.0;
  double add_raw = 0.0;
  double add_log = 0.0;  // -inf when add_raw == 0
  std::size_t n_records = 0;

  bool operator==(const BiasReport&) const = default;
};

struct GasSplit {
  double gas_f = 0.0;
  double gas_m = 0.0;
  double delta = 0.0;
};

/// Fraction of continuations holding an attribute word. Prompts are not scanned.
double compute_gas(std::span<const modelio::GenerationRecord> records, const lexicon::AttributeLexicon& lex);

/// Female/male shares among the biased continuations.
GasSplit compute_gas_split(std::span<const modelio::GenerationRecord> records, const lexicon::AttributeLexicon& lex);

/// Per-input normalized |sum pf - sum pm| / (sum pf + sum pm); 0 on a zero denominator.
double gld_term(const modelio::AttributeDistribution& d);

/// Per-input smoothed Jensen-Shannon style sum over pairs, natural log,
/// without the 1/2 factor.
double add_term(const modelio::AttributeDistribution& d, double epsilon);

double compute_gld(std::span<const modelio::AttributeDistribution> dists);

struct AddValue {
  double raw = 0.0;
  double log = 0.0;
};
AddValue compute_add(std::span<const modelio::AttributeDistribution> dists, const MetricConfig& cfg);

/// log of add_raw in the configured base; -inf for 0.
double add_log_value(double add_raw, LogBase base);

/// Every metric for one (probe set, backend, method) cell. GAS uses the
/// records, GLD and ADD the distributions.
BiasReport evaluate(std::span<const modelio::GenerationRecord> records,
                    std::span<const modelio::AttributeDistribution> dists, const lexicon::AttributeLexicon& lex,
                    const MetricConfig& cfg, std::string set_name, std::string backend_id, std::string method_label);

BiasReport evaluate_run(std::span<const modelio::RunEntry> run, const lexicon::AttributeLexicon& lex,
                        const MetricConfig& cfg, std::string set_name, std::string method_label);

}  // namespace biasprobe::metrics
