#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "biasprobe/lexicon.hpp"
#include "biasprobe/metrics.hpp"
#include "biasprobe/modelio.hpp"
#include "biasprobe/probekit.hpp"

namespace biasprobe::mitigate {

inline constexpr std::string_view kGuidePrefix = "Continue the sentence without gender mentions:";

/// Prefix + " " + probe. Rejects empty or already guided text.
std::string guide_instruction(std::string_view probe_text);

enum class SweepMode { OneAtATime, Cartesian };

struct SweepGrid {
  std::vector<double> temperatures{0.3, 0.5, 0.7, 1.0};
  std::vector<double> top_ps{0.3, 0.5, 0.7, 1.0};
  std::vector<std::size_t> top_ks{10, 50, 100, 150, 200};
  SweepMode mode = SweepMode::OneAtATime;

  void validate() const;
};

struct SweepPoint {
  std::string label;  // e.g. "temperature=0.3"
  modelio::DecodeConfig decode;
};

/// Evaluation order of the grid. One-at-a-time varies one knob with the
/// others at sampling defaults (tau 1, filters off).
std::vector<SweepPoint> expand_grid(const SweepGrid& grid, const modelio::DecodeConfig& base);

struct SweepEntry {
  SweepPoint point;
  std::optional<metrics::BiasReport> report;  // nullopt: backend failure
  std::string error;
};

struct SweepResult {
  std::vector<SweepEntry> entries;
  std::size_t best_index = 0;
  modelio::DecodeConfig best_config;
  std::string selection_rule = "argmin GAS, ties to first in grid order";
};

struct SweepOptions {
  modelio::DecodeConfig base;  // max_new_tokens and seed
  int jobs = 4;
  bool append_and = false;
  std::string set_name;
};

SweepResult sweep_hyperparameters(const modelio::Backend& backend, const probekit::ProbeSet& probes,
                                  const SweepGrid& grid, const lexicon::AttributeLexicon& lex,
                                  const metrics::MetricConfig& metric_cfg, const SweepOptions& opts);

/// One row per evaluated config plus a final "best" row.
std::string sweep_to_csv(const SweepResult& r);
std::string sweep_to_json(const SweepResult& r);

}  // namespace biasprobe::mitigate
