#include "biasprobe/mitigate.hpp"

#include <cmath>

#include <json.hpp>

#include "biasprobe/error.hpp"
#include "biasprobe/report.hpp"
#include "biasprobe/runner.hpp"
#include "biasprobe/text.hpp"

namespace biasprobe::mitigate {

std::string guide_instruction(std::string_view probe_text) {
  if (text::trim(probe_text).empty()) throw data_error("guide_instruction: empty probe");
  if (text::trim(probe_text).substr(0, kGuidePrefix.size()) == kGuidePrefix)
    throw data_error("guide_instruction: prompt is already guided");
  return std::string(kGuidePrefix) + " " + std::string(probe_text);
}

void SweepGrid::validate() const {
  if (temperatures.empty() || top_ps.empty() || top_ks.empty()) throw config_error("sweep grid lists must be non-empty");
  for (double t : temperatures)
    if (!(t >= 0.0) || !std::isfinite(t)) throw config_error("sweep grid: temperature must be >= 0");
  for (double p : top_ps)
    if (!(p > 0.0 && p <= 1.0)) throw config_error("sweep grid: top_p must lie in (0, 1]");
  for (auto k : top_ks)
    if (k == 0) throw config_error("sweep grid: top_k must be >= 1");
}

std::vector<SweepPoint> expand_grid(const SweepGrid& grid, const modelio::DecodeConfig& base) {
  grid.validate();
  auto sampling = base;
  sampling.temperature = 1.0;
  sampling.top_p = 1.0;
  sampling.top_k = 0;
  std::vector<SweepPoint> out;
  if (grid.mode == SweepMode::OneAtATime) {
    for (double t : grid.temperatures) {
      auto d = sampling;
      d.temperature = t;
      out.push_back({"temperature=" + text::format_double(t, 6), d});
    }
    for (double p : grid.top_ps) {
      auto d = sampling;
      d.top_p = p;
      out.push_back({"top_p=" + text::format_double(p, 6), d});
    }
    for (auto k : grid.top_ks) {
      auto d = sampling;
      d.top_k = k;
      out.push_back({"top_k=" + std::to_string(k), d});
    }
    return out;
  }
  for (double t : grid.temperatures) {
    for (double p : grid.top_ps) {
      for (auto k : grid.top_ks) {
        auto d = sampling;
        d.temperature = t;
        d.top_p = p;
        d.top_k = k;
        out.push_back({"temperature=" + text::format_double(t, 6) + ",top_p=" + text::format_double(p, 6) +
                           ",top_k=" + std::to_string(k),
                       d});
      }
    }
  }
  return out;
}

SweepResult sweep_hyperparameters(const modelio::Backend& backend, const probekit::ProbeSet& probes,
                                  const SweepGrid& grid, const lexicon::AttributeLexicon& lex,
                                  const metrics::MetricConfig& metric_cfg, const SweepOptions& opts) {
  auto points = expand_grid(grid, opts.base);
  if (probes.probes.empty()) throw data_error("sweep: empty probe set");

  // Attribute probabilities do not depend on decoding: score once.
  runner::RunOptions score_opts;
  score_opts.append_and = opts.append_and;
  std::vector<modelio::AttributeDistribution> dists(probes.size());
  runner::parallel_for(probes.size(), opts.jobs, [&](std::size_t i) {
    dists[i] = backend.score_attribute_words(runner::prompt_for(probes.probes[i], score_opts), lex);
    dists[i].probe_id = probes.probes[i].id;
  });
  const double gld = metrics::compute_gld(dists);
  const auto add = metrics::compute_add(dists, metric_cfg);

  SweepResult result;
  for (std::size_t c = 0; c < points.size(); ++c) {
    SweepEntry entry{points[c], std::nullopt, {}};
    runner::RunOptions run_opts;
    run_opts.decode = points[c].decode;
    run_opts.decode.seed = decoder::derive_seed(opts.base.seed, c);
    run_opts.jobs = opts.jobs;
    run_opts.append_and = opts.append_and;
    run_opts.score = false;
    try {
      auto run = runner::run_probes(backend, probes, lex, run_opts);
      std::vector<modelio::GenerationRecord> records;
      for (auto& e : run) records.push_back(std::move(e.record));
      metrics::BiasReport rep;
      rep.set_name = opts.set_name.empty() ? probes.name : opts.set_name;
      rep.backend_id = backend.id();
      rep.method_label = "hyperparameter:" + points[c].label;
      rep.n_records = records.size();
      rep.gas = metrics::compute_gas(records, lex);
      auto split = metrics::compute_gas_split(records, lex);
      rep.gas_f = split.gas_f;
      rep.gas_m = split.gas_m;
      rep.delta = split.delta;
      rep.gld = gld;
      rep.add_raw = add.raw;
      rep.add_log = add.log;
      entry.report = rep;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Backend) throw;
      entry.error = e.what();
    }
    result.entries.push_back(std::move(entry));
  }

  std::optional<std::size_t> best;
  for (std::size_t c = 0; c < result.entries.size(); ++c) {
    const auto& r = result.entries[c].report;
    if (!r) continue;
    if (!best || r->gas < result.entries[*best].report->gas) best = c;
  }
  if (!best) throw backend_error("sweep: every configuration failed");
  result.best_index = *best;
  result.best_config = result.entries[*best].point.decode;
  return result;
}

std::string sweep_to_csv(const SweepResult& r) {
  std::string out = "config,label,temperature,top_p,top_k,status," + std::string(report::kCsvHeader) + "\n";
  auto row = [&](const std::string& config, const SweepEntry& e) {
    out += config + "," + e.point.label + "," + text::format_double(e.point.decode.temperature, 6) + "," +
           text::format_double(e.point.decode.top_p, 6) + "," + std::to_string(e.point.decode.top_k) + ",";
    if (e.report) {
      out += "ok," + report::csv_row(*e.report) + "\n";
    } else {
      out += "missing,,,,,,,,,,,\n";
    }
  };
  for (std::size_t c = 0; c < r.entries.size(); ++c) row(std::to_string(c), r.entries[c]);
  row("best", r.entries.at(r.best_index));
  return out;
}

std::string sweep_to_json(const SweepResult& r) {
  nlohmann::ordered_json j;
  j["selection_rule"] = r.selection_rule;
  j["best_index"] = r.best_index;
  j["best_label"] = r.entries.at(r.best_index).point.label;
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& e : r.entries) {
    nlohmann::ordered_json row;
    row["label"] = e.point.label;
    row["decode"] = nlohmann::ordered_json::parse(modelio::to_json(e.point.decode).dump());
    if (e.report) {
      row["status"] = "ok";
      row["report"] = report::to_ordered_json(*e.report);
    } else {
      row["status"] = "missing";
      row["error"] = e.error;
    }
    arr.push_back(row);
  }
  j["configs"] = arr;
  return j.dump(2) + "\n";
}

}  // namespace biasprobe::mitigate
