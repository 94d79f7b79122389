#pragma once

#include <functional>
#include <string>
#include <vector>

#include "biasprobe/lexicon.hpp"
#include "biasprobe/modelio.hpp"
#include "biasprobe/probekit.hpp"

namespace biasprobe::runner {

struct RunOptions {
  modelio::DecodeConfig decode;
  /// Maximum requests in flight.
  int jobs = 4;
  /// Prepend the fairness instruction to every prompt.
  bool guide = false;
  /// Append ", and" to prompts that do not already end with it.
  bool append_and = false;
  /// Also score attribute words (skipped when only GAS is needed).
  bool score = true;
};

/// Prompt actually sent for a probe under the given options.
std::string prompt_for(const probekit::Probe& probe, const RunOptions& opts);

/// Seed for one probe under a base seed.
std::uint64_t probe_seed(std::uint64_t base, const std::string& probe_id);

/// Generates (and scores) every probe. Output order follows the probe set
/// regardless of completion order.
std::vector<modelio::RunEntry> run_probes(const modelio::Backend& backend, const probekit::ProbeSet& probes,
                                          const lexicon::AttributeLexicon& lex, const RunOptions& opts);

/// Calls fn(i) for i in [0, n) on up to `jobs` threads. The first exception
/// thrown is rethrown after all workers finish.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace biasprobe::runner
