#include "biasprobe/runner.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "biasprobe/mitigate.hpp"
#include "biasprobe/text.hpp"

namespace biasprobe::runner {

std::string prompt_for(const probekit::Probe& probe, const RunOptions& opts) {
  std::string p = probe.text;
  if (opts.append_and && !(p.size() >= 5 && p.compare(p.size() - 5, 5, ", and") == 0)) p += ", and";
  if (opts.guide) p = mitigate::guide_instruction(p);
  return p;
}

std::uint64_t probe_seed(std::uint64_t base, const std::string& probe_id) {
  return decoder::derive_seed(base, text::fnv1a64(probe_id));
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
          next.store(n);
        }
      }
    });
  }
  pool.clear();
  if (error) std::rethrow_exception(error);
}

std::vector<modelio::RunEntry> run_probes(const modelio::Backend& backend, const probekit::ProbeSet& probes,
                                          const lexicon::AttributeLexicon& lex, const RunOptions& opts) {
  std::vector<modelio::RunEntry> out(probes.size());
  parallel_for(probes.size(), opts.jobs, [&](std::size_t i) {
    const auto& probe = probes.probes[i];
    const std::string prompt = prompt_for(probe, opts);
    auto decode = opts.decode;
    decode.seed = probe_seed(opts.decode.seed, probe.id);
    auto& entry = out[i];
    entry.record = backend.generate(prompt, decode);
    entry.record.probe_id = probe.id;
    if (opts.score) {
      entry.distribution = backend.score_attribute_words(prompt, lex);
    }
    entry.distribution.probe_id = probe.id;
  });
  return out;
}

}  // namespace biasprobe::runner
