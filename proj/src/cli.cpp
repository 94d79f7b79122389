#include "biasprobe/cli.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "biasprobe/debias.hpp"
#include "biasprobe/demo.hpp"
#include "biasprobe/error.hpp"
#include "biasprobe/lexicon.hpp"
#include "biasprobe/metrics.hpp"
#include "biasprobe/mitigate.hpp"
#include "biasprobe/modelio.hpp"
#include "biasprobe/probekit.hpp"
#include "biasprobe/report.hpp"
#include "biasprobe/runner.hpp"
#include "biasprobe/text.hpp"

namespace biasprobe::cli {

using nlohmann::json;
using nlohmann::ordered_json;

std::string RunManifest::hash() const {
  auto j = to_json();
  j.erase("started_at");
  j.erase("finished_at");
  return text::hex64(text::fnv1a64(j.dump()));
}

ordered_json RunManifest::to_json() const {
  ordered_json j;
  j["command"] = command;
  j["config"] = config;
  j["probe_set_hash"] = probe_set_hash;
  j["lexicon_hash"] = lexicon_hash;
  j["backend"] = backend;
  j["decode"] = decode;
  j["seed"] = seed;
  j["tool_version"] = tool_version;
  j["started_at"] = started_at;
  j["finished_at"] = finished_at;
  return j;
}

namespace {

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Effective settings: defaults < config file < flags.
struct Settings {
  std::string out_dir = "artifacts";
  std::string lexicon_path;
  modelio::BackendDescriptor backend{modelio::BackendKind::Toy, "builtin", "", std::string("BIASPROBE_API_KEY")};
  modelio::DecodeConfig decode{0.0, 1.0, 0, 50, 0};
  int jobs = 4;
  bool append_and = false;
  metrics::MetricConfig metric;

  // build-probes
  std::string strategy = "template";
  std::string lists_path;
  std::string corpus_path;
  std::string sentence_column = "sentence";
  std::vector<std::string> neutral_terms = probekit::default_neutral_terms();
  std::string seed_sentence = "My friend likes blue";
  int n = 200;
  double overlap = 0.8;
  int max_rounds = 10;

  // inputs
  std::string probes_path;
  std::string eval_probes_path;
  std::vector<std::string> runs_paths;
  std::vector<std::string> report_inputs;
  std::string set_name;
  std::string method = "original";
  bool guide = false;
  std::string record_replay;
  std::string format = "csv";
  std::string out_path;

  // sweep
  mitigate::SweepGrid grid;

  // tuning
  std::string model_in = "builtin";
  debias::TuneOptions tune;
  debias::LossConfig loss;
  int holdout_every = 4;
};

template <class T>
void take(const json& j, const char* key, T& dst) {
  if (j.contains(key) && !j[key].is_null()) dst = j[key].get<T>();
}

void apply_config_file(const std::string& path, Settings& s) {
  json j;
  try {
    j = json::parse(text::read_file(path));
  } catch (const json::exception& e) {
    throw config_error("config file " + path + ": " + e.what());
  } catch (const Error& e) {
    throw config_error(e.what());
  }
  try {
    take(j, "out_dir", s.out_dir);
    take(j, "lexicon", s.lexicon_path);
    take(j, "jobs", s.jobs);
    take(j, "append_and", s.append_and);
    if (j.contains("backend")) {
      const auto& b = j["backend"];
      if (b.contains("kind")) s.backend.kind = modelio::parse_backend_kind(b["kind"].get<std::string>());
      take(b, "endpoint", s.backend.endpoint_or_path);
      take(b, "model", s.backend.model_name);
      if (b.contains("auth_env")) s.backend.auth_env = b["auth_env"].get<std::string>();
    }
    if (j.contains("decode")) {
      const auto& d = j["decode"];
      take(d, "temperature", s.decode.temperature);
      take(d, "top_p", s.decode.top_p);
      take(d, "top_k", s.decode.top_k);
      take(d, "max_new_tokens", s.decode.max_new_tokens);
      take(d, "seed", s.decode.seed);
    }
    if (j.contains("metrics")) {
      const auto& m = j["metrics"];
      take(m, "epsilon", s.metric.epsilon);
      if (m.contains("add_log_base"))
        s.metric.add_log_base = m["add_log_base"].get<std::string>() == "e" ? metrics::LogBase::E : metrics::LogBase::Ten;
    }
    if (j.contains("probes")) {
      const auto& p = j["probes"];
      take(p, "strategy", s.strategy);
      take(p, "lists", s.lists_path);
      take(p, "corpus", s.corpus_path);
      take(p, "sentence_column", s.sentence_column);
      take(p, "neutral_terms", s.neutral_terms);
      take(p, "seed_sentence", s.seed_sentence);
      take(p, "n", s.n);
      take(p, "overlap", s.overlap);
      take(p, "max_rounds", s.max_rounds);
    }
    if (j.contains("sweep")) {
      const auto& w = j["sweep"];
      take(w, "temperatures", s.grid.temperatures);
      take(w, "top_ps", s.grid.top_ps);
      take(w, "top_ks", s.grid.top_ks);
      if (w.contains("mode"))
        s.grid.mode = w["mode"].get<std::string>() == "cartesian" ? mitigate::SweepMode::Cartesian
                                                                 : mitigate::SweepMode::OneAtATime;
    }
    if (j.contains("tune")) {
      const auto& t = j["tune"];
      take(t, "model", s.model_in);
      take(t, "steps", s.tune.steps);
      take(t, "lr", s.tune.lr);
      take(t, "batch", s.tune.batch);
      take(t, "holdout_every", s.holdout_every);
      take(t, "epsilon", s.loss.epsilon);
      if (t.contains("weights")) {
        take(t["weights"], "d", s.loss.weights.d);
        take(t["weights"], "g", s.loss.weights.g);
        take(t["weights"], "l", s.loss.weights.l);
      }
    }
  } catch (const json::exception& e) {
    throw config_error("config file " + path + ": " + e.what());
  }
}

// Flag values; unset flags leave the settings alone.
struct Flags {
  std::optional<std::string> config, out_dir, lexicon;
  std::optional<std::string> backend_kind, backend, model, auth_env;
  std::optional<double> temperature, top_p;
  std::optional<std::size_t> top_k;
  std::optional<int> max_new_tokens, jobs;
  std::optional<std::uint64_t> seed;
  bool append_and = false;
  std::optional<double> epsilon;

  std::optional<std::string> strategy, lists, corpus, sentence_column, seed_sentence;
  std::optional<std::vector<std::string>> neutral_terms;
  std::optional<int> n, max_rounds;
  std::optional<double> overlap;

  std::optional<std::string> probes, eval_probes, set_name, method, record_replay, format, out;
  std::optional<std::vector<std::string>> runs, inputs;

  std::optional<std::string> mode;
  std::optional<std::vector<double>> temperatures, top_ps;
  std::optional<std::vector<std::size_t>> top_ks;

  std::optional<std::string> model_in;
  std::optional<int> steps, batch, holdout_every;
  std::optional<double> lr, w_d, w_g, w_l;
};

template <class T, class U>
void over(const std::optional<T>& flag, U& dst) {
  if (flag) dst = *flag;
}

Settings resolve(const Flags& f) {
  Settings s;
  if (f.config) apply_config_file(*f.config, s);
  over(f.out_dir, s.out_dir);
  over(f.lexicon, s.lexicon_path);
  if (f.backend_kind) s.backend.kind = modelio::parse_backend_kind(*f.backend_kind);
  over(f.backend, s.backend.endpoint_or_path);
  over(f.model, s.backend.model_name);
  if (f.auth_env) s.backend.auth_env = *f.auth_env;
  over(f.temperature, s.decode.temperature);
  over(f.top_p, s.decode.top_p);
  over(f.top_k, s.decode.top_k);
  over(f.max_new_tokens, s.decode.max_new_tokens);
  over(f.seed, s.decode.seed);
  over(f.jobs, s.jobs);
  if (f.append_and) s.append_and = true;
  over(f.epsilon, s.metric.epsilon);
  s.loss.epsilon = s.metric.epsilon;
  over(f.strategy, s.strategy);
  over(f.lists, s.lists_path);
  over(f.corpus, s.corpus_path);
  over(f.sentence_column, s.sentence_column);
  over(f.neutral_terms, s.neutral_terms);
  over(f.seed_sentence, s.seed_sentence);
  over(f.n, s.n);
  over(f.max_rounds, s.max_rounds);
  over(f.overlap, s.overlap);
  over(f.probes, s.probes_path);
  over(f.eval_probes, s.eval_probes_path);
  over(f.runs, s.runs_paths);
  over(f.inputs, s.report_inputs);
  over(f.set_name, s.set_name);
  over(f.method, s.method);
  over(f.record_replay, s.record_replay);
  over(f.format, s.format);
  over(f.out, s.out_path);
  if (f.mode) {
    if (*f.mode == "cartesian") s.grid.mode = mitigate::SweepMode::Cartesian;
    else if (*f.mode == "one-at-a-time") s.grid.mode = mitigate::SweepMode::OneAtATime;
    else throw config_error("unknown sweep mode: " + *f.mode);
  }
  over(f.temperatures, s.grid.temperatures);
  over(f.top_ps, s.grid.top_ps);
  over(f.top_ks, s.grid.top_ks);
  over(f.model_in, s.model_in);
  over(f.steps, s.tune.steps);
  over(f.batch, s.tune.batch);
  over(f.holdout_every, s.holdout_every);
  over(f.lr, s.tune.lr);
  over(f.w_d, s.loss.weights.d);
  over(f.w_g, s.loss.weights.g);
  over(f.w_l, s.loss.weights.l);
  s.tune.seed = s.decode.seed;
  if (s.jobs < 1) throw config_error("--jobs must be >= 1");
  s.decode.validate();
  return s;
}

ordered_json backend_json(const modelio::BackendDescriptor& b) {
  ordered_json j;
  j["kind"] = std::string(modelio::to_string(b.kind));
  j["endpoint"] = b.endpoint_or_path;
  j["model"] = b.model_name;
  return j;
}

ordered_json decode_json(const modelio::DecodeConfig& d) { return ordered_json::parse(modelio::to_json(d).dump()); }

ordered_json settings_json(const Settings& s, const std::string& command) {
  ordered_json j;
  j["append_and"] = s.append_and;
  j["epsilon"] = s.metric.epsilon;
  j["add_log_base"] = s.metric.add_log_base == metrics::LogBase::Ten ? "10" : "e";
  if (command == "build-probes") {
    j["strategy"] = s.strategy;
    j["lists"] = s.lists_path;
    j["corpus"] = s.corpus_path;
    j["sentence_column"] = s.sentence_column;
    j["neutral_terms"] = s.neutral_terms;
    j["seed_sentence"] = s.seed_sentence;
    j["n"] = s.n;
    j["overlap"] = s.overlap;
    j["max_rounds"] = s.max_rounds;
  }
  if (command == "eval" || command == "report") {
    j["set_name"] = s.set_name;
    j["method"] = s.method;
    j["format"] = s.format;
  }
  if (command == "run") j["guide"] = s.guide;
  if (command == "sweep") {
    j["mode"] = s.grid.mode == mitigate::SweepMode::Cartesian ? "cartesian" : "one-at-a-time";
    j["temperatures"] = s.grid.temperatures;
    j["top_ps"] = s.grid.top_ps;
    j["top_ks"] = s.grid.top_ks;
  }
  if (command == "tune-toy" || command == "ablate") {
    j["model"] = s.model_in;
    j["steps"] = s.tune.steps;
    j["lr"] = s.tune.lr;
    j["batch"] = s.tune.batch;
    j["holdout_every"] = s.holdout_every;
    j["weights"] = {s.loss.weights.d, s.loss.weights.g, s.loss.weights.l};
  }
  return j;
}

std::string hash_files(const std::vector<std::string>& paths) {
  std::uint64_t h = text::fnv1a64("");
  for (const auto& p : paths) h = text::fnv1a64(text::read_file(p), h);
  return text::hex64(h);
}

// Collects outputs for one subcommand under <out_dir>/<manifest hash>/.
class ArtifactWriter {
 public:
  ArtifactWriter(RunManifest manifest, const std::string& out_dir) : manifest_(std::move(manifest)) {
    hash_ = manifest_.hash();
    dir_ = (std::filesystem::path(out_dir) / hash_).string();
  }
  const std::string& dir() const { return dir_; }
  std::string path(const std::string& rel) const { return (std::filesystem::path(dir_) / rel).string(); }

  void write(const std::string& rel, std::string_view content) {
    text::write_file(path(rel), content);
    files_.push_back(rel);
  }

  PipelineResult finish(std::ostream& out) {
    manifest_.finished_at = utc_now();
    auto j = manifest_.to_json();
    j["manifest_hash"] = hash_;
    j["artifacts"] = files_;
    text::write_file(path("manifest.json"), j.dump(2) + "\n");
    out << dir_ << "\n";
    for (const auto& f : files_) out << "  " << f << "\n";
    PipelineResult r;
    r.artifact_dir = dir_;
    r.artifacts = files_;
    r.artifacts.push_back("manifest.json");
    return r;
  }

 private:
  RunManifest manifest_;
  std::string hash_;
  std::string dir_;
  std::vector<std::string> files_;
};

lexicon::AttributeLexicon load_lexicon(const Settings& s) {
  return s.lexicon_path.empty() ? lexicon::AttributeLexicon::default_lexicon()
                                : lexicon::AttributeLexicon::load(s.lexicon_path);
}

RunManifest base_manifest(const std::string& command, const Settings& s, const lexicon::AttributeLexicon& lex) {
  RunManifest m;
  m.command = command;
  m.config = settings_json(s, command);
  m.lexicon_hash = lex.hash();
  m.backend = backend_json(s.backend);
  m.decode = decode_json(s.decode);
  m.seed = s.decode.seed;
  m.started_at = utc_now();
  return m;
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw config_error(std::string("missing required option ") + flag);
}

std::string stem(const std::string& path) { return std::filesystem::path(path).stem().string(); }

probekit::ProbeSet with_prompts(const probekit::ProbeSet& set, const runner::RunOptions& opts) {
  probekit::ProbeSet out = set;
  for (auto& p : out.probes) p.text = runner::prompt_for(p, opts);
  return out;
}

void write_reports(ArtifactWriter& w, const std::string& base, const std::vector<metrics::BiasReport>& reports) {
  w.write("reports/" + base + ".csv", report::to_csv(reports));
  w.write("reports/" + base + ".json", report::to_json(reports));
  w.write("reports/" + base + ".md", report::to_markdown(reports));
}

// --- subcommands -----------------------------------------------------------

PipelineResult cmd_build_probes(const Settings& s, std::ostream& out) {
  auto lex = load_lexicon(s);
  auto strategy = probekit::parse_strategy(s.strategy);
  auto m = base_manifest("build-probes", s, lex);
  probekit::ProbeSet set;
  std::vector<std::string> inputs;
  switch (strategy) {
    case probekit::Strategy::Template: {
      auto lists = s.lists_path.empty() ? probekit::default_topic_lists()
                                        : probekit::parse_topic_lists(text::read_file(s.lists_path));
      if (!s.lists_path.empty()) inputs.push_back(s.lists_path);
      set = probekit::build_template(lists, lex);
      break;
    }
    case probekit::Strategy::NaturallySourced: {
      require(s.corpus_path, "--corpus");
      inputs.push_back(s.corpus_path);
      set = probekit::build_naturally_sourced(probekit::read_corpus(s.corpus_path, s.sentence_column), s.neutral_terms,
                                              lex);
      break;
    }
    case probekit::Strategy::LLMGenerated: {
      auto backend = modelio::make_backend(s.backend);
      probekit::LlmGenerationOptions o;
      o.n = s.n;
      o.overlap_threshold = s.overlap;
      o.max_rounds = s.max_rounds;
      o.decode.seed = s.decode.seed;
      set = probekit::build_llm_generated(*backend, s.seed_sentence, o, lex);
      break;
    }
  }
  if (!s.set_name.empty()) set.name = s.set_name;
  m.probe_set_hash = inputs.empty() ? set.hash() : hash_files(inputs);
  ArtifactWriter w(m, s.out_dir);
  w.write("probes/" + set.name + ".jsonl", probekit::to_jsonl(set));
  return w.finish(out);
}

PipelineResult cmd_run(const Settings& s, std::ostream& out) {
  require(s.probes_path, "--probes");
  auto lex = load_lexicon(s);
  auto probes = probekit::load_probes(s.probes_path);
  probes.validate(lex);
  auto m = base_manifest("run", s, lex);
  m.probe_set_hash = probes.hash();
  auto backend = modelio::make_backend(s.backend);
  runner::RunOptions o;
  o.decode = s.decode;
  o.jobs = s.jobs;
  o.guide = s.guide;
  o.append_and = s.append_and;
  auto run = runner::run_probes(*backend, probes, lex, o);
  ArtifactWriter w(m, s.out_dir);
  w.write("runs/" + probes.name + ".jsonl", modelio::write_run_jsonl(run));
  if (!s.record_replay.empty()) {
    std::string replay;
    for (const auto& e : run) {
      modelio::ReplayBackend::Entry entry;
      entry.continuation = e.record.continuation;
      entry.tokens = e.record.tokens;
      for (std::size_t i = 0; i < lex.size(); ++i) {
        const auto& p = lex.pairs()[i];
        // zero-probability words are left out and replay as 0
        if (e.distribution.pf[i] > 0) entry.next_token_logprobs[p.female_word] = std::log(e.distribution.pf[i]);
        if (e.distribution.pm[i] > 0) entry.next_token_logprobs[p.male_word] = std::log(e.distribution.pm[i]);
      }
      replay += modelio::ReplayBackend::entry_to_json(e.record.prompt, entry).dump() + "\n";
    }
    text::write_file(s.record_replay, replay);
  }
  return w.finish(out);
}

PipelineResult cmd_eval(const Settings& s, std::ostream& out) {
  if (s.runs_paths.empty()) throw config_error("missing required option --runs");
  auto lex = load_lexicon(s);
  auto m = base_manifest("eval", s, lex);
  m.probe_set_hash = hash_files(s.runs_paths);
  std::vector<metrics::BiasReport> reports;
  for (const auto& path : s.runs_paths) {
    auto run = modelio::read_run_jsonl(text::read_file(path));
    if (run.empty()) throw data_error("run file has no records: " + path);
    reports.push_back(metrics::evaluate_run(run, lex, s.metric, s.set_name.empty() ? stem(path) : s.set_name, s.method));
  }
  ArtifactWriter w(m, s.out_dir);
  write_reports(w, "report", reports);
  return w.finish(out);
}

PipelineResult cmd_sweep(const Settings& s, std::ostream& out) {
  require(s.probes_path, "--probes");
  auto lex = load_lexicon(s);
  auto probes = probekit::load_probes(s.probes_path);
  probes.validate(lex);
  auto m = base_manifest("sweep", s, lex);
  m.probe_set_hash = probes.hash();
  auto backend = modelio::make_backend(s.backend);
  mitigate::SweepOptions o;
  o.base = s.decode;
  o.jobs = s.jobs;
  o.append_and = s.append_and;
  o.set_name = s.set_name;
  auto result = mitigate::sweep_hyperparameters(*backend, probes, s.grid, lex, s.metric, o);
  ArtifactWriter w(m, s.out_dir);
  w.write("reports/sweep.csv", mitigate::sweep_to_csv(result));
  w.write("reports/sweep.json", mitigate::sweep_to_json(result));
  return w.finish(out);
}

PipelineResult cmd_guide_run(const Settings& s, std::ostream& out) {
  require(s.probes_path, "--probes");
  auto lex = load_lexicon(s);
  auto probes = probekit::load_probes(s.probes_path);
  probes.validate(lex);
  auto m = base_manifest("guide-run", s, lex);
  m.probe_set_hash = probes.hash();
  auto backend = modelio::make_backend(s.backend);
  runner::RunOptions o;
  o.decode = s.decode;
  o.jobs = s.jobs;
  o.append_and = s.append_and;
  auto original = runner::run_probes(*backend, probes, lex, o);
  o.guide = true;
  auto guided = runner::run_probes(*backend, probes, lex, o);
  const std::string set = s.set_name.empty() ? probes.name : s.set_name;
  std::vector<metrics::BiasReport> reports{metrics::evaluate_run(original, lex, s.metric, set, "original"),
                                           metrics::evaluate_run(guided, lex, s.metric, set, "instruction_guiding")};
  ArtifactWriter w(m, s.out_dir);
  w.write("runs/original.jsonl", modelio::write_run_jsonl(original));
  w.write("runs/guided.jsonl", modelio::write_run_jsonl(guided));
  write_reports(w, "guide", reports);
  return w.finish(out);
}

struct ToyInputs {
  toylm::ToyLM model;
  probekit::ProbeSet train;
  probekit::ProbeSet eval;
  std::string hash;
};

ToyInputs toy_inputs(const Settings& s, const lexicon::AttributeLexicon& lex) {
  require(s.probes_path, "--probes");
  ToyInputs in;
  in.model = s.model_in == "builtin" ? *demo::builtin_model() : toylm::ToyLM::load(s.model_in);
  auto probes = probekit::load_probes(s.probes_path);
  probes.validate(lex);
  runner::RunOptions o;
  o.append_and = s.append_and;
  if (!s.eval_probes_path.empty()) {
    auto ev = probekit::load_probes(s.eval_probes_path);
    ev.validate(lex);
    in.train = with_prompts(probes, o);
    in.eval = with_prompts(ev, o);
    in.hash = text::hex64(text::fnv1a64(ev.hash(), text::fnv1a64(probes.hash())));
  } else {
    if (s.holdout_every < 2) throw config_error("--holdout-every must be >= 2 without --eval-probes");
    auto all = with_prompts(probes, o);
    in.train.name = probes.name + "_train";
    in.eval.name = probes.name + "_heldout";
    for (std::size_t i = 0; i < all.probes.size(); ++i) {
      const bool held = (i + 1) % static_cast<std::size_t>(s.holdout_every) == 0;
      (held ? in.eval : in.train).probes.push_back(all.probes[i]);
    }
    in.hash = probes.hash();
  }
  if (in.train.probes.empty() || in.eval.probes.empty()) throw data_error("toy tuning needs train and held-out probes");
  return in;
}

debias::EvalOptions toy_eval_options(const Settings& s, const std::string& set_name) {
  debias::EvalOptions e;
  e.decode = s.decode;
  e.metric = s.metric;
  e.set_name = set_name;
  return e;
}

PipelineResult cmd_tune_toy(const Settings& s, std::ostream& out) {
  auto lex = load_lexicon(s);
  auto in = toy_inputs(s, lex);
  auto m = base_manifest("tune-toy", s, lex);
  m.probe_set_hash = in.hash;
  auto eval = toy_eval_options(s, s.set_name.empty() ? in.eval.name : s.set_name);
  auto before = debias::evaluate_toy(in.model, in.eval, lex, eval, "original");
  auto tuned = debias::tune_toy_model(in.model, in.train, lex, s.loss, s.tune);
  auto after = debias::evaluate_toy(tuned.model, in.eval, lex, eval, "debias_tuning");
  ArtifactWriter w(m, s.out_dir);
  w.write("models/tuned.json", tuned.model.to_json() + "\n");
  w.write("reports/tune_trace.csv", debias::trace_to_csv(tuned.trace));
  write_reports(w, "tune", {before, after});
  return w.finish(out);
}

PipelineResult cmd_ablate(const Settings& s, std::ostream& out) {
  auto lex = load_lexicon(s);
  auto in = toy_inputs(s, lex);
  auto m = base_manifest("ablate", s, lex);
  m.probe_set_hash = in.hash;
  auto eval = toy_eval_options(s, s.set_name.empty() ? in.eval.name : s.set_name);
  std::vector<metrics::BiasReport> rows;
  for (auto sel : {debias::LossSelection{true, true, true}, debias::LossSelection{false, true, true},
                   debias::LossSelection{true, false, true}, debias::LossSelection{true, true, false}}) {
    rows.push_back(debias::ablate(in.model, in.train, in.eval, lex, sel, s.loss, s.tune, eval));
  }
  ArtifactWriter w(m, s.out_dir);
  write_reports(w, "ablation", rows);
  return w.finish(out);
}

PipelineResult cmd_report(const Settings& s, std::ostream& out) {
  if (s.report_inputs.empty()) throw config_error("missing required option --inputs");
  auto lex = load_lexicon(s);
  auto m = base_manifest("report", s, lex);
  m.probe_set_hash = hash_files(s.report_inputs);
  std::vector<metrics::BiasReport> rows;
  for (const auto& p : s.report_inputs) {
    auto part = report::reports_from_json(text::read_file(p));
    rows.insert(rows.end(), part.begin(), part.end());
  }
  const auto fmt = report::parse_format(s.format);
  const std::string ext = fmt == report::Format::Csv ? "csv" : fmt == report::Format::Json ? "json" : "md";
  auto rendered = report::render(rows, fmt);
  ArtifactWriter w(m, s.out_dir);
  w.write("reports/report." + ext, rendered);
  if (!s.out_path.empty()) report::emit_report(rows, fmt, s.out_path);
  return w.finish(out);
}

}  // namespace

PipelineResult run_pipeline(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gender bias probing and mitigation harness", "biasprobe"};
  app.require_subcommand(1);
  Flags f;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "JSON config file; flags override it");
    sub->add_option("--out-dir", f.out_dir, "Artifact root directory");
    sub->add_option("--lexicon", f.lexicon, "Attribute word TSV (female<TAB>male)");
    sub->add_option("--seed", f.seed, "Base random seed");
    sub->add_option("--jobs", f.jobs, "Maximum backend requests in flight");
    sub->add_option("--epsilon", f.epsilon, "Smoothing factor for ADD and the losses");
    sub->add_option("--set-name", f.set_name, "Probe set label in reports");
  };
  auto backend_opts = [&](CLI::App* sub) {
    sub->add_option("--backend-kind", f.backend_kind, "toy | replay | http");
    sub->add_option("--backend", f.backend, "Toy checkpoint or 'builtin', replay file, or base URL");
    sub->add_option("--model", f.model, "Model name (http) or backend label");
    sub->add_option("--auth-env", f.auth_env, "Environment variable holding the bearer token");
  };
  auto decode_opts = [&](CLI::App* sub) {
    sub->add_option("--temperature", f.temperature);
    sub->add_option("--top-p", f.top_p);
    sub->add_option("--top-k", f.top_k, "0 disables");
    sub->add_option("--max-new-tokens", f.max_new_tokens);
  };
  auto probes_opt = [&](CLI::App* sub) {
    sub->add_option("--probes", f.probes, "ProbeSet JSONL");
    sub->add_flag("--append-and", f.append_and, "Append ', and' to prompts lacking it");
  };
  auto toy_opts = [&](CLI::App* sub) {
    sub->add_option("--model-in", f.model_in, "Toy checkpoint or 'builtin'");
    sub->add_option("--eval-probes", f.eval_probes, "Held-out probes (default: every Nth probe)");
    sub->add_option("--holdout-every", f.holdout_every);
    sub->add_option("--steps", f.steps);
    sub->add_option("--lr", f.lr);
    sub->add_option("--batch", f.batch);
    sub->add_option("--w-d", f.w_d, "Weight of the distribution distance loss");
    sub->add_option("--w-g", f.w_g, "Weight of the gender probability loss");
    sub->add_option("--w-l", f.w_l, "Weight of the logits difference loss");
    sub->add_option("--temperature", f.temperature);
    sub->add_option("--max-new-tokens", f.max_new_tokens);
  };

  auto* build = app.add_subcommand("build-probes", "Build a probe set");
  common(build);
  backend_opts(build);
  build->add_option("--strategy", f.strategy, "template | natural | llm");
  build->add_option("--lists", f.lists, "Topic lists JSON for the template strategy");
  build->add_option("--corpus", f.corpus, "TSV or JSONL corpus for the natural strategy");
  build->add_option("--sentence-column", f.sentence_column);
  build->add_option("--neutral-terms", f.neutral_terms)->delimiter(',');
  build->add_option("--seed-sentence", f.seed_sentence);
  build->add_option("--n", f.n, "Statements to generate (llm)");
  build->add_option("--overlap", f.overlap, "Near-duplicate Jaccard threshold (llm)");
  build->add_option("--max-rounds", f.max_rounds);

  auto* run = app.add_subcommand("run", "Generate and score every probe");
  common(run);
  backend_opts(run);
  decode_opts(run);
  probes_opt(run);
  bool guide_flag = false;
  run->add_flag("--guide", guide_flag, "Prepend the fairness instruction");
  run->add_option("--record-replay", f.record_replay, "Also write a replay file of this run");

  auto* eval = app.add_subcommand("eval", "Compute bias metrics for run files");
  common(eval);
  eval->add_option("--runs", f.runs, "Run JSONL files")->expected(1, -1);
  eval->add_option("--method", f.method, "Method label");

  auto* sweep = app.add_subcommand("sweep", "Hyperparameter sweep");
  common(sweep);
  backend_opts(sweep);
  probes_opt(sweep);
  sweep->add_option("--max-new-tokens", f.max_new_tokens);
  sweep->add_option("--mode", f.mode, "one-at-a-time | cartesian");
  sweep->add_option("--temperatures", f.temperatures)->delimiter(',');
  sweep->add_option("--top-ps", f.top_ps)->delimiter(',');
  sweep->add_option("--top-ks", f.top_ks)->delimiter(',');

  auto* guide = app.add_subcommand("guide-run", "Baseline vs instruction guiding");
  common(guide);
  backend_opts(guide);
  decode_opts(guide);
  probes_opt(guide);

  auto* tune = app.add_subcommand("tune-toy", "Debias-tune the toy model");
  common(tune);
  probes_opt(tune);
  toy_opts(tune);

  auto* abl = app.add_subcommand("ablate", "Loss ablation on the toy model");
  common(abl);
  probes_opt(abl);
  toy_opts(abl);

  auto* rep = app.add_subcommand("report", "Merge report JSON files");
  common(rep);
  rep->add_option("--inputs", f.inputs, "Report JSON files")->expected(1, -1);
  rep->add_option("--format", f.format, "csv | json | md");
  rep->add_option("--out", f.out, "Also write the merged report here");

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return {code == 0 ? 0 : exit_code(ErrorKind::Config), {}, {}};
  }

  try {
    Settings s = resolve(f);
    s.guide = guide_flag;
    if (*build) return cmd_build_probes(s, out);
    if (*run) return cmd_run(s, out);
    if (*eval) return cmd_eval(s, out);
    if (*sweep) return cmd_sweep(s, out);
    if (*guide) return cmd_guide_run(s, out);
    if (*tune) return cmd_tune_toy(s, out);
    if (*abl) return cmd_ablate(s, out);
    if (*rep) return cmd_report(s, out);
    throw config_error("no subcommand");
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return {exit_code(e.kind()), {}, {}};
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return {exit_code(ErrorKind::Internal), {}, {}};
  }
}

}  // namespace biasprobe::cli
