#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace biasprobe::cli {

inline constexpr const char* kToolVersion = "0.1.0";

/// Snapshot of everything that determines a subcommand's outputs.
struct RunManifest {
  std::string command;
  nlohmann::ordered_json config;  // effective settings after flag overrides
  std::string probe_set_hash;
  std::string lexicon_hash;
  nlohmann::ordered_json backend;
  nlohmann::ordered_json decode;
  std::uint64_t seed = 0;
  std::string tool_version = kToolVersion;
  std::string started_at;
  std::string finished_at;

  /// Hash of every field except the timestamps.
  std::string hash() const;
  nlohmann::ordered_json to_json() const;
};

struct PipelineResult {
  int exit_code = 0;
  std::string artifact_dir;
  std::vector<std::string> artifacts;  // paths relative to artifact_dir
};

/// Parses argv-style arguments (without the program name), runs the
/// subcommand and maps failures to exit codes: 0 ok, 2 config, 3 backend,
/// 4 data, 5 internal.
PipelineResult run_pipeline(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace biasprobe::cli
