#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "seqlim/system.hpp"

namespace seqlim {

/// Parsed experiment configuration. The on-disk format is strict JSON: every
/// key must be known (typos in tolerance names fail the parse, with the
/// field path in the message).
struct StageSpec {
  std::string name;  // hypotheses | rpf | gibbs | martingale | limits | cumulant | asip
  // generic numeric/array parameters, already validated per stage
  std::map<std::string, double> num;
  std::map<std::string, std::vector<double>> arr;
  std::map<std::string, std::string> str;
};

struct ExperimentConfig {
  uint64_t seed = 1;
  int threads = 0;
  std::string output;
  SystemOptions sys_opt;
  MapSequence sequence;
  std::optional<TrigObservable> initial_density;
  std::vector<StageSpec> pipeline;
  uint64_t config_hash = 0;
  std::string source_text;

  System make_system() const;
};

/// Parse and validate; throws ConfigError with a field path on any problem.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& json_text,
                              const std::string& origin = "<memory>");

}  // namespace seqlim
