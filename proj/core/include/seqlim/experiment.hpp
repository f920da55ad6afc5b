#pragma once

#include <filesystem>

#include "seqlim/config.hpp"

namespace seqlim {

struct Verdict {
  std::string stage;
  std::string name;
  bool pass = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string note;
};

struct StageResult {
  std::string stage;
  bool ran = false;
  bool skipped = false;
  bool numeric_failure = false;
  std::string marker;
  double seconds = 0.0;
};

struct ExperimentReport {
  int exit_code = 0;
  std::filesystem::path dir;
  uint64_t config_hash = 0;
  std::vector<StageResult> stages;
  std::vector<Verdict> verdicts;
};

/// Run the configured pipeline; artifacts land in a timestamped subdirectory
/// of `out_root` (the config's output field, the SEQLIMITS_OUT variable, or
/// ./reports). Exit codes: 0 success, 1 verdict failure, 2 config error,
/// 3 numeric failure.
ExperimentReport run_experiment(const ExperimentConfig& cfg,
                                const std::filesystem::path& out_root,
                                int threads_override = -1);

/// Dry-run plan: stages, matrix sizes, Monte Carlo budgets. No computation.
std::string describe_experiment(const ExperimentConfig& cfg);

/// Compare two report directories by their summaries and distance tables;
/// flags metrics differing beyond their recorded error bars.
struct CompareResult {
  std::string text;
  bool schema_mismatch = false;
  int flagged = 0;
};
CompareResult compare_reports(const std::filesystem::path& a,
                              const std::filesystem::path& b);

std::filesystem::path default_output_root(const ExperimentConfig& cfg);

}  // namespace seqlim
