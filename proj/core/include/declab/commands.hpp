#pragma once

/**
 * CLI entry points. Each command loads a RunConfig, applies overrides,
 * validates everything before touching the output directory, and writes
 * files that embed the fully resolved config and seed.
 *
 * Exit codes: 0 success, 1 usage/config error, 2 runtime failure,
 * 3 training diverged.
 */

#include <optional>
#include <string>

#include "declab/config.hpp"

namespace declab::harness {

struct CliOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed_override;
  std::optional<std::string> out_override;
  std::optional<int> workers_override;
  /// train: at most one (resume source). eval: any number; each adds an
  /// adapter column to the report.
  std::vector<std::string> checkpoints;
};

/// Builds the pool, estimates the reward matrix on validation instances and
/// writes both greedy and top-k-by-mean action sets with coverage traces.
void cmd_select_actions(const CliOptions& options);

/// Trains the configured adapter; writes trace.csv plus periodic and final
/// checkpoints. With --checkpoint, resumes and reproduces the remaining
/// trace of an uninterrupted run exactly.
void cmd_train(const CliOptions& options);

/// Evaluates best-static, mixed-static and one adapter column per
/// --checkpoint on fresh seeded instances; writes report.json and
/// report.csv.
void cmd_eval(const CliOptions& options);

/// Runs train + eval per sweep seed and aggregates a CSV with t-interval
/// summaries. Child failures are recorded; the command then fails overall.
void cmd_sweep(const CliOptions& options);

/// Exception-to-exit-code wrapper used by the CLI (and tested directly).
int run_command(const std::string& name, const CliOptions& options);

inline constexpr std::uint64_t kEvalInstanceBase = 1ull << 33;

}  // namespace declab::harness
