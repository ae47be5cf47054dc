#pragma once

#include "vwdsim/config.hpp"

namespace vwdsim {

// Shared exit codes: 0 success, 2 config error, 3 infeasible problem,
// 4 runtime/IO failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitInfeasible = 3;
inline constexpr int kExitRuntime = 4;

// Sweeps one channel/deadline parameter of a single client and writes
// theoretical vs. empirical rows.
int cmd_validate(const ExperimentConfig& cfg);

// Solves the target allocation and writes per-client targets, the objective
// and the binding constraints.
int cmd_optimize(const ExperimentConfig& cfg);

// Runs the configured policy against the solved targets; writes per-client
// metrics plus a convergence time-series CSV next to the main output.
int cmd_simulate(const ExperimentConfig& cfg);

// Runs every configured policy with paired per-run seeds and writes one
// objective row per policy.
int cmd_compare(const ExperimentConfig& cfg);

std::string series_path_for(const std::string& output_path);

}  // namespace vwdsim
