#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vwdsim/optimizer.hpp"
#include "vwdsim/policies.hpp"
#include "vwdsim/simulator.hpp"

namespace vwdsim {

struct SweepSpec {
  std::string parameter;  // "p" (sensing) or "ell" (streaming)
  std::vector<double> values;
};

struct ExperimentConfig {
  std::vector<ClientSpec> clients;
  std::vector<Policy> policies = {Policy::Vwd};
  int64_t horizon = 0;
  int runs = 1;
  uint64_t master_seed = 1;
  std::optional<double> delta;  // default 1e-3 * m_full, resolved at solve time
  double truncation_tol = 1e-3;
  std::string output_path = "out.csv";
  int threads = 0;  // 0 = hardware default
  int64_t trajectory_interval = 100;
  InitialStateMode init = InitialStateMode::Stationary;
  std::optional<SweepSpec> sweep;
};

struct ConfigError {
  std::string path;
  std::string message;
};

struct ParseResult {
  std::optional<ExperimentConfig> config;  // set iff errors empty
  std::vector<ConfigError> errors;
};

// Strict parse of the JSON config text: unknown keys, type mismatches and
// range violations are all reported with their paths in one pass.
ParseResult parse_config(const std::string& json_text);

ParseResult load_config_file(const std::string& path);

}  // namespace vwdsim
