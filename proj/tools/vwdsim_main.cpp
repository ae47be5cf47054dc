#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "vwdsim/commands.hpp"

namespace {

struct Overrides {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::optional<int> runs;
  std::optional<int64_t> horizon;
  std::optional<std::string> out;
  std::optional<std::string> policy;
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--config", ov.config_path, "experiment config (JSON)")
      ->required();
  cmd->add_option_function<uint64_t>("--seed", [&ov](uint64_t v) { ov.seed = v; },
                                     "master seed override");
  cmd->add_option_function<int>("--runs", [&ov](int v) { ov.runs = v; },
                                "run count override");
  cmd->add_option_function<int64_t>("--horizon",
                                    [&ov](int64_t v) { ov.horizon = v; },
                                    "horizon override (slots)");
  cmd->add_option_function<std::string>(
      "--out", [&ov](const std::string& v) { ov.out = v; }, "output CSV override");
  cmd->add_option_function<std::string>(
      "--policy", [&ov](const std::string& v) { ov.policy = v; },
      "policy id or comma-separated list override");
  cmd->add_option_function<int>("--threads", [&ov](int v) { ov.threads = v; },
                                "worker thread override (0 = hardware)");
}

int apply_and_run(const Overrides& ov,
                  int (*command)(const vwdsim::ExperimentConfig&)) {
  auto parsed = vwdsim::load_config_file(ov.config_path);
  if (!parsed.errors.empty()) {
    for (const auto& e : parsed.errors)
      std::cerr << "config error: " << (e.path.empty() ? "(root)" : e.path) << ": "
                << e.message << "\n";
    return vwdsim::kExitConfig;
  }
  vwdsim::ExperimentConfig cfg = *parsed.config;
  if (ov.seed) cfg.master_seed = *ov.seed;
  if (ov.runs) {
    if (*ov.runs < 1) {
      std::cerr << "config error: --runs must be >= 1\n";
      return vwdsim::kExitConfig;
    }
    cfg.runs = *ov.runs;
  }
  if (ov.horizon) {
    if (*ov.horizon < 0) {
      std::cerr << "config error: --horizon must be >= 0\n";
      return vwdsim::kExitConfig;
    }
    cfg.horizon = *ov.horizon;
  }
  if (ov.out) cfg.output_path = *ov.out;
  if (ov.threads) cfg.threads = *ov.threads;
  if (ov.policy) {
    cfg.policies.clear();
    std::stringstream ss(*ov.policy);
    std::string id;
    while (std::getline(ss, id, ',')) {
      auto p = vwdsim::parse_policy(id);
      if (!p) {
        std::cerr << "config error: unknown policy \"" << id << "\"\n";
        return vwdsim::kExitConfig;
      }
      cfg.policies.push_back(*p);
    }
    if (cfg.policies.empty()) {
      std::cerr << "config error: --policy list is empty\n";
      return vwdsim::kExitConfig;
    }
  }
  return command(cfg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"second-order wireless scheduling toolkit"};
  app.require_subcommand(1);

  Overrides ov_validate, ov_optimize, ov_simulate, ov_compare;
  auto* validate = app.add_subcommand(
      "validate", "sweep one client parameter, compare theory vs. simulation");
  add_common(validate, ov_validate);
  auto* optimize =
      app.add_subcommand("optimize", "solve per-client delivery targets");
  add_common(optimize, ov_optimize);
  auto* simulate =
      app.add_subcommand("simulate", "run a policy against solved targets");
  add_common(simulate, ov_simulate);
  auto* compare =
      app.add_subcommand("compare", "run several policies with paired seeds");
  add_common(compare, ov_compare);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : vwdsim::kExitConfig;
  }

  if (validate->parsed()) return apply_and_run(ov_validate, vwdsim::cmd_validate);
  if (optimize->parsed()) return apply_and_run(ov_optimize, vwdsim::cmd_optimize);
  if (simulate->parsed()) return apply_and_run(ov_simulate, vwdsim::cmd_simulate);
  if (compare->parsed()) return apply_and_run(ov_compare, vwdsim::cmd_compare);
  return vwdsim::kExitConfig;
}
