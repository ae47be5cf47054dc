#include "vwdsim/commands.hpp"

#include <cmath>
#include <iostream>

#include "vwdsim/csv.hpp"

namespace vwdsim {

namespace {

AllocationProblem problem_from(const ExperimentConfig& cfg) {
  return make_problem(cfg.clients, cfg.delta.value_or(0.0), cfg.truncation_tol);
}

SimConfig sim_config_from(const ExperimentConfig& cfg,
                          const AllocationSolution& sol) {
  SimConfig sim;
  sim.horizon = cfg.horizon;
  sim.init = cfg.init;
  sim.trajectory_interval = cfg.trajectory_interval;
  sim.clients.reserve(cfg.clients.size());
  for (size_t i = 0; i < cfg.clients.size(); ++i)
    sim.clients.push_back(make_sim_client(cfg.clients[i], sol.delays[i]));
  return sim;
}

double empirical_objective(const SimConfig& sim, const ExperimentAggregate& agg) {
  double f = 0.0;
  for (size_t i = 0; i < sim.clients.size(); ++i) {
    const auto& cl = sim.clients[i];
    if (cl.kind == ClientKind::Sensing)
      f += cl.alpha * agg.aoi_mean[i];
    else
      f += cl.beta * agg.outage_rate[i] + cl.gamma * cl.ell * cl.ell;
  }
  return f;
}

}  // namespace

std::string series_path_for(const std::string& output_path) {
  const auto dot = output_path.find_last_of('.');
  const auto slash = output_path.find_last_of("/\\");
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
    return output_path + "_series";
  return output_path.substr(0, dot) + "_series" + output_path.substr(dot);
}

int cmd_validate(const ExperimentConfig& cfg) {
  if (cfg.clients.size() != 1) {
    std::cerr << "validate: config must contain exactly one client\n";
    return kExitConfig;
  }
  if (!cfg.sweep) {
    std::cerr << "validate: config must contain a sweep\n";
    return kExitConfig;
  }
  const auto& cl = cfg.clients[0];
  const bool sensing = cl.kind == ClientKind::Sensing;
  if (sensing && cfg.sweep->parameter != "p") {
    std::cerr << "validate: sensing client sweeps \"p\"\n";
    return kExitConfig;
  }
  if (!sensing && cfg.sweep->parameter != "ell") {
    std::cerr << "validate: streaming client sweeps \"ell\"\n";
    return kExitConfig;
  }
  try {
    CsvWriter csv(cfg.output_path);
    csv.row({"metric", "sweep_param", "sweep_value", "k_depth", "theory",
             "empirical", "rel_error"});
    for (double value : cfg.sweep->values) {
      ClientSpec swept = cl;
      if (sensing)
        swept.channel.p = value;
      else
        swept.streaming.ell = value;
      try {
        validate_channel(swept.channel);
      } catch (const std::invalid_argument& e) {
        std::cerr << "validate: sweep value " << value << ": " << e.what() << "\n";
        return kExitConfig;
      }
      const GeChannelParams chs[] = {swept.channel};
      const int64_t K = truncation_depth(chs, cfg.truncation_tol);
      const SecondOrderModel model{subset_mean(chs), subset_variance(chs, K)};

      SimConfig sim;
      sim.horizon = cfg.horizon;
      sim.init = cfg.init;
      sim.clients.push_back(make_sim_client(
          swept, sensing ? 0.0 : swept.streaming.ell));
      DeliveryTargets targets;
      targets.clients.push_back(model);
      PolicyContext pol = make_policy_context(sim, Policy::Vwd, targets);
      const auto agg =
          run_experiment(sim, pol, cfg.runs, cfg.master_seed, cfg.threads);

      double theory, empirical;
      const char* metric;
      if (sensing) {
        metric = "aoi";
        theory = aoi_approx(model, swept.sensing.lambda);
        empirical = agg.aoi_mean[0];
      } else {
        metric = "outage";
        theory = outage_approx(model, swept.streaming.ell);
        empirical = agg.outage_rate[0];
      }
      const double rel =
          empirical != 0.0 ? std::fabs(empirical - theory) / empirical : 0.0;
      csv.row({metric, cfg.sweep->parameter, csv_num(value), csv_num(K),
               csv_num(theory), csv_num(empirical), csv_num(rel)});
    }
  } catch (const NoFiniteTruncation& e) {
    std::cerr << "validate: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "validate: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_optimize(const ExperimentConfig& cfg) {
  try {
    const auto pb = problem_from(cfg);
    const auto sol = solve(pb);
    CsvWriter csv(cfg.output_path);
    csv.row({"record", "name", "kind", "mu", "sigma_sq", "ell", "value"});
    for (size_t i = 0; i < pb.clients.size(); ++i) {
      const auto& cl = pb.clients[i];
      const auto& tg = sol.targets.clients[i];
      double term;
      if (cl.kind == ClientKind::Sensing)
        term = cl.sensing.alpha * aoi_approx(tg, cl.sensing.lambda);
      else
        term = cl.streaming.beta * outage_approx(tg, sol.delays[i]) +
               cl.streaming.gamma * sol.delays[i] * sol.delays[i];
      csv.row({"client", cl.id,
               cl.kind == ClientKind::Sensing ? "sensing" : "streaming",
               csv_num(tg.mean), csv_num(tg.variance),
               cl.kind == ClientKind::Streaming ? csv_num(sol.delays[i]) : "",
               csv_num(term)});
    }
    csv.row({"objective", "", "", "", "", "", csv_num(sol.objective)});
    for (const auto& b : sol.binding)
      csv.row({"binding", describe_constraint(b), "", "", "", "", csv_num(b.slack)});
  } catch (const InfeasibleProblem& e) {
    std::cerr << "optimize: infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const std::invalid_argument& e) {
    std::cerr << "optimize: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "optimize: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_simulate(const ExperimentConfig& cfg) {
  if (cfg.policies.size() != 1) {
    std::cerr << "simulate: exactly one policy required (use compare for lists)\n";
    return kExitConfig;
  }
  try {
    const auto pb = problem_from(cfg);
    const auto sol = solve(pb);
    const auto sim = sim_config_from(cfg, sol);
    const auto pol = make_policy_context(sim, cfg.policies[0], sol.targets);
    const auto agg =
        run_experiment(sim, pol, cfg.runs, cfg.master_seed, cfg.threads);

    CsvWriter csv(cfg.output_path);
    csv.row({"client", "kind", "policy", "runs", "horizon", "aoi_emp",
             "aoi_theory", "outage_emp", "outage_theory", "timely_emp",
             "mu_target", "mu_hat", "sigma_sq_target", "sigma_sq_hat",
             "objective_term_emp", "objective_term_theory"});
    const std::string pname = policy_name(cfg.policies[0]);
    double sum_aoi_e = 0, sum_out_e = 0, sum_timely = 0, sum_obj_e = 0, sum_obj_t = 0;
    for (size_t i = 0; i < sim.clients.size(); ++i) {
      const auto& cl = sim.clients[i];
      const auto& tg = sol.targets.clients[i];
      const bool sensing = cl.kind == ClientKind::Sensing;
      const double aoi_th = sensing ? aoi_approx(tg, cl.lambda) : 0.0;
      const double out_th = sensing ? 0.0 : outage_approx(tg, cl.ell);
      const double term_e = sensing ? cl.alpha * agg.aoi_mean[i]
                                    : cl.beta * agg.outage_rate[i] +
                                          cl.gamma * cl.ell * cl.ell;
      const double term_t = sensing ? cl.alpha * aoi_th
                                    : cl.beta * out_th + cl.gamma * cl.ell * cl.ell;
      sum_aoi_e += sensing ? agg.aoi_mean[i] : 0.0;
      sum_out_e += agg.outage_rate[i];
      sum_timely += agg.timely_rate[i];
      sum_obj_e += term_e;
      sum_obj_t += term_t;
      csv.row({cfg.clients[i].id, sensing ? "sensing" : "streaming", pname,
               csv_num(static_cast<int64_t>(agg.runs)), csv_num(agg.horizon),
               sensing ? csv_num(agg.aoi_mean[i]) : "",
               sensing ? csv_num(aoi_th) : "",
               sensing ? "" : csv_num(agg.outage_rate[i]),
               sensing ? "" : csv_num(out_th),
               sensing ? "" : csv_num(agg.timely_rate[i]), csv_num(tg.mean),
               csv_num(agg.mu_hat[i]), csv_num(tg.variance),
               csv_num(agg.sigma_sq_hat[i]), csv_num(term_e), csv_num(term_t)});
    }
    csv.row({"_total", "", pname, csv_num(static_cast<int64_t>(agg.runs)),
             csv_num(agg.horizon), csv_num(sum_aoi_e), "", csv_num(sum_out_e), "",
             csv_num(sum_timely), "", "", "", "", csv_num(sum_obj_e),
             csv_num(sum_obj_t)});

    CsvWriter series(series_path_for(cfg.output_path));
    series.row({"slot", "client", "mean_hat", "var_hat", "mu_target",
                "sigma_sq_target"});
    for (size_t k = 0; k < agg.series_t.size(); ++k)
      for (size_t i = 0; i < sim.clients.size(); ++i)
        series.row({csv_num(agg.series_t[k]), cfg.clients[i].id,
                    csv_num(agg.series_mean[i][k]), csv_num(agg.series_var[i][k]),
                    csv_num(sol.targets.clients[i].mean),
                    csv_num(sol.targets.clients[i].variance)});
  } catch (const InfeasibleProblem& e) {
    std::cerr << "simulate: infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const std::invalid_argument& e) {
    std::cerr << "simulate: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "simulate: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_compare(const ExperimentConfig& cfg) {
  if (cfg.policies.empty()) {
    std::cerr << "compare: at least one policy required\n";
    return kExitConfig;
  }
  try {
    const auto pb = problem_from(cfg);
    const auto sol = solve(pb);
    const auto sim = sim_config_from(cfg, sol);
    CsvWriter csv(cfg.output_path);
    csv.row({"policy", "runs", "horizon", "objective_emp", "objective_theory",
             "aoi_total", "weighted_aoi_total", "outage_total",
             "weighted_outage_total", "timely_total"});
    for (Policy p : cfg.policies) {
      const auto pol = make_policy_context(sim, p, sol.targets);
      // same master seed for every policy: paired per-run randomness
      const auto agg =
          run_experiment(sim, pol, cfg.runs, cfg.master_seed, cfg.threads);
      double aoi = 0, waoi = 0, out = 0, wout = 0, timely = 0;
      for (size_t i = 0; i < sim.clients.size(); ++i) {
        const auto& cl = sim.clients[i];
        if (cl.kind == ClientKind::Sensing) {
          aoi += agg.aoi_mean[i];
          waoi += cl.alpha * agg.aoi_mean[i];
        } else {
          out += agg.outage_rate[i];
          wout += cl.beta * agg.outage_rate[i];
          timely += agg.timely_rate[i];
        }
      }
      csv.row({policy_name(p), csv_num(static_cast<int64_t>(agg.runs)),
               csv_num(agg.horizon), csv_num(empirical_objective(sim, agg)),
               csv_num(sol.objective), csv_num(aoi), csv_num(waoi), csv_num(out),
               csv_num(wout), csv_num(timely)});
    }
  } catch (const InfeasibleProblem& e) {
    std::cerr << "compare: infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const std::invalid_argument& e) {
    std::cerr << "compare: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "compare: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace vwdsim
