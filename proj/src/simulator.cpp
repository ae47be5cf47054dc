#include "vwdsim/simulator.hpp"

#include <cmath>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace vwdsim {

SimClient make_sim_client(const ClientSpec& spec, double resolved_ell) {
  SimClient c;
  c.kind = spec.kind;
  c.channel = spec.channel;
  if (spec.kind == ClientKind::Sensing) {
    c.lambda = spec.sensing.lambda;
    c.alpha = spec.sensing.alpha;
  } else {
    c.w = spec.streaming.w;
    c.ell = resolved_ell;
    c.beta = spec.streaming.beta;
    c.gamma = spec.streaming.gamma;
    if (!(resolved_ell > 0.0))
      throw std::invalid_argument("streaming deadline must be positive");
    // delivery in the deadline slot itself still counts, so floor the product
    c.deadline_slots =
        static_cast<int64_t>(std::floor(resolved_ell * static_cast<double>(c.w) + 1e-9));
    if (c.deadline_slots < 1)
      throw std::invalid_argument("streaming deadline shorter than one slot");
  }
  return c;
}

PolicyContext make_policy_context(const SimConfig& cfg, Policy policy,
                                  const DeliveryTargets& targets) {
  if (targets.clients.size() != cfg.clients.size())
    throw std::invalid_argument("targets do not match client count");
  PolicyContext pol;
  pol.policy = policy;
  const size_t n = cfg.clients.size();
  pol.mu.resize(n);
  pol.sigma_sq.resize(n);
  pol.lambda.assign(n, 1.0);
  pol.ell.assign(n, 1.0);
  pol.channels.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const auto& cl = cfg.clients[i];
    pol.mu[i] = targets.clients[i].mean;
    pol.sigma_sq[i] = targets.clients[i].variance;
    pol.channels[i] = cl.channel;
    if (cl.kind == ClientKind::Sensing) {
      pol.lambda[i] = cl.lambda;
      pol.sensing_mask |= uint64_t{1} << i;
    } else {
      pol.ell[i] = cl.ell;
    }
  }
  return pol;
}

void init_world(WorldState& world, const SimConfig& cfg, Rng& rng) {
  const size_t n = cfg.clients.size();
  world.t = 0;
  world.on.resize(n);
  world.aoi.assign(n, 1.0);
  world.last_gen.assign(n, -1);
  world.gen_before.assign(n, -1);
  world.queues.assign(n, StreamQueue{});
  world.deficits = DeficitState(static_cast<int>(n));
  world.deficit_scratch.assign(n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    const auto& cl = cfg.clients[i];
    switch (cfg.init) {
      case InitialStateMode::Stationary:
        world.on[i] = sample_initial_state(cl.channel, rng).on ? 1 : 0;
        break;
      case InitialStateMode::ForceGood:
        world.on[i] = 1;
        break;
      case InitialStateMode::ForceBad:
        world.on[i] = 0;
        break;
    }
    if (cl.kind == ClientKind::Streaming) {
      const size_t cap =
          static_cast<size_t>(cl.deadline_slots / std::max(cl.w, 1)) + 3;
      world.queues[i].gen.assign(cap, 0);
    }
  }
  auto& m = world.metrics;
  m.horizon = cfg.horizon;
  m.z_count.assign(n, 0);
  m.timely_count.assign(n, 0);
  m.drop_count.assign(n, 0);
  m.gen_count.assign(n, 0);
  m.aoi_sum.assign(n, 0.0);
  m.traj_t.clear();
  m.traj_z.clear();
}

namespace {

inline void queue_push(StreamQueue& q, int64_t gen) {
  const size_t idx = (q.head + q.count) % q.gen.size();
  q.gen[idx] = gen;
  ++q.count;
}

inline int64_t queue_front(const StreamQueue& q) { return q.gen[q.head]; }

inline void queue_pop(StreamQueue& q) {
  q.head = (q.head + 1) % q.gen.size();
  --q.count;
}

}  // namespace

void advance_slot(WorldState& world, const SimConfig& cfg,
                  const PolicyContext& pol, Rng& rng) {
  const int n = static_cast<int>(cfg.clients.size());
  const int64_t t = ++world.t;
  auto& m = world.metrics;

  uint64_t on_mask = 0;
  uint64_t packet_mask = 0;
  for (int i = 0; i < n; ++i) {
    const auto& cl = cfg.clients[i];
    const double u = rng.next_double();
    const bool was_on = world.on[i] != 0;
    const bool on = was_on ? !(u < cl.channel.p) : (u < cl.channel.q);
    world.on[i] = on ? 1 : 0;
    if (on) on_mask |= uint64_t{1} << i;
  }
  for (int i = 0; i < n; ++i) {
    const auto& cl = cfg.clients[i];
    if (cl.kind == ClientKind::Sensing) {
      world.gen_before[i] = world.last_gen[i];
      if (rng.next_double() < cl.lambda) {
        world.last_gen[i] = t;
        ++m.gen_count[i];
      }
      if (world.last_gen[i] >= 0) packet_mask |= uint64_t{1} << i;
    } else {
      auto& q = world.queues[i];
      if (t % cl.w == 0) {
        queue_push(q, t);
        ++m.gen_count[i];
      }
      while (q.count > 0 && queue_front(q) + cl.deadline_slots < t) {
        queue_pop(q);
        ++m.drop_count[i];
      }
      if (q.count > 0) packet_mask |= uint64_t{1} << i;
    }
  }

  world.deficits.values(pol.mu, world.deficit_scratch);
  SchedulerObservation obs;
  obs.on_mask = on_mask;
  obs.has_packet_mask = packet_mask;
  obs.slot = t;
  obs.aoi = world.aoi;
  obs.deficits = world.deficit_scratch;

  std::optional<int> sel;
  switch (pol.policy) {
    case Policy::Vwd:
      sel = vwd_select(obs, pol.sigma_sq);
      break;
    case Policy::Whittle:
      sel = whittle_select(obs, pol.channels);
      break;
    case Policy::Stationary:
      sel = stationary_randomized_select(obs, pol.mu, rng);
      break;
    case Policy::MaxWeight:
      sel = max_weight_select(obs, pol.lambda, pol.mu);
      break;
    case Policy::Wld:
      sel = wld_select(obs, pol.ell);
      break;
    case Policy::Dbldf:
      sel = dbldf_select(obs);
      break;
    case Policy::StationaryDbldf:
      sel = stationary_dbldf_select(obs, pol.mu, pol.sensing_mask, rng);
      break;
  }

  int delivered_update = -1;  // client whose age resets this slot
  if (sel) {
    const int i = *sel;
    ++m.z_count[i];
    const auto& cl = cfg.clients[i];
    if (cl.kind == ClientKind::Streaming) {
      auto& q = world.queues[i];
      if (q.count > 0) {  // otherwise a dummy slot
        const int64_t gen = queue_front(q);
        queue_pop(q);
        ++m.timely_count[i];
        world.aoi[i] = static_cast<double>(t - gen);
        delivered_update = i;
      }
    } else if (world.gen_before[i] >= 0) {
      // age restarts from the freshest sample taken before this slot
      world.aoi[i] = static_cast<double>(t - world.gen_before[i]);
      delivered_update = i;
    }
  }
  for (int i = 0; i < n; ++i) {
    if (i != delivered_update) world.aoi[i] += 1.0;
    m.aoi_sum[i] += world.aoi[i];
  }
  update_deficits(world.deficits, sel, sel.has_value());

  if (cfg.trajectory_interval > 0 && t % cfg.trajectory_interval == 0) {
    m.traj_t.push_back(t);
    for (int i = 0; i < n; ++i) m.traj_z.push_back(m.z_count[i]);
  }
}

RunMetrics run_trace(const SimConfig& cfg, const PolicyContext& pol, uint64_t seed) {
  if (cfg.horizon < 0) throw std::invalid_argument("horizon must be >= 0");
  Rng rng(seed);
  WorldState world;
  init_world(world, cfg, rng);
  for (int64_t t = 0; t < cfg.horizon; ++t) advance_slot(world, cfg, pol, rng);
  return std::move(world.metrics);
}

namespace {

ExperimentAggregate aggregate_runs(const SimConfig& cfg,
                                   std::vector<RunMetrics>& results) {
  const int n = static_cast<int>(cfg.clients.size());
  const int runs = static_cast<int>(results.size());
  const double T = static_cast<double>(cfg.horizon);
  ExperimentAggregate agg;
  agg.runs = runs;
  agg.horizon = cfg.horizon;
  agg.aoi_mean.assign(n, 0.0);
  agg.outage_rate.assign(n, 0.0);
  agg.timely_rate.assign(n, 0.0);
  agg.mu_hat.assign(n, 0.0);
  agg.sigma_sq_hat.assign(n, 0.0);
  agg.final_counts.assign(runs, std::vector<int64_t>(n, 0));
  if (runs == 0 || cfg.horizon == 0) return agg;

  for (int r = 0; r < runs; ++r) {
    for (int i = 0; i < n; ++i) {
      agg.aoi_mean[i] += results[r].aoi_sum[i] / T;
      agg.outage_rate[i] += static_cast<double>(results[r].drop_count[i]) / T;
      agg.timely_rate[i] += static_cast<double>(results[r].timely_count[i]) / T;
      agg.mu_hat[i] += static_cast<double>(results[r].z_count[i]) / T;
      agg.final_counts[r][i] = results[r].z_count[i];
    }
  }
  for (int i = 0; i < n; ++i) {
    agg.aoi_mean[i] /= runs;
    agg.outage_rate[i] /= runs;
    agg.timely_rate[i] /= runs;
    agg.mu_hat[i] /= runs;
  }
  if (runs >= 2) {
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      const double mean_scaled = agg.mu_hat[i] * std::sqrt(T);  // mean of count/sqrt(T)
      for (int r = 0; r < runs; ++r) {
        const double x = static_cast<double>(agg.final_counts[r][i]) / std::sqrt(T);
        acc += (x - mean_scaled) * (x - mean_scaled);
      }
      agg.sigma_sq_hat[i] = acc / (runs - 1);
    }
  }

  const size_t samples = results.empty() ? 0 : results[0].traj_t.size();
  if (samples > 0) {
    agg.series_t = results[0].traj_t;
    agg.series_mean.assign(n, std::vector<double>(samples, 0.0));
    agg.series_var.assign(n, std::vector<double>(samples, 0.0));
    for (size_t k = 0; k < samples; ++k) {
      const double tk = static_cast<double>(agg.series_t[k]);
      for (int i = 0; i < n; ++i) {
        double mean = 0.0;
        for (int r = 0; r < runs; ++r)
          mean += static_cast<double>(results[r].traj_z[k * n + i]);
        mean /= runs;
        double acc = 0.0;
        for (int r = 0; r < runs; ++r) {
          const double x = static_cast<double>(results[r].traj_z[k * n + i]);
          acc += (x - mean) * (x - mean);
        }
        agg.series_mean[i][k] = mean / tk;
        agg.series_var[i][k] = runs >= 2 ? acc / ((runs - 1) * tk) : 0.0;
      }
    }
  }
  return agg;
}

}  // namespace

ExperimentAggregate run_experiment_serial(const SimConfig& cfg,
                                          const PolicyContext& pol, int runs,
                                          uint64_t master_seed) {
  if (runs < 0) throw std::invalid_argument("runs must be >= 0");
  std::vector<RunMetrics> results(static_cast<size_t>(runs));
  for (int r = 0; r < runs; ++r)
    results[r] = run_trace(cfg, pol, derive_run_seed(master_seed, r));
  return aggregate_runs(cfg, results);
}

ExperimentAggregate run_experiment(const SimConfig& cfg, const PolicyContext& pol,
                                   int runs, uint64_t master_seed, int threads) {
  if (runs < 0) throw std::invalid_argument("runs must be >= 0");
#ifdef _OPENMP
  if (threads <= 0) threads = omp_get_max_threads();
  if (threads > 1) {
    std::vector<RunMetrics> results(static_cast<size_t>(runs));
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (int r = 0; r < runs; ++r)
      results[r] = run_trace(cfg, pol, derive_run_seed(master_seed, r));
    return aggregate_runs(cfg, results);
  }
#else
  (void)threads;
#endif
  return run_experiment_serial(cfg, pol, runs, master_seed);
}

std::vector<SecondOrderModel> empirical_second_order(
    const std::vector<std::vector<int64_t>>& counts, int64_t horizon,
    std::span<const double> mu) {
  if (counts.size() < 2)
    throw std::invalid_argument("second-order estimation needs at least 2 runs");
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  const size_t n = mu.size();
  const double T = static_cast<double>(horizon);
  const double sqT = std::sqrt(T);
  std::vector<SecondOrderModel> out(n);
  for (size_t i = 0; i < n; ++i) {
    double mean = 0.0;
    for (const auto& row : counts) {
      if (row.size() != n) throw std::invalid_argument("ragged count matrix");
      mean += static_cast<double>(row[i]);
    }
    mean /= static_cast<double>(counts.size());
    double acc = 0.0;
    for (const auto& row : counts) {
      const double x = (static_cast<double>(row[i]) - T * mu[i]) / sqT;
      const double centered = x - (mean - T * mu[i]) / sqT;
      acc += centered * centered;
    }
    out[i].mean = mean / T;
    out[i].variance = acc / static_cast<double>(counts.size() - 1);
  }
  return out;
}

namespace {

int64_t subset_mc_one_run(std::span<const GeChannelParams> channels, int64_t horizon,
                          uint64_t seed) {
  Rng rng(seed);
  const size_t n = channels.size();
  uint64_t on = 0;
  for (size_t i = 0; i < n; ++i)
    if (sample_initial_state(channels[i], rng).on) on |= uint64_t{1} << i;
  int64_t count = 0;
  for (int64_t t = 0; t < horizon; ++t) {
    for (size_t i = 0; i < n; ++i) {
      const double u = rng.next_double();
      const bool was_on = (on >> i) & 1;
      const bool now = was_on ? !(u < channels[i].p) : (u < channels[i].q);
      if (now)
        on |= uint64_t{1} << i;
      else
        on &= ~(uint64_t{1} << i);
    }
    count += (on != 0);
  }
  return count;
}

SubsetMcResult subset_mc_aggregate(const std::vector<int64_t>& counts,
                                   int64_t horizon) {
  const int runs = static_cast<int>(counts.size());
  const double T = static_cast<double>(horizon);
  SubsetMcResult res;
  if (runs == 0 || horizon == 0) return res;
  double mean = 0.0;
  for (int64_t c : counts) mean += static_cast<double>(c);
  mean /= runs;
  double acc = 0.0;
  for (int64_t c : counts) {
    const double x = (static_cast<double>(c) - mean) / std::sqrt(T);
    acc += x * x;
  }
  res.mean_hat = mean / T;
  res.var_hat = runs >= 2 ? acc / (runs - 1) : 0.0;
  if (runs >= 2) {
    double acc4 = 0.0;
    for (int64_t c : counts) {
      const double x = (static_cast<double>(c) - mean) / std::sqrt(T);
      acc4 += (x * x - res.var_hat) * (x * x - res.var_hat);
    }
    res.se_mean = std::sqrt(res.var_hat / T / runs);
    res.se_var = std::sqrt(acc4 / (runs - 1) / runs);
  }
  return res;
}

}  // namespace

SubsetMcResult channel_subset_mc_serial(std::span<const GeChannelParams> channels,
                                        int runs, int64_t horizon,
                                        uint64_t master_seed) {
  for (const auto& ch : channels) validate_channel(ch);
  std::vector<int64_t> counts(static_cast<size_t>(runs));
  for (int r = 0; r < runs; ++r)
    counts[r] = subset_mc_one_run(channels, horizon, derive_run_seed(master_seed, r));
  return subset_mc_aggregate(counts, horizon);
}

SubsetMcResult channel_subset_mc(std::span<const GeChannelParams> channels, int runs,
                                 int64_t horizon, uint64_t master_seed, int threads) {
  for (const auto& ch : channels) validate_channel(ch);
#ifdef _OPENMP
  if (threads <= 0) threads = omp_get_max_threads();
  if (threads > 1) {
    std::vector<int64_t> counts(static_cast<size_t>(runs));
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (int r = 0; r < runs; ++r)
      counts[r] = subset_mc_one_run(channels, horizon, derive_run_seed(master_seed, r));
    return subset_mc_aggregate(counts, horizon);
  }
#else
  (void)threads;
#endif
  return channel_subset_mc_serial(channels, runs, horizon, master_seed);
}

}  // namespace vwdsim
