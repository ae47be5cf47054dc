#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "vwdsim/gilbert_elliott.hpp"
#include "vwdsim/optimizer.hpp"
#include "vwdsim/policies.hpp"
#include "vwdsim/rng.hpp"
#include "vwdsim/second_order.hpp"

namespace vwdsim {

inline uint64_t derive_run_seed(uint64_t master_seed, uint64_t run_index) {
  uint64_t st = master_seed ^ (0x9e3779b97f4a7c15ULL * (run_index + 1));
  return splitmix64_next(st);
}

enum class InitialStateMode { Stationary, ForceGood, ForceBad };

// Per-client runtime parameters with the streaming deadline resolved to slots.
struct SimClient {
  ClientKind kind = ClientKind::Sensing;
  GeChannelParams channel;
  double lambda = 1.0;
  double alpha = 1.0;
  int w = 1;
  double ell = 1.0;
  double beta = 1.0;
  double gamma = 0.0;
  int64_t deadline_slots = 0;
};

SimClient make_sim_client(const ClientSpec& spec, double resolved_ell);

struct SimConfig {
  std::vector<SimClient> clients;
  int64_t horizon = 0;
  InitialStateMode init = InitialStateMode::Stationary;
  int64_t trajectory_interval = 0;  // 0 disables delivery-count sampling
};

// Everything a policy needs at slot granularity, fixed for the experiment.
struct PolicyContext {
  Policy policy = Policy::Vwd;
  std::vector<double> mu;        // delivery targets (streaming: 1/w)
  std::vector<double> sigma_sq;  // variance targets
  std::vector<double> lambda;    // sensing rates (1.0 for streaming)
  std::vector<double> ell;       // deadlines in periods (1.0 for sensing)
  std::vector<GeChannelParams> channels;
  uint64_t sensing_mask = 0;
};

PolicyContext make_policy_context(const SimConfig& cfg, Policy policy,
                                  const DeliveryTargets& targets);

struct RunMetrics {
  int64_t horizon = 0;
  std::vector<int64_t> z_count;       // slots spent on the client (dummy incl.)
  std::vector<int64_t> timely_count;  // real packets delivered in time
  std::vector<int64_t> drop_count;
  std::vector<int64_t> gen_count;
  std::vector<double> aoi_sum;
  std::vector<int64_t> traj_t;
  std::vector<int64_t> traj_z;  // traj_z[k * n + i] = z_count of client i at traj_t[k]
};

struct StreamQueue {
  std::vector<int64_t> gen;  // ring buffer of generation slots
  size_t head = 0, count = 0;
};

struct WorldState {
  int64_t t = 0;
  std::vector<uint8_t> on;
  std::vector<double> aoi;
  std::vector<int64_t> last_gen;    // sensing: latest generation slot, -1 if none
  std::vector<int64_t> gen_before;  // latest generation strictly before this slot
  std::vector<StreamQueue> queues;
  DeficitState deficits;
  std::vector<double> deficit_scratch;
  RunMetrics metrics;
};

void init_world(WorldState& world, const SimConfig& cfg, Rng& rng);

// One slot in fixed order: channel transitions, sample/frame generation,
// deadline expiry, policy selection, delivery, age/deficit/metric updates.
void advance_slot(WorldState& world, const SimConfig& cfg,
                  const PolicyContext& pol, Rng& rng);

RunMetrics run_trace(const SimConfig& cfg, const PolicyContext& pol, uint64_t seed);

struct ExperimentAggregate {
  int runs = 0;
  int64_t horizon = 0;
  std::vector<double> aoi_mean;      // per client, averaged over runs
  std::vector<double> outage_rate;   // drops per slot
  std::vector<double> timely_rate;   // timely deliveries per slot
  std::vector<double> mu_hat;        // empirical delivery rate (dummy incl.)
  std::vector<double> sigma_sq_hat;  // cross-run variance of scaled counts
  std::vector<int64_t> series_t;
  std::vector<std::vector<double>> series_mean;  // [client][sample]
  std::vector<std::vector<double>> series_var;
  std::vector<std::vector<int64_t>> final_counts;  // [run][client]
};

// Parallel fan-out over runs; per-run seeds depend only on (master, index), so
// any thread count produces identical output. threads <= 0 picks the hardware
// default.
ExperimentAggregate run_experiment(const SimConfig& cfg, const PolicyContext& pol,
                                   int runs, uint64_t master_seed, int threads);
// Plain loop kept as the reference the parallel path is tested against.
ExperimentAggregate run_experiment_serial(const SimConfig& cfg,
                                          const PolicyContext& pol, int runs,
                                          uint64_t master_seed);

// Cross-run second-order estimate: mean of counts/T and sample variance of
// (count - T*mu)/sqrt(T). Needs at least 2 runs.
std::vector<SecondOrderModel> empirical_second_order(
    const std::vector<std::vector<int64_t>>& counts, int64_t horizon,
    std::span<const double> mu);

struct SubsetMcResult {
  double mean_hat = 0.0;
  double var_hat = 0.0;
  double se_mean = 0.0;
  double se_var = 0.0;
};

// Monte Carlo estimate of the any-ON mean and temporal variance of a channel
// subset; the kernel the closed forms are validated against.
SubsetMcResult channel_subset_mc(std::span<const GeChannelParams> channels, int runs,
                                 int64_t horizon, uint64_t master_seed, int threads);
SubsetMcResult channel_subset_mc_serial(std::span<const GeChannelParams> channels,
                                        int runs, int64_t horizon,
                                        uint64_t master_seed);

}  // namespace vwdsim
