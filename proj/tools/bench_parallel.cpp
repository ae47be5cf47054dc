// Times the OpenMP run fan-out against the serial reference on the two hot
// kernels: raw channel-subset Monte Carlo and full scheduler runs.

#include <chrono>
#include <cstdio>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "vwdsim/simulator.hpp"

using namespace vwdsim;

namespace {

double now_s() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

SimConfig make_sched_config(int64_t horizon) {
  SimConfig sim;
  sim.horizon = horizon;
  const double ps[] = {0.3, 0.5, 0.2, 0.6, 0.4};
  const double qs[] = {0.4, 0.3, 0.5, 0.2, 0.6};
  for (int i = 0; i < 5; ++i) {
    ClientSpec spec;
    spec.kind = ClientKind::Sensing;
    spec.channel = {ps[i], qs[i]};
    spec.sensing = {1.0, 1.0};
    sim.clients.push_back(make_sim_client(spec, 0.0));
  }
  return sim;
}

}  // namespace

int main() {
  const std::vector<GeChannelParams> chans = {{0.1, 0.2}, {0.3, 0.4}, {0.2, 0.7}};
  const int runs = 256;
  const int64_t horizon = 20000;

#ifdef _OPENMP
  const int max_threads = omp_get_max_threads();
#else
  const int max_threads = 1;
#endif
  std::printf("hardware threads: %d\n\n", max_threads);

  std::printf("channel subset Monte Carlo (%d runs x %lld slots x %zu channels)\n",
              runs, static_cast<long long>(horizon), chans.size());
  double t0 = now_s();
  const auto ref = channel_subset_mc_serial(chans, runs, horizon, 7);
  const double serial_s = now_s() - t0;
  std::printf("  serial           %8.3f s   mean=%.6f var=%.6f\n", serial_s,
              ref.mean_hat, ref.var_hat);
  for (int threads = 2; threads <= max_threads; threads *= 2) {
    t0 = now_s();
    const auto par = channel_subset_mc(chans, runs, horizon, 7, threads);
    const double par_s = now_s() - t0;
    const bool same = par.mean_hat == ref.mean_hat && par.var_hat == ref.var_hat;
    std::printf("  %2d threads       %8.3f s   speedup %.2fx   identical: %s\n",
                threads, par_s, serial_s / par_s, same ? "yes" : "NO");
  }

  std::printf("\nscheduler runs (5 sensing clients, %d runs x %lld slots)\n", runs,
              static_cast<long long>(horizon));
  const auto sim = make_sched_config(horizon);
  DeliveryTargets targets;
  for (int i = 0; i < 5; ++i) targets.clients.push_back({0.19, 0.01});
  const auto pol = make_policy_context(sim, Policy::Vwd, targets);
  t0 = now_s();
  const auto sref = run_experiment_serial(sim, pol, runs, 7);
  const double sched_serial_s = now_s() - t0;
  std::printf("  serial           %8.3f s\n", sched_serial_s);
  for (int threads = 2; threads <= max_threads; threads *= 2) {
    t0 = now_s();
    const auto spar = run_experiment(sim, pol, runs, 7, threads);
    const double par_s = now_s() - t0;
    bool same = true;
    for (int i = 0; i < 5; ++i)
      same = same && spar.mu_hat[i] == sref.mu_hat[i] &&
             spar.aoi_mean[i] == sref.aoi_mean[i];
    std::printf("  %2d threads       %8.3f s   speedup %.2fx   identical: %s\n",
                threads, par_s, sched_serial_s / par_s, same ? "yes" : "NO");
  }
  return 0;
}
