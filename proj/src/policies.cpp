#include "vwdsim/policies.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace vwdsim {

std::optional<Policy> parse_policy(const std::string& id) {
  if (id == "vwd") return Policy::Vwd;
  if (id == "whittle") return Policy::Whittle;
  if (id == "stationary") return Policy::Stationary;
  if (id == "maxweight") return Policy::MaxWeight;
  if (id == "wld") return Policy::Wld;
  if (id == "dbldf") return Policy::Dbldf;
  if (id == "stationary-dbldf") return Policy::StationaryDbldf;
  return std::nullopt;
}

std::string policy_name(Policy p) {
  switch (p) {
    case Policy::Vwd: return "vwd";
    case Policy::Whittle: return "whittle";
    case Policy::Stationary: return "stationary";
    case Policy::MaxWeight: return "maxweight";
    case Policy::Wld: return "wld";
    case Policy::Dbldf: return "dbldf";
    case Policy::StationaryDbldf: return "stationary-dbldf";
  }
  return "?";
}

std::vector<Policy> all_policies() {
  return {Policy::Vwd, Policy::Whittle, Policy::Stationary, Policy::MaxWeight,
          Policy::Wld, Policy::Dbldf, Policy::StationaryDbldf};
}

void DeficitState::values(std::span<const double> mu, std::span<double> out) const {
  for (size_t n = 0; n < delivered.size(); ++n)
    out[n] = static_cast<double>(t) * mu[n] - static_cast<double>(delivered[n]);
}

void update_deficits(DeficitState& state, std::optional<int> scheduled, bool delivered) {
  ++state.t;
  if (scheduled && delivered) ++state.delivered[static_cast<size_t>(*scheduled)];
}

namespace {

// argmax over ON clients; first (lowest-index) winner kept on ties
template <typename WeightFn>
std::optional<int> pick_max(uint64_t mask, int n, WeightFn&& weight) {
  int best = -1;
  double best_w = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    if (!(mask >> i & 1)) continue;
    const double w = weight(i);
    if (best < 0 || w > best_w) {
      best = i;
      best_w = w;
    }
  }
  if (best < 0) return std::nullopt;
  return best;
}

std::optional<int> weighted_draw(uint64_t mask, std::span<const double> mu, Rng& rng) {
  int n = static_cast<int>(mu.size());
  double total = 0.0;
  for (int i = 0; i < n; ++i)
    if (mask >> i & 1) total += std::max(mu[i], 0.0);
  if (!(total > 0.0)) {
    // all weights vanish: uniform over the mask
    int count = 0;
    for (int i = 0; i < n; ++i) count += static_cast<int>(mask >> i & 1);
    if (count == 0) return std::nullopt;
    int pick = static_cast<int>(rng.next_double() * count);
    if (pick >= count) pick = count - 1;
    for (int i = 0; i < n; ++i) {
      if (!(mask >> i & 1)) continue;
      if (pick-- == 0) return i;
    }
    return std::nullopt;
  }
  const double u = rng.next_double() * total;
  double acc = 0.0;
  int last = -1;
  for (int i = 0; i < n; ++i) {
    if (!(mask >> i & 1)) continue;
    acc += std::max(mu[i], 0.0);
    last = i;
    if (u < acc) return i;
  }
  return last < 0 ? std::nullopt : std::optional<int>(last);
}

}  // namespace

std::optional<int> vwd_select(const SchedulerObservation& obs,
                              std::span<const double> sigma_sq) {
  return pick_max(obs.on_mask, static_cast<int>(sigma_sq.size()), [&](int i) {
    return obs.deficits[static_cast<size_t>(i)] / std::sqrt(sigma_sq[static_cast<size_t>(i)]);
  });
}

double whittle_index(double aoi, double stationary_on) {
  return 0.5 * aoi * aoi - 0.5 * aoi + aoi / stationary_on;
}

std::optional<int> whittle_select(const SchedulerObservation& obs,
                                  std::span<const GeChannelParams> channels) {
  return pick_max(obs.on_mask, static_cast<int>(channels.size()), [&](int i) {
    return whittle_index(obs.aoi[static_cast<size_t>(i)],
                         stationary_on_prob(channels[static_cast<size_t>(i)]));
  });
}

std::optional<int> stationary_randomized_select(const SchedulerObservation& obs,
                                                std::span<const double> mu, Rng& rng) {
  return weighted_draw(obs.on_mask, mu, rng);
}

std::optional<int> max_weight_select(const SchedulerObservation& obs,
                                     std::span<const double> lambda,
                                     std::span<const double> mu) {
  return pick_max(obs.on_mask, static_cast<int>(mu.size()), [&](int i) {
    const double m = std::max(mu[static_cast<size_t>(i)], 1e-300);
    return (obs.aoi[static_cast<size_t>(i)] - 1.0 / lambda[static_cast<size_t>(i)]) / m;
  });
}

std::optional<int> wld_select(const SchedulerObservation& obs,
                              std::span<const double> ell) {
  return pick_max(obs.on_mask, static_cast<int>(ell.size()), [&](int i) {
    return obs.deficits[static_cast<size_t>(i)] / ell[static_cast<size_t>(i)];
  });
}

std::optional<int> dbldf_select(const SchedulerObservation& obs) {
  return pick_max(obs.on_mask, static_cast<int>(obs.deficits.size()),
                  [&](int i) { return obs.deficits[static_cast<size_t>(i)]; });
}

std::optional<int> stationary_dbldf_select(const SchedulerObservation& obs,
                                           std::span<const double> mu,
                                           uint64_t sensing_mask, Rng& rng) {
  const bool odd = (obs.slot % 2) != 0;
  if (odd) {
    uint64_t pool = obs.on_mask & sensing_mask;
    if (pool == 0) pool = obs.on_mask;
    return weighted_draw(pool, mu, rng);
  }
  uint64_t pool = obs.on_mask & ~sensing_mask;
  if (pool == 0) pool = obs.on_mask;
  return pick_max(pool, static_cast<int>(mu.size()),
                  [&](int i) { return obs.deficits[static_cast<size_t>(i)]; });
}

}  // namespace vwdsim
