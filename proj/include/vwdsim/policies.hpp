#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vwdsim/gilbert_elliott.hpp"
#include "vwdsim/rng.hpp"
#include "vwdsim/second_order.hpp"

namespace vwdsim {

enum class Policy {
  Vwd,             // variance-weighted deficit
  Whittle,
  Stationary,      // stationary randomized
  MaxWeight,
  Wld,             // weighted-largest-deficit-first
  Dbldf,           // deficit-based largest-deficit-first
  StationaryDbldf, // alternates stationary (odd slots) and DBLDF (even slots)
};

std::optional<Policy> parse_policy(const std::string& id);
std::string policy_name(Policy p);
std::vector<Policy> all_policies();

// Deficits are kept as integer delivery counts against the slot counter so
// that d_n(t) = t * mu_n - delivered_n holds exactly, with a single rounding
// when the value is read.
struct DeficitState {
  int64_t t = 0;
  std::vector<int64_t> delivered;

  explicit DeficitState(int n = 0) : delivered(static_cast<size_t>(n), 0) {}
  double value(int n, double mu_n) const {
    return static_cast<double>(t) * mu_n - static_cast<double>(delivered[static_cast<size_t>(n)]);
  }
  void values(std::span<const double> mu, std::span<double> out) const;
};

// Advances one slot: every deficit gains mu_n; a delivered client pays 1.
// Dummy deliveries count (the slot was spent on that client either way).
void update_deficits(DeficitState& state, std::optional<int> scheduled, bool delivered);

// What a policy is allowed to look at when picking a client for this slot.
// aoi and deficits are the values after slot t-1; slot is the current slot t.
struct SchedulerObservation {
  uint64_t on_mask = 0;
  uint64_t has_packet_mask = 0;
  int64_t slot = 0;
  std::span<const double> aoi;
  std::span<const double> deficits;
};

// All selectors return a client index from on_mask, or nullopt when no
// channel is ON. Ties break toward the lowest index.
std::optional<int> vwd_select(const SchedulerObservation& obs,
                              std::span<const double> sigma_sq);
std::optional<int> whittle_select(const SchedulerObservation& obs,
                                  std::span<const GeChannelParams> channels);
std::optional<int> stationary_randomized_select(const SchedulerObservation& obs,
                                                std::span<const double> mu, Rng& rng);
std::optional<int> max_weight_select(const SchedulerObservation& obs,
                                     std::span<const double> lambda,
                                     std::span<const double> mu);
std::optional<int> wld_select(const SchedulerObservation& obs,
                              std::span<const double> ell);
std::optional<int> dbldf_select(const SchedulerObservation& obs);
std::optional<int> stationary_dbldf_select(const SchedulerObservation& obs,
                                           std::span<const double> mu,
                                           uint64_t sensing_mask, Rng& rng);

double whittle_index(double aoi, double stationary_on);

}  // namespace vwdsim
