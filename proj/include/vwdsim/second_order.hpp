#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vwdsim/rng.hpp"

namespace vwdsim {

// A delivery (or channel) process summarized by its long-run mean rate and
// temporal variance, i.e. the variance of (deliveries in [0,T] - mean*T)/sqrt(T)
// as T grows.
struct SecondOrderModel {
  double mean = 0.0;
  double variance = 0.0;
};

// Per-client second-order delivery targets handed to the scheduler.
struct DeliveryTargets {
  std::vector<SecondOrderModel> clients;
};

// Capacity description of a shared channel: the mean ON fraction of every
// client subset plus the full-set second-order model. Subset means are
// evaluated on demand from per-client OFF probabilities (2^N entries are never
// materialized).
class ChannelModelTable {
 public:
  ChannelModelTable(std::vector<double> off_probs, SecondOrderModel full);

  int num_clients() const { return static_cast<int>(off_probs_.size()); }
  // mask bit n set <=> client n is in the subset; mask 0 yields mean 0
  double subset_mean(uint64_t mask) const;
  const SecondOrderModel& full() const { return full_; }
  std::span<const double> off_probs() const { return off_probs_; }

 private:
  std::vector<double> off_probs_;
  SecondOrderModel full_;
};

struct HittingMoments {
  double mean = 0.0;
  double second_moment = 0.0;
};

// First two moments of the time for a Brownian motion with drift `mean` and
// variance `variance` to gain one unit.
HittingMoments first_hitting_moments(const SecondOrderModel& model);

// Long-run average Age of Information of a sensing client whose delivery
// process follows `model` and whose sensor samples with probability lambda
// per slot.
double aoi_approx(const SecondOrderModel& model, double lambda);

// Expected packet drops per slot for a streaming client with delivery process
// `model` and a deadline of ell periods. Accurate when model.mean matches the
// frame rate 1/w.
double outage_approx(const SecondOrderModel& model, double ell);

double timely_throughput(int w, double outage);

enum class ConstraintKind {
  SubsetMean,      // sum of subset means vs. subset capacity
  TotalMean,       // equality with the full-set mean
  VarianceBudget,  // sum of sqrt variances vs. sqrt full variance
  NonNegativeMean,
  PositiveVariance,
};

struct ConstraintSlack {
  ConstraintKind kind;
  uint64_t subset_mask = 0;  // meaningful for SubsetMean; client index for per-client kinds
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;  // >= 0 means satisfied
};

std::string describe_constraint(const ConstraintSlack& c);

struct FeasibilityReport {
  bool feasible = false;
  std::vector<ConstraintSlack> violations;
  // summary slacks, present regardless of feasibility
  double min_subset_slack = 0.0;  // over nonempty proper subsets; +inf if none exist
  uint64_t min_subset_mask = 0;
  double total_mean_gap = 0.0;   // sum(mu) - m_full
  double variance_slack = 0.0;   // sum(sqrt(var)) - sqrt(v2_full)
  double min_mean = 0.0;
  double min_variance = 0.0;
};

// Necessary conditions for any scheduling policy: subset means within
// capacity, total mean equal to the full-set mean (within equality_tol), and
// the variance budget respected.
FeasibilityReport check_outer_bound(const DeliveryTargets& targets,
                                    const ChannelModelTable& table,
                                    double equality_tol = 1e-9);

// Sufficient conditions for achievability: proper-subset means strictly below
// capacity with margin delta, positive variances, equality on the total mean.
FeasibilityReport check_inner_bound(const DeliveryTargets& targets,
                                    const ChannelModelTable& table, double delta,
                                    double equality_tol = 1e-9);

// Slot-sampled Brownian reference delivery process: one delivery each time the
// motion reaches the next integer level (threshold ratchets by exactly 1 per
// delivery, so the long-run rate is model.mean). Returns Z'(1..horizon).
std::vector<uint8_t> reference_delivery_sample(const SecondOrderModel& model,
                                               int64_t horizon, Rng& rng);

}  // namespace vwdsim
