#include "vwdsim/second_order.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "vwdsim/detail/subset_search.hpp"

namespace vwdsim {

ChannelModelTable::ChannelModelTable(std::vector<double> off_probs,
                                     SecondOrderModel full)
    : off_probs_(std::move(off_probs)), full_(full) {
  if (off_probs_.empty())
    throw std::invalid_argument("channel table needs at least one client");
  for (double o : off_probs_)
    if (!(o >= 0.0) || !(o <= 1.0))
      throw std::invalid_argument("OFF probability out of [0, 1]");
}

double ChannelModelTable::subset_mean(uint64_t mask) const {
  double prod = 1.0;
  while (mask) {
    const int i = std::countr_zero(mask);
    if (i >= num_clients()) throw std::invalid_argument("subset mask names a missing client");
    prod *= off_probs_[i];
    mask &= mask - 1;
  }
  return 1.0 - prod;
}

HittingMoments first_hitting_moments(const SecondOrderModel& model) {
  if (!(model.mean > 0.0)) throw std::invalid_argument("hitting moments need mean > 0");
  if (!(model.variance >= 0.0)) throw std::invalid_argument("hitting moments need variance >= 0");
  const double m = 1.0 / model.mean;
  return HittingMoments{m, model.variance / (model.mean * model.mean * model.mean) + m * m};
}

double aoi_approx(const SecondOrderModel& model, double lambda) {
  if (!(lambda > 0.0) || !(lambda <= 1.0))
    throw std::invalid_argument("sampling rate lambda must be in (0, 1]");
  const auto h = first_hitting_moments(model);
  return 0.5 * h.second_moment / h.mean + 1.0 / lambda - 0.5;
}

double outage_approx(const SecondOrderModel& model, double ell) {
  if (!(ell > 0.0)) throw std::invalid_argument("deadline ell must be positive");
  if (!(model.variance >= 0.0)) throw std::invalid_argument("outage needs variance >= 0");
  return model.variance / (2.0 * ell);
}

double timely_throughput(int w, double outage) {
  if (w < 1) throw std::invalid_argument("frame period w must be >= 1");
  const double tp = 1.0 / static_cast<double>(w) - outage;
  return tp > 0.0 ? tp : 0.0;
}

std::string describe_constraint(const ConstraintSlack& c) {
  switch (c.kind) {
    case ConstraintKind::SubsetMean: {
      std::string s = "subset{";
      uint64_t m = c.subset_mask;
      bool first = true;
      while (m) {
        const int i = std::countr_zero(m);
        if (!first) s += ',';
        s += std::to_string(i);
        first = false;
        m &= m - 1;
      }
      return s + "}";
    }
    case ConstraintKind::TotalMean:
      return "total_mean";
    case ConstraintKind::VarianceBudget:
      return "variance_budget";
    case ConstraintKind::NonNegativeMean:
      return "mean_nonnegative[" + std::to_string(c.subset_mask) + "]";
    case ConstraintKind::PositiveVariance:
      return "variance_positive[" + std::to_string(c.subset_mask) + "]";
  }
  return "unknown";
}

namespace {

FeasibilityReport check_bound(const DeliveryTargets& targets,
                              const ChannelModelTable& table, double subset_margin,
                              bool strict_subsets, bool require_positive_variance,
                              double equality_tol) {
  const int n = table.num_clients();
  if (static_cast<int>(targets.clients.size()) != n)
    throw std::invalid_argument("target count does not match channel table");
  FeasibilityReport rep;
  rep.feasible = true;
  rep.min_subset_slack = std::numeric_limits<double>::infinity();
  rep.min_mean = std::numeric_limits<double>::infinity();
  rep.min_variance = std::numeric_limits<double>::infinity();

  double sum_mu = 0.0, sum_sigma = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto& t = targets.clients[i];
    sum_mu += t.mean;
    rep.min_mean = std::min(rep.min_mean, t.mean);
    rep.min_variance = std::min(rep.min_variance, t.variance);
    if (t.mean < 0.0) {
      rep.feasible = false;
      rep.violations.push_back({ConstraintKind::NonNegativeMean,
                                static_cast<uint64_t>(i), t.mean, 0.0, t.mean});
    }
    if (t.variance < 0.0 || (require_positive_variance && !(t.variance > 0.0))) {
      rep.feasible = false;
      rep.violations.push_back({ConstraintKind::PositiveVariance,
                                static_cast<uint64_t>(i), t.variance, 0.0, t.variance});
    }
    sum_sigma += std::sqrt(std::max(t.variance, 0.0));
  }

  std::vector<double> mu(n);
  for (int i = 0; i < n; ++i) mu[i] = targets.clients[i].mean;
  auto [slack, mask] =
      detail::min_proper_subset_slack(table.off_probs(), mu);
  rep.min_subset_slack = slack - subset_margin;
  rep.min_subset_mask = mask;
  if (n > 1) {
    const bool ok = strict_subsets ? rep.min_subset_slack > 0.0 : rep.min_subset_slack >= 0.0;
    if (!ok) {
      rep.feasible = false;
      const double lhs = table.subset_mean(mask) - slack;  // = sum of mu over S
      rep.violations.push_back({ConstraintKind::SubsetMean, mask, lhs,
                                table.subset_mean(mask) - subset_margin,
                                rep.min_subset_slack});
    }
  }

  rep.total_mean_gap = sum_mu - table.full().mean;
  if (std::fabs(rep.total_mean_gap) > equality_tol) {
    rep.feasible = false;
    rep.violations.push_back({ConstraintKind::TotalMean, 0, sum_mu,
                              table.full().mean, -std::fabs(rep.total_mean_gap)});
  }

  rep.variance_slack = sum_sigma - std::sqrt(std::max(table.full().variance, 0.0));
  if (rep.variance_slack < 0.0) {
    rep.feasible = false;
    rep.violations.push_back({ConstraintKind::VarianceBudget, 0, sum_sigma,
                              std::sqrt(std::max(table.full().variance, 0.0)),
                              rep.variance_slack});
  }
  return rep;
}

}  // namespace

FeasibilityReport check_outer_bound(const DeliveryTargets& targets,
                                    const ChannelModelTable& table,
                                    double equality_tol) {
  return check_bound(targets, table, 0.0, false, false, equality_tol);
}

FeasibilityReport check_inner_bound(const DeliveryTargets& targets,
                                    const ChannelModelTable& table, double delta,
                                    double equality_tol) {
  if (!(delta >= 0.0)) throw std::invalid_argument("delta must be >= 0");
  return check_bound(targets, table, delta, true, true, equality_tol);
}

std::vector<uint8_t> reference_delivery_sample(const SecondOrderModel& model,
                                               int64_t horizon, Rng& rng) {
  if (!(model.mean > 0.0) || !(model.mean < 1.0 + 1e-12))
    throw std::invalid_argument("reference delivery needs mean in (0, 1]");
  if (!(model.variance >= 0.0))
    throw std::invalid_argument("reference delivery needs variance >= 0");
  if (horizon < 0) throw std::invalid_argument("horizon must be >= 0");
  const double sd = std::sqrt(model.variance);
  std::vector<uint8_t> z(static_cast<size_t>(horizon), 0);
  double level = 0.0;
  double threshold = 1.0;  // ratchets by 1 per delivery; overshoot carries over
  for (int64_t t = 0; t < horizon; ++t) {
    level += rng.next_normal(model.mean, sd);
    if (level >= threshold) {
      z[static_cast<size_t>(t)] = 1;
      threshold += 1.0;
    }
  }
  return z;
}

}  // namespace vwdsim
