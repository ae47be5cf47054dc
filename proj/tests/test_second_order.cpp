#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "vwdsim/gilbert_elliott.hpp"
#include "vwdsim/second_order.hpp"

using namespace vwdsim;
using testutil::near;

namespace {

// Michael-Schucany-Haas sampler for the level-1 hitting time of a drift-mu,
// variance-var Brownian motion (inverse Gaussian with mean 1/mu, shape 1/var).
double sample_hitting_time(double mu, double var, Rng& rng) {
  const double nu = 1.0 / mu, lambda = 1.0 / var;
  const double z = rng.next_normal(0.0, 1.0);
  const double y = z * z;
  const double x =
      nu + nu * nu * y / (2.0 * lambda) -
      nu / (2.0 * lambda) * std::sqrt(4.0 * nu * lambda * y + nu * nu * y * y);
  return rng.next_double() < nu / (nu + x) ? x : nu * nu / x;
}

DeliveryTargets targets2(double m0, double v0, double m1, double v1) {
  return DeliveryTargets{{{m0, v0}, {m1, v1}}};
}

}  // namespace

TEST_CASE("first hitting moments") {
  const HittingMoments h = first_hitting_moments({0.5, 0.25});
  CHECK(h.mean == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(h.second_moment == doctest::Approx(6.0).epsilon(1e-12));
  const HittingMoments d = first_hitting_moments({1.0, 0.0});
  CHECK(d.mean == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(d.second_moment == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(first_hitting_moments({0.0, 0.25}), std::invalid_argument);
  CHECK_THROWS_AS(first_hitting_moments({-0.5, 0.25}), std::invalid_argument);
  CHECK_THROWS_AS(first_hitting_moments({0.5, -0.1}), std::invalid_argument);
}

TEST_CASE("hitting moments match an inverse-Gaussian sampler") {
  Rng rng(9001);
  for (auto [mu, var] : {std::pair{0.5, 0.25}, std::pair{0.3, 0.1}}) {
    double s1 = 0.0, s2 = 0.0;
    const int64_t n = 2000000;
    for (int64_t i = 0; i < n; ++i) {
      const double t = sample_hitting_time(mu, var, rng);
      s1 += t;
      s2 += t * t;
    }
    const HittingMoments h = first_hitting_moments({mu, var});
    CHECK(testutil::rel_near(s1 / n, h.mean, 0.01));
    CHECK(testutil::rel_near(s2 / n, h.second_moment, 0.02));
  }
}

TEST_CASE("age-of-information approximation") {
  CHECK(aoi_approx({0.5, 0.25}, 1.0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(aoi_approx({0.5, 0.25}, 0.1) == doctest::Approx(11.0).epsilon(1e-12));
  CHECK_THROWS_AS(aoi_approx({0.5, 0.25}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(aoi_approx({0.5, 0.25}, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(aoi_approx({0.5, 0.25}, -0.2), std::invalid_argument);

  Rng rng(31);
  for (int rep = 0; rep < 100; ++rep) {
    const double mu = 0.05 + 0.9 * rng.next_double();
    const double var = 0.01 + rng.next_double();
    const double lambda = 0.05 + 0.95 * rng.next_double();
    const HittingMoments h = first_hitting_moments({mu, var});
    const double want = 0.5 * h.second_moment / h.mean + 1.0 / lambda - 0.5;
    CHECK(aoi_approx({mu, var}, lambda) == doctest::Approx(want).epsilon(1e-12));
    // staler samples and burstier delivery can only hurt
    CHECK(aoi_approx({mu, var}, lambda * 0.5) > aoi_approx({mu, var}, lambda));
    CHECK(aoi_approx({mu, var + 0.1}, lambda) > aoi_approx({mu, var}, lambda));
  }
}

TEST_CASE("age matches a simulated sampler fed by the reference process") {
  // lambda = 1: every delivery carries a fresh sample, so the long-run age
  // should approach the two-parameter approximation.
  Rng rng(55);
  const SecondOrderModel model{0.5, 0.25};
  const int64_t T = 2000000;
  const auto z = reference_delivery_sample(model, T, rng);
  double age = 1.0, acc = 0.0;
  for (int64_t t = 0; t < T; ++t) {
    age = z[t] ? 1.0 : age + 1.0;
    acc += age;
  }
  CHECK(testutil::rel_near(acc / double(T), aoi_approx(model, 1.0), 0.02));
}

TEST_CASE("outage approximation and timely throughput") {
  CHECK(outage_approx({0.5, 0.2}, 10.0) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(outage_approx({0.5, 0.25}, 25.0) == doctest::Approx(0.005).epsilon(1e-12));
  CHECK(outage_approx({0.5, 0.0}, 5.0) == 0.0);
  CHECK_THROWS_AS(outage_approx({0.5, 0.25}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(outage_approx({0.5, 0.25}, -1.0), std::invalid_argument);

  CHECK(timely_throughput(5, 0.01) == doctest::Approx(0.19).epsilon(1e-12));
  CHECK(timely_throughput(4, 0.25) == 0.0);  // floored at zero
  CHECK(timely_throughput(4, 0.3) == 0.0);
  CHECK(timely_throughput(1, 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(timely_throughput(0, 0.01), std::invalid_argument);
}

TEST_CASE("channel model table") {
  const ChannelModelTable table({0.5, 0.2}, {0.9, 0.3});
  CHECK(table.num_clients() == 2);
  CHECK(table.subset_mean(0) == 0.0);
  CHECK(table.subset_mean(0b01) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(table.subset_mean(0b10) == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(table.subset_mean(0b11) == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(table.full().mean == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(table.full().variance == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("outer bound accepts the boundary") {
  const ChannelModelTable one({0.5}, {0.5, 0.25});
  const FeasibilityReport ok =
      check_outer_bound(DeliveryTargets{{{0.5, 0.25}}}, one);
  CHECK(ok.feasible);
  CHECK(ok.violations.empty());
  CHECK(near(ok.total_mean_gap, 0.0, 1e-12));
  CHECK(near(ok.variance_slack, 0.0, 1e-12));
}

TEST_CASE("outer bound flags each constraint family") {
  const ChannelModelTable one({0.5}, {0.5, 0.25});
  SUBCASE("variance budget") {
    const FeasibilityReport r =
        check_outer_bound(DeliveryTargets{{{0.5, 0.1}}}, one);
    CHECK_FALSE(r.feasible);
    REQUIRE(r.violations.size() == 1);
    CHECK(r.violations[0].kind == ConstraintKind::VarianceBudget);
    CHECK(near(r.variance_slack, std::sqrt(0.1) - 0.5, 1e-12));
  }
  SUBCASE("total mean is an equality") {
    const FeasibilityReport r =
        check_outer_bound(DeliveryTargets{{{0.45, 0.3}}}, one);
    CHECK_FALSE(r.feasible);
    REQUIRE_FALSE(r.violations.empty());
    CHECK(r.violations[0].kind == ConstraintKind::TotalMean);
    CHECK(near(r.total_mean_gap, -0.05, 1e-12));
  }
  SUBCASE("negative mean") {
    const ChannelModelTable two({0.5, 0.5}, {0.75, 0.1875});
    const FeasibilityReport r =
        check_outer_bound(targets2(-0.1, 0.2, 0.85, 0.2), two);
    CHECK_FALSE(r.feasible);
    const bool has_neg =
        std::any_of(r.violations.begin(), r.violations.end(), [](const auto& v) {
          return v.kind == ConstraintKind::NonNegativeMean;
        });
    CHECK(has_neg);
  }
  SUBCASE("subset capacity") {
    const ChannelModelTable two({0.5, 0.5}, {0.75, 0.1875});
    const FeasibilityReport r =
        check_outer_bound(targets2(0.55, 0.2, 0.2, 0.2), two);
    CHECK_FALSE(r.feasible);
    REQUIRE_FALSE(r.violations.empty());
    CHECK(r.violations[0].kind == ConstraintKind::SubsetMean);
    CHECK(r.violations[0].subset_mask == 0b01);
    CHECK(near(r.min_subset_slack, -0.05, 1e-12));
    CHECK(r.min_subset_mask == 0b01);
  }
  SUBCASE("size mismatch") {
    CHECK_THROWS_AS(check_outer_bound(DeliveryTargets{{{0.5, 0.25}}},
                                      ChannelModelTable({0.5, 0.5}, {0.75, 0.1875})),
                    std::invalid_argument);
  }
}

TEST_CASE("outer bound accepts the symmetric iid split") {
  const ChannelModelTable two({0.5, 0.5}, {0.75, 0.1875});
  const double v = 0.1875 / 4.0;  // sqrt shares sum exactly to sqrt(v2_full)
  CHECK(check_outer_bound(targets2(0.375, v, 0.375, v), two).feasible);
}

TEST_CASE("inner bound demands strict margins") {
  const ChannelModelTable two({0.5, 0.5}, {0.75, 0.1875});
  CHECK(check_inner_bound(targets2(0.375, 0.1, 0.375, 0.1), two, 0.05).feasible);
  SUBCASE("margin wipes out the singleton slack") {
    const FeasibilityReport r =
        check_inner_bound(targets2(0.375, 0.1, 0.375, 0.1), two, 0.2);
    CHECK_FALSE(r.feasible);
    CHECK(r.violations[0].kind == ConstraintKind::SubsetMean);
  }
  SUBCASE("zero variance is not achievable") {
    const FeasibilityReport r =
        check_inner_bound(targets2(0.375, 0.0, 0.375, 0.1), two, 0.05);
    CHECK_FALSE(r.feasible);
    const bool has_pv =
        std::any_of(r.violations.begin(), r.violations.end(), [](const auto& v) {
          return v.kind == ConstraintKind::PositiveVariance;
        });
    CHECK(has_pv);
  }
  SUBCASE("subset inequality is strict") {
    // mu_0 sits exactly at capacity minus delta: strictness rejects it
    const FeasibilityReport r =
        check_inner_bound(targets2(0.45, 0.05, 0.3, 0.05), two, 0.05);
    CHECK_FALSE(r.feasible);
    CHECK(r.violations[0].kind == ConstraintKind::SubsetMean);
    CHECK(r.violations[0].subset_mask == 0b01);
  }
  SUBCASE("single client has no proper subsets to cut") {
    const ChannelModelTable one({0.5}, {0.5, 0.25});
    CHECK(check_inner_bound(DeliveryTargets{{{0.5, 0.25}}}, one, 0.1).feasible);
  }
}

TEST_CASE("inner-bound points always satisfy the outer bound") {
  Rng rng(1234);
  int accepted = 0;
  while (accepted < 50) {
    const int n = 1 + int(rng.next_u64() % 4);
    const auto chans = testutil::random_channels(rng, n, 0.2, 0.95);
    const int64_t k = truncation_depth(chans, 1e-6);
    const ChannelModelTable table = build_channel_table(chans, k);
    const double delta = 1e-3 * table.full().mean;

    // random split of the full-set mean and of the sqrt-variance budget
    std::vector<double> w(n);
    double tot = 0.0;
    for (double& x : w) tot += x = 0.05 + rng.next_double();
    DeliveryTargets t;
    for (int i = 0; i < n; ++i) {
      const double s = w[i] / tot * std::sqrt(table.full().variance);
      t.clients.push_back({w[i] / tot * table.full().mean, s * s});
    }
    if (!check_inner_bound(t, table, delta).feasible) continue;
    ++accepted;
    CHECK(check_outer_bound(t, table).feasible);
  }
}

TEST_CASE("constraint descriptions are distinct and informative") {
  const ConstraintSlack subset{ConstraintKind::SubsetMean, 0b101, 0.9, 0.8, -0.1};
  const ConstraintSlack total{ConstraintKind::TotalMean, 0, 0.7, 0.75, -0.05};
  const ConstraintSlack var{ConstraintKind::VarianceBudget, 0, 0.3, 0.4, -0.1};
  const ConstraintSlack neg{ConstraintKind::NonNegativeMean, 2, -0.1, 0.0, -0.1};
  const ConstraintSlack pv{ConstraintKind::PositiveVariance, 1, 0.0, 0.0, 0.0};
  std::vector<std::string> all = {describe_constraint(subset), describe_constraint(total),
                                  describe_constraint(var), describe_constraint(neg),
                                  describe_constraint(pv)};
  for (const auto& s : all) CHECK_FALSE(s.empty());
  std::sort(all.begin(), all.end());
  CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());
  CHECK(describe_constraint(subset).find("0") != std::string::npos);
  CHECK(describe_constraint(subset).find("2") != std::string::npos);
}

TEST_CASE("reference delivery process hits its target rate") {
  Rng rng(42);
  const int64_t T = 1000000;
  const auto z = reference_delivery_sample({0.5, 0.25}, T, rng);
  CHECK(z.size() == size_t(T));
  int64_t count = 0;
  for (uint8_t b : z) {
    CHECK(b <= 1);
    count += b;
  }
  CHECK(near(double(count) / double(T), 0.5, 0.01));

  for (double mu : {0.2, 0.7}) {
    Rng r2(43);
    const auto zz = reference_delivery_sample({mu, 0.15}, T, r2);
    int64_t c = 0;
    for (uint8_t b : zz) c += b;
    CHECK(near(double(c) / double(T), mu, 0.01));
  }
}

TEST_CASE("reference delivery gaps carry the hitting-time moments") {
  Rng rng(42);
  const int64_t T = 2000000;
  const SecondOrderModel model{0.5, 0.25};
  const auto z = reference_delivery_sample(model, T, rng);
  int64_t last = -1, gaps = 0;
  double s1 = 0.0, s2 = 0.0;
  for (int64_t t = 0; t < T; ++t) {
    if (!z[t]) continue;
    if (last >= 0) {
      const double b = double(t - last);
      s1 += b;
      s2 += b * b;
      ++gaps;
    }
    last = t;
  }
  const HittingMoments h = first_hitting_moments(model);
  CHECK(testutil::rel_near((s2 / double(gaps)) / (2.0 * s1 / double(gaps)),
                           h.second_moment / (2.0 * h.mean), 0.05));
}

TEST_CASE("reference delivery degenerates to every slot at mean 1") {
  Rng rng(7);
  const auto z = reference_delivery_sample({1.0, 0.0}, 64, rng);
  for (uint8_t b : z) CHECK(b == 1);
}

TEST_CASE("reference delivery is deterministic in the seed") {
  Rng a(99), b(99), c(100);
  const auto za = reference_delivery_sample({0.4, 0.3}, 5000, a);
  const auto zb = reference_delivery_sample({0.4, 0.3}, 5000, b);
  const auto zc = reference_delivery_sample({0.4, 0.3}, 5000, c);
  CHECK(za == zb);
  CHECK(za != zc);
}
