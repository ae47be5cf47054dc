#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "helpers.hpp"
#include "vwdsim/optimizer.hpp"

using namespace vwdsim;
using testutil::near;

namespace {

ClientSpec sensing_client(std::string id, GeChannelParams ch, double lambda = 1.0,
                          double alpha = 1.0) {
  ClientSpec c;
  c.id = std::move(id);
  c.kind = ClientKind::Sensing;
  c.channel = ch;
  c.sensing = {lambda, alpha};
  return c;
}

ClientSpec streaming_client(std::string id, GeChannelParams ch, int w, double ell,
                            double beta = 1.0, double gamma = 0.0) {
  ClientSpec c;
  c.id = std::move(id);
  c.kind = ClientKind::Streaming;
  c.channel = ch;
  c.streaming = {w, ell, /*ell_configurable=*/false, beta, gamma};
  return c;
}

ClientSpec streaming_configurable(std::string id, GeChannelParams ch, int w,
                                  double beta, double gamma) {
  ClientSpec c;
  c.id = std::move(id);
  c.kind = ClientKind::Streaming;
  c.channel = ch;
  c.streaming = {w, 1.0, /*ell_configurable=*/true, beta, gamma};
  return c;
}

// independent exhaustive reimplementation of the subset search
std::pair<double, uint64_t> brute_min_slack(std::span<const double> mu,
                                            std::span<const GeChannelParams> chans) {
  const int n = static_cast<int>(chans.size());
  double best = std::numeric_limits<double>::infinity();
  uint64_t best_mask = 0;
  for (uint64_t mask = 1; mask + 1 < (uint64_t(1) << n); ++mask) {
    double off = 1.0, sum = 0.0;
    for (int i = 0; i < n; ++i) {
      if (!(mask >> i & 1)) continue;
      off *= chans[i].p / (chans[i].p + chans[i].q);
      sum += mu[i];
    }
    const double slack = (1.0 - off) - sum;
    if (slack < best) {
      best = slack;
      best_mask = mask;
    }
  }
  return {best, best_mask};
}

}  // namespace

TEST_CASE("optimal delay closed form") {
  CHECK(optimal_delay(4.0, 1.0, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(optimal_delay(4.0, 1.0, 1.0 / 32.0) ==
        doctest::Approx(std::cbrt(32.0)).epsilon(1e-12));
  CHECK(optimal_delay(0.0, 1.0, 1.0) == 0.0);
  CHECK_THROWS_AS(optimal_delay(4.0, 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(optimal_delay(4.0, 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(optimal_delay(-1.0, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("optimal delay beats a fine grid") {
  Rng rng(808);
  for (int rep = 0; rep < 50; ++rep) {
    const double v = 0.01 + 2.0 * rng.next_double();
    const double beta = 0.1 + rng.next_double();
    const double gamma = 0.001 + 0.2 * rng.next_double();
    const double star = optimal_delay(v, beta, gamma);
    auto cost = [&](double ell) { return beta * v / (2.0 * ell) + gamma * ell * ell; };
    double grid_best = std::numeric_limits<double>::infinity();
    for (int i = 1; i <= 4000; ++i) grid_best = std::min(grid_best, cost(i * 0.005));
    CHECK(cost(star) <= grid_best + 1e-9);
    CHECK(cost(star) <= cost(star * 1.01));
    CHECK(cost(star) <= cost(star * 0.99));
  }
}

TEST_CASE("separation oracle matches exhaustive search") {
  Rng rng(606);
  for (int rep = 0; rep < 120; ++rep) {
    const int n = 2 + int(rng.next_u64() % 9);  // up to 10 clients
    const auto chans = testutil::random_channels(rng, n, 0.1, 0.95);
    std::vector<double> mu(n);
    const double scale = 0.3 + rng.next_double();  // straddles feas/infeas
    for (int i = 0; i < n; ++i)
      mu[i] = scale * stationary_on_prob(chans[i]) * rng.next_double();
    const double delta = rng.next_double() < 0.5 ? 0.0 : 0.01;

    const auto [bf_slack, bf_mask] = brute_min_slack(mu, chans);
    const auto impl = separation_oracle(mu, chans, delta);
    if (bf_slack < delta) {
      REQUIRE(impl.has_value());
      // ties allowed: the returned mask must achieve the same minimum slack
      double off = 1.0, sum = 0.0;
      for (int i = 0; i < n; ++i) {
        if (!(*impl >> i & 1)) continue;
        off *= chans[i].p / (chans[i].p + chans[i].q);
        sum += mu[i];
      }
      CHECK(near((1.0 - off) - sum, bf_slack, 1e-12));
    } else {
      CHECK_FALSE(impl.has_value());
    }
  }
  std::vector<double> mu{0.5};
  std::vector<GeChannelParams> one{{0.5, 0.5}};
  CHECK_FALSE(separation_oracle(mu, one, 0.5).has_value());  // no proper subsets
  std::vector<double> two{0.5, 0.5};
  CHECK_THROWS_AS(separation_oracle(two, one, 0.0), std::invalid_argument);
}

TEST_CASE("problem construction") {
  auto pb = make_problem({sensing_client("a", {0.5, 0.5})}, 0.0, 1e-3);
  CHECK(pb.clients.size() == 1);
  CHECK(pb.channel_full.mean == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(pb.channel_full.variance == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(pb.truncation == 2);
  CHECK(pb.delta == doctest::Approx(5e-4).epsilon(1e-12));  // 1e-3 * m_full

  auto pb2 = make_problem({sensing_client("a", {0.5, 0.5})}, 0.07, 1e-3);
  CHECK(pb2.delta == doctest::Approx(0.07).epsilon(1e-12));

  CHECK_THROWS_AS(make_problem({}, 0.0, 1e-3), std::invalid_argument);
  CHECK_THROWS_AS(make_problem({sensing_client("a", {0.0, 0.5})}, 0.0, 1e-3),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_problem({sensing_client("a", {0.5, 0.5}, 0.0)}, 0.0, 1e-3),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_problem({sensing_client("a", {0.5, 0.5}, 1.2)}, 0.0, 1e-3),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_problem({sensing_client("a", {0.5, 0.5}, 1.0, 0.0)}, 0.0, 1e-3),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_problem({streaming_client("b", {0.5, 0.5}, 0, 1.0)}, 0.0, 1e-3),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_problem({streaming_client("b", {0.5, 0.5}, 2, -1.0)}, 0.0, 1e-3),
                  std::invalid_argument);
  // configurable delay requires both beta and gamma positive
  CHECK_THROWS_AS(
      make_problem({streaming_configurable("b", {0.5, 0.5}, 2, 1.0, 0.0)}, 0.0, 1e-3),
      std::invalid_argument);
  CHECK_THROWS_AS(
      make_problem({streaming_configurable("b", {0.5, 0.5}, 2, 0.0, 1.0)}, 0.0, 1e-3),
      std::invalid_argument);
}

TEST_CASE("single sensing client takes the whole channel") {
  const auto pb = make_problem({sensing_client("a", {0.5, 0.5})}, 0.0, 1e-3);
  const auto sol = solve(pb);
  REQUIRE(sol.targets.clients.size() == 1);
  CHECK(near(sol.targets.clients[0].mean, 0.5, 1e-9));
  CHECK(near(sol.targets.clients[0].variance, 0.25, 1e-9));
  CHECK(near(sol.objective, 2.0, 1e-6));
  CHECK(near(sol.objective, objective_value(sol, pb), 1e-9));
  CHECK(sol.delays[0] == 0.0);

  bool total = false, varbudget = false;
  for (const auto& b : sol.binding) {
    total |= b.kind == ConstraintKind::TotalMean;
    varbudget |= b.kind == ConstraintKind::VarianceBudget;
    CHECK(std::fabs(b.slack) <= 1e-6);
  }
  CHECK(total);
  CHECK(varbudget);
}

TEST_CASE("identical clients get identical targets") {
  const auto pb = make_problem(
      {sensing_client("a", {0.5, 0.5}), sensing_client("b", {0.5, 0.5})}, 0.0, 1e-3);
  const auto sol = solve(pb);
  REQUIRE(sol.targets.clients.size() == 2);
  const auto& t0 = sol.targets.clients[0];
  const auto& t1 = sol.targets.clients[1];
  CHECK(near(t0.mean, t1.mean, 1e-6));
  CHECK(near(t0.variance, t1.variance, 1e-6));
  CHECK(near(t0.mean, 0.375, 1e-6));
  CHECK(near(t0.variance, 0.1875 / 4.0, 1e-6));
  CHECK(near(sol.objective, objective_value(sol, pb), 1e-9));

  // nudging mass between the two can only hurt
  for (double eps : {0.01, -0.01}) {
    AllocationSolution perturbed = sol;
    perturbed.targets.clients[0].mean += eps;
    perturbed.targets.clients[1].mean -= eps;
    CHECK(objective_value(perturbed, pb) >= sol.objective - 1e-9);
  }
}

TEST_CASE("objective scales linearly with the weights") {
  std::vector<ClientSpec> base = {sensing_client("a", {0.4, 0.3}, 0.8, 1.0),
                                  sensing_client("b", {0.6, 0.5}, 1.0, 2.0)};
  std::vector<ClientSpec> scaled = base;
  for (auto& c : scaled) c.sensing.alpha *= 2.0;
  const auto sol1 = solve(make_problem(base, 0.0, 1e-3));
  const auto sol2 = solve(make_problem(scaled, 0.0, 1e-3));
  CHECK(near(sol2.objective, 2.0 * sol1.objective, 1e-6));
  for (size_t i = 0; i < 2; ++i) {
    CHECK(near(sol1.targets.clients[i].mean, sol2.targets.clients[i].mean, 1e-5));
    CHECK(near(sol1.targets.clients[i].variance, sol2.targets.clients[i].variance, 1e-5));
  }
}

TEST_CASE("solver output is deterministic") {
  const auto pb = make_problem({sensing_client("a", {0.3, 0.2}, 0.5),
                                sensing_client("b", {0.6, 0.5}),
                                streaming_client("c", {0.4, 0.6}, 3, 4.0)},
                               0.0, 1e-3);
  const auto s1 = solve(pb);
  const auto s2 = solve(pb);
  CHECK(s1.objective == s2.objective);
  for (size_t i = 0; i < s1.targets.clients.size(); ++i) {
    CHECK(s1.targets.clients[i].mean == s2.targets.clients[i].mean);
    CHECK(s1.targets.clients[i].variance == s2.targets.clients[i].variance);
  }
}

TEST_CASE("solution respects structure and bounds") {
  const auto pb = make_problem({sensing_client("a", {0.3, 0.2}, 0.5),
                                sensing_client("b", {0.6, 0.5}),
                                streaming_client("c", {0.4, 0.6}, 3, 4.0)},
                               0.0, 1e-3);
  const auto sol = solve(pb);
  // streaming mean pinned to the frame rate
  CHECK(sol.targets.clients[2].mean == 1.0 / 3.0);
  CHECK(sol.delays[2] == 4.0);
  // total mean exhausted, sqrt-variance budget binding
  double sum_mu = 0.0, sum_s = 0.0;
  for (const auto& t : sol.targets.clients) {
    CHECK(t.mean >= 0.0);
    CHECK(t.variance > 0.0);
    sum_mu += t.mean;
    sum_s += std::sqrt(t.variance);
  }
  CHECK(near(sum_mu, pb.channel_full.mean, 1e-9));
  CHECK(near(sum_s, std::sqrt(pb.channel_full.variance), 1e-6));
  // the delta-relaxed subset constraints hold
  std::vector<double> mu;
  std::vector<GeChannelParams> chans;
  for (size_t i = 0; i < pb.clients.size(); ++i) {
    mu.push_back(sol.targets.clients[i].mean);
    chans.push_back(pb.clients[i].channel);
  }
  CHECK_FALSE(separation_oracle(mu, chans, pb.delta * (1.0 - 1e-6)).has_value());
  CHECK(near(sol.objective, objective_value(sol, pb), 1e-9));
}

TEST_CASE("solver beats random feasible samples") {
  Rng rng(2024);
  for (int inst = 0; inst < 4; ++inst) {
    const int n = 2 + int(rng.next_u64() % 2);
    std::vector<ClientSpec> clients;
    for (int i = 0; i < n; ++i) {
      const auto ch = testutil::random_channel(rng, 0.2, 0.9);
      if (i == 0 && inst % 2 == 1)
        clients.push_back(streaming_client("s0", ch, 2 + int(rng.next_u64() % 3),
                                           2.0 + 3.0 * rng.next_double()));
      else
        clients.push_back(sensing_client("c" + std::to_string(i), ch,
                                         0.3 + 0.7 * rng.next_double(),
                                         0.5 + rng.next_double()));
    }
    AllocationProblem pb;
    try {
      pb = make_problem(clients, 0.0, 1e-3);
      const auto sol = solve(pb);

      std::vector<int> sensing_ix;
      double budget = pb.channel_full.mean;
      for (int i = 0; i < n; ++i) {
        if (pb.clients[i].kind == ClientKind::Sensing)
          sensing_ix.push_back(i);
        else
          budget -= 1.0 / pb.clients[i].streaming.w;
      }
      std::vector<GeChannelParams> chans;
      for (const auto& c : pb.clients) chans.push_back(c.channel);

      double best_sample = std::numeric_limits<double>::infinity();
      int accepted = 0;
      for (int it = 0; it < 4000 && accepted < 300; ++it) {
        AllocationSolution cand;
        cand.targets.clients.resize(n);
        cand.delays.assign(n, 0.0);
        std::vector<double> mu(n, 0.0);
        double esum = 0.0;
        std::vector<double> e(sensing_ix.size());
        for (auto& x : e) esum += x = -std::log(rng.next_double() + 1e-300);
        for (size_t k = 0; k < sensing_ix.size(); ++k)
          mu[sensing_ix[k]] = budget * e[k] / esum;
        for (int i = 0; i < n; ++i)
          if (pb.clients[i].kind == ClientKind::Streaming)
            mu[i] = 1.0 / pb.clients[i].streaming.w;
        bool ok = true;
        for (int k : sensing_ix) ok &= mu[k] > 1e-3 * budget;
        if (!ok || separation_oracle(mu, chans, pb.delta).has_value()) continue;

        const double s_total = std::sqrt(pb.channel_full.variance);
        std::vector<double> se(n);
        double ssum = 0.0;
        for (auto& x : se) ssum += x = -std::log(rng.next_double() + 1e-300);
        for (int i = 0; i < n; ++i) {
          const double s = 1e-3 + (s_total - n * 1e-3) * se[i] / ssum;
          cand.targets.clients[i] = {mu[i], s * s};
          if (pb.clients[i].kind == ClientKind::Streaming)
            cand.delays[i] = pb.clients[i].streaming.ell;
        }
        ++accepted;
        best_sample = std::min(best_sample, objective_value(cand, pb));
      }
      REQUIRE(accepted > 0);
      CHECK(sol.objective <= best_sample + 1e-3);
    } catch (const InfeasibleProblem&) {
      continue;  // random channels occasionally cannot carry the streaming load
    }
  }
}

TEST_CASE("configurable delay lands on the closed form") {
  const auto pb = make_problem({streaming_configurable("s", {0.3, 0.3}, 2, 1.0, 0.01)},
                               0.0, 1e-3);
  const auto sol = solve(pb);
  CHECK(sol.targets.clients[0].mean == 0.5);
  const double v = sol.targets.clients[0].variance;
  CHECK(near(v, pb.channel_full.variance, 1e-9));  // sole client owns the budget
  CHECK(near(sol.delays[0], optimal_delay(v, 1.0, 0.01), 1e-9));
  CHECK(near(sol.objective, v / (2.0 * sol.delays[0]) + 0.01 * sol.delays[0] * sol.delays[0],
             1e-9));
}

TEST_CASE("infeasible problems name the violated constraint") {
  SUBCASE("streaming demand exceeds the channel") {
    const auto pb = make_problem({streaming_client("s", {0.5, 0.5}, 1, 2.0)}, 0.0, 1e-3);
    CHECK_THROWS_WITH_AS(solve(pb), doctest::Contains("total_mean"), InfeasibleProblem);
  }
  SUBCASE("streaming-only problems must match the budget exactly") {
    const auto pb = make_problem({streaming_client("s", {0.2, 0.3}, 2, 2.0)}, 0.0, 1e-3);
    CHECK_THROWS_WITH_AS(solve(pb), doctest::Contains("total_mean"), InfeasibleProblem);
  }
  SUBCASE("sensing budget squeezed below delta") {
    const auto pb = make_problem({sensing_client("a", {0.9, 0.1}),
                                  streaming_client("s", {0.5555, 0.4445}, 2, 2.0)},
                                 0.0, 1e-3);
    CHECK_THROWS_WITH_AS(solve(pb), doctest::Contains("total_mean"), InfeasibleProblem);
  }
  SUBCASE("fixed streaming rate breaks a subset cap") {
    const auto pb = make_problem({streaming_client("s", {0.55, 0.45}, 2, 2.0),
                                  sensing_client("a", {0.1, 0.9})},
                                 0.0, 1e-3);
    CHECK_THROWS_WITH_AS(solve(pb), doctest::Contains("subset"), InfeasibleProblem);
  }
}

TEST_CASE("objective evaluation rejects mismatched shapes") {
  const auto pb = make_problem({sensing_client("a", {0.5, 0.5})}, 0.0, 1e-3);
  AllocationSolution sol;
  sol.targets.clients = {{0.3, 0.1}, {0.2, 0.1}};
  sol.delays = {0.0, 0.0};
  CHECK_THROWS_AS(objective_value(sol, pb), std::invalid_argument);
}
