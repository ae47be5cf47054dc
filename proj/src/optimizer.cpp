#include "vwdsim/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "vwdsim/detail/subset_search.hpp"
#include "vwdsim/rng.hpp"

namespace vwdsim {

namespace {

constexpr double kSigmaSqFloor = 1e-6;      // variance lower bound per client
constexpr double kEqualityTol = 1e-9;       // total-mean equality tolerance
constexpr double kBindingTol = 1e-6;
constexpr double kGradMapTol = 1e-8;
constexpr int kMaxIters = 100000;
constexpr int kStarts = 8;
constexpr int kMaxCuts = 64;

double off_prob(const GeChannelParams& ch) { return ch.p / (ch.p + ch.q); }

// projection onto {x >= lo, sum x = total} by bisection on the shift
void project_simplex(std::vector<double>& x, double lo, double total) {
  const int n = static_cast<int>(x.size());
  if (n == 0) return;
  const double budget = total - lo * n;
  if (budget <= 0.0) {
    std::fill(x.begin(), x.end(), lo);
    return;
  }
  double th_lo = std::numeric_limits<double>::infinity();
  double th_hi = -std::numeric_limits<double>::infinity();
  for (double v : x) {
    th_lo = std::min(th_lo, v - lo - budget);
    th_hi = std::max(th_hi, v - lo);
  }
  for (int it = 0; it < 100; ++it) {
    const double th = 0.5 * (th_lo + th_hi);
    double s = 0.0;
    for (double v : x) s += std::max(v - lo - th, 0.0);
    if (s > budget)
      th_lo = th;
    else
      th_hi = th;
  }
  const double th = 0.5 * (th_lo + th_hi);
  double s = 0.0;
  for (double& v : x) {
    v = lo + std::max(v - lo - th, 0.0);
    s += v;
  }
  // absorb the bisection residual into the largest coordinate
  const double resid = total - s;
  auto it = std::max_element(x.begin(), x.end());
  *it += resid;
}

struct Cut {
  std::vector<int> members;  // sensing-variable indices
  double cap = 0.0;          // sum over members <= cap
};

// Dykstra's alternating projections onto simplex ∩ halfspaces. The sets are
// closed convex, so this converges to the exact Euclidean projection.
void project_mu(std::vector<double>& x, double total, const std::vector<Cut>& cuts) {
  if (x.empty()) return;
  if (cuts.empty()) {
    project_simplex(x, 0.0, total);
    return;
  }
  const size_t nsets = cuts.size() + 1;
  std::vector<std::vector<double>> corr(nsets, std::vector<double>(x.size(), 0.0));
  for (int sweep = 0; sweep < 400; ++sweep) {
    double moved = 0.0;
    for (size_t si = 0; si < nsets; ++si) {
      std::vector<double> y = x;
      for (size_t i = 0; i < x.size(); ++i) y[i] += corr[si][i];
      std::vector<double> z = y;
      if (si == 0) {
        project_simplex(z, 0.0, total);
      } else {
        const Cut& c = cuts[si - 1];
        double s = 0.0;
        for (int i : c.members) s += z[i];
        if (s > c.cap) {
          const double adj = (s - c.cap) / static_cast<double>(c.members.size());
          for (int i : c.members) z[i] -= adj;
        }
      }
      for (size_t i = 0; i < x.size(); ++i) {
        corr[si][i] = y[i] - z[i];
        moved += std::fabs(z[i] - x[i]);
        x[i] = z[i];
      }
    }
    if (moved < 1e-14) break;
  }
}

struct Workspace {
  // index maps
  std::vector<int> sensing;    // client index per sensing variable
  std::vector<int> streaming;  // client indices of streaming clients
  std::vector<double> fixed_mu;  // per client; streaming 1/w, sensing 0
  double budget = 0.0;           // sensing mean budget
  double sqrt_v_total = 0.0;     // sqrt-variance budget (already >= N*floor handled)
  double s_floor = std::sqrt(kSigmaSqFloor);
};

struct Point {
  std::vector<double> mu;  // sensing variables
  std::vector<double> s;   // per client sqrt(variance)
  std::vector<double> ell; // per client resolved delay (streaming only meaningful)
};

double eval_objective(const AllocationProblem& pb, const Workspace& ws, const Point& pt) {
  double f = 0.0;
  for (size_t k = 0; k < ws.sensing.size(); ++k) {
    const auto& cl = pb.clients[ws.sensing[k]];
    const double mu = pt.mu[k];
    if (!(mu > 0.0)) return std::numeric_limits<double>::infinity();
    const double s = pt.s[ws.sensing[k]];
    const double aoi = 0.5 * (s * s / (mu * mu) + 1.0 / mu) + 1.0 / cl.sensing.lambda - 0.5;
    f += cl.sensing.alpha * aoi;
  }
  for (int j : ws.streaming) {
    const auto& cl = pb.clients[j];
    const double s = pt.s[j];
    const double ell = pt.ell[j];
    f += cl.streaming.beta * s * s / (2.0 * ell) + cl.streaming.gamma * ell * ell;
  }
  return f;
}

void eval_gradient(const AllocationProblem& pb, const Workspace& ws, const Point& pt,
                   std::vector<double>& gmu, std::vector<double>& gs) {
  gmu.assign(ws.sensing.size(), 0.0);
  gs.assign(pb.clients.size(), 0.0);
  for (size_t k = 0; k < ws.sensing.size(); ++k) {
    const auto& cl = pb.clients[ws.sensing[k]];
    const double mu = pt.mu[k];
    const double s = pt.s[ws.sensing[k]];
    gmu[k] = cl.sensing.alpha * (-s * s / (mu * mu * mu) - 0.5 / (mu * mu));
    gs[ws.sensing[k]] = cl.sensing.alpha * s / (mu * mu);
  }
  for (int j : ws.streaming) {
    const auto& cl = pb.clients[j];
    gs[j] = cl.streaming.beta * pt.s[j] / pt.ell[j];
  }
}

void refresh_delays(const AllocationProblem& pb, const Workspace& ws, Point& pt) {
  for (int j : ws.streaming) {
    const auto& cl = pb.clients[j];
    if (cl.streaming.ell_configurable)
      pt.ell[j] = optimal_delay(pt.s[j] * pt.s[j], cl.streaming.beta, cl.streaming.gamma);
  }
}

void project_point(const Workspace& ws, const std::vector<Cut>& cuts, Point& pt) {
  project_mu(pt.mu, ws.budget, cuts);
  project_simplex(pt.s, ws.s_floor, std::max(ws.sqrt_v_total,
                                             ws.s_floor * static_cast<double>(pt.s.size())));
}

// one projected-gradient descent run on a fixed active set
double descend(const AllocationProblem& pb, const Workspace& ws,
               const std::vector<Cut>& cuts, Point& pt) {
  project_point(ws, cuts, pt);
  refresh_delays(pb, ws, pt);
  double f = eval_objective(pb, ws, pt);
  std::vector<double> gmu, gs;
  double step = 1.0;
  for (int it = 0; it < kMaxIters; ++it) {
    eval_gradient(pb, ws, pt, gmu, gs);
    // gradient mapping with unit step decides convergence
    Point ref = pt;
    for (size_t k = 0; k < gmu.size(); ++k) ref.mu[k] -= gmu[k];
    for (size_t i = 0; i < gs.size(); ++i) ref.s[i] -= gs[i];
    project_point(ws, cuts, ref);
    double map_norm = 0.0;
    for (size_t k = 0; k < gmu.size(); ++k) map_norm = std::max(map_norm, std::fabs(ref.mu[k] - pt.mu[k]));
    for (size_t i = 0; i < gs.size(); ++i) map_norm = std::max(map_norm, std::fabs(ref.s[i] - pt.s[i]));
    if (map_norm < kGradMapTol) break;

    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      Point trial = pt;
      for (size_t k = 0; k < gmu.size(); ++k) trial.mu[k] -= step * gmu[k];
      for (size_t i = 0; i < gs.size(); ++i) trial.s[i] -= step * gs[i];
      project_point(ws, cuts, trial);
      refresh_delays(pb, ws, trial);
      const double ft = eval_objective(pb, ws, trial);
      double dist2 = 0.0;
      for (size_t k = 0; k < gmu.size(); ++k) dist2 += (trial.mu[k] - pt.mu[k]) * (trial.mu[k] - pt.mu[k]);
      for (size_t i = 0; i < gs.size(); ++i) dist2 += (trial.s[i] - pt.s[i]) * (trial.s[i] - pt.s[i]);
      if (ft <= f - 1e-4 * dist2 / step) {
        pt = std::move(trial);
        f = ft;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // step underflow; as converged as we will get
    step = std::min(step * 1.25, 1e6);
  }
  return f;
}

}  // namespace

AllocationProblem make_problem(std::vector<ClientSpec> clients, double delta,
                               double truncation_tol) {
  if (clients.empty()) throw std::invalid_argument("problem needs at least one client");
  std::vector<GeChannelParams> chans;
  chans.reserve(clients.size());
  for (auto& cl : clients) {
    validate_channel(cl.channel);
    if (cl.kind == ClientKind::Sensing) {
      if (!(cl.sensing.lambda > 0.0) || !(cl.sensing.lambda <= 1.0))
        throw std::invalid_argument("sensing lambda must be in (0, 1]");
      if (!(cl.sensing.alpha > 0.0))
        throw std::invalid_argument("sensing alpha must be positive");
    } else {
      if (cl.streaming.w < 1) throw std::invalid_argument("streaming w must be >= 1");
      if (!(cl.streaming.beta >= 0.0)) throw std::invalid_argument("streaming beta must be >= 0");
      if (!(cl.streaming.gamma >= 0.0)) throw std::invalid_argument("streaming gamma must be >= 0");
      if (cl.streaming.ell_configurable) {
        if (!(cl.streaming.gamma > 0.0) || !(cl.streaming.beta > 0.0))
          throw std::invalid_argument("configurable delay needs beta > 0 and gamma > 0");
      } else if (!(cl.streaming.ell > 0.0)) {
        throw std::invalid_argument("streaming ell must be positive");
      }
    }
    chans.push_back(cl.channel);
  }
  AllocationProblem pb;
  pb.truncation = truncation_depth(chans, truncation_tol);
  pb.channel_full = SecondOrderModel{subset_mean(chans), subset_variance(chans, pb.truncation)};
  pb.delta = delta > 0.0 ? delta : 1e-3 * pb.channel_full.mean;
  pb.clients = std::move(clients);
  return pb;
}

double objective_value(const AllocationSolution& solution,
                       const AllocationProblem& problem) {
  if (solution.targets.clients.size() != problem.clients.size())
    throw std::invalid_argument("solution does not match problem");
  double f = 0.0;
  for (size_t i = 0; i < problem.clients.size(); ++i) {
    const auto& cl = problem.clients[i];
    const auto& tg = solution.targets.clients[i];
    if (cl.kind == ClientKind::Sensing) {
      f += cl.sensing.alpha * aoi_approx(tg, cl.sensing.lambda);
    } else {
      const double ell = solution.delays[i];
      f += cl.streaming.beta * outage_approx(tg, ell) + cl.streaming.gamma * ell * ell;
    }
  }
  return f;
}

double optimal_delay(double sigma_sq, double beta, double gamma) {
  if (!(sigma_sq >= 0.0)) throw std::invalid_argument("optimal_delay needs sigma_sq >= 0");
  if (!(beta > 0.0) || !(gamma > 0.0))
    throw std::invalid_argument("optimal_delay needs beta > 0 and gamma > 0");
  return std::cbrt(beta * sigma_sq / (4.0 * gamma));
}

std::optional<uint64_t> separation_oracle(std::span<const double> mu,
                                          std::span<const GeChannelParams> channels,
                                          double delta) {
  if (mu.size() != channels.size())
    throw std::invalid_argument("mu and channel lists differ in length");
  std::vector<double> off(channels.size());
  for (size_t i = 0; i < channels.size(); ++i) {
    validate_channel(channels[i]);
    off[i] = off_prob(channels[i]);
  }
  auto [slack, mask] = detail::min_proper_subset_slack(off, mu);
  if (slack < delta) return mask;
  return std::nullopt;
}

AllocationSolution solve(const AllocationProblem& pb) {
  const int n = static_cast<int>(pb.clients.size());
  if (n == 0) throw std::invalid_argument("problem needs at least one client");

  Workspace ws;
  ws.fixed_mu.assign(n, 0.0);
  std::vector<GeChannelParams> chans(n);
  std::vector<double> off(n);
  double streaming_demand = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto& cl = pb.clients[i];
    chans[i] = cl.channel;
    off[i] = off_prob(cl.channel);
    if (cl.kind == ClientKind::Sensing) {
      ws.sensing.push_back(i);
    } else {
      ws.streaming.push_back(i);
      ws.fixed_mu[i] = 1.0 / static_cast<double>(cl.streaming.w);
      streaming_demand += ws.fixed_mu[i];
    }
  }
  ws.budget = pb.channel_full.mean - streaming_demand;
  ws.sqrt_v_total = std::sqrt(std::max(pb.channel_full.variance, 0.0));

  if (ws.budget < -kEqualityTol)
    throw InfeasibleProblem(
        "total_mean: streaming demand " + std::to_string(streaming_demand) +
        " exceeds channel budget " + std::to_string(pb.channel_full.mean));
  if (ws.sensing.empty() && std::fabs(ws.budget) > kEqualityTol)
    throw InfeasibleProblem(
        "total_mean: streaming-only demand " + std::to_string(streaming_demand) +
        " cannot match channel budget " + std::to_string(pb.channel_full.mean) +
        " (no sensing client can absorb the slack)");
  if (!ws.sensing.empty() && !(ws.budget > pb.delta))
    throw InfeasibleProblem(
        "total_mean: sensing budget " + std::to_string(ws.budget) +
        " does not exceed delta " + std::to_string(pb.delta));

  // streaming rates alone must clear every subset cap; sensing means cannot help
  if (auto bad = separation_oracle(ws.fixed_mu, chans, pb.delta)) {
    ConstraintSlack c{ConstraintKind::SubsetMean, *bad, 0.0, 0.0, 0.0};
    throw InfeasibleProblem(describe_constraint(c) +
                            ": fixed streaming rates exceed the subset capacity");
  }

  const int ns = static_cast<int>(ws.sensing.size());
  std::vector<Cut> cuts;
  auto make_cut = [&](uint64_t mask) {
    Cut c;
    double cap = 1.0;  // product of off probs
    double fixed = 0.0;
    for (int i = 0; i < n; ++i) {
      if (!(mask >> i & 1)) continue;
      cap *= off[i];
      if (pb.clients[i].kind == ClientKind::Streaming) fixed += ws.fixed_mu[i];
    }
    for (int k = 0; k < ns; ++k)
      if (mask >> ws.sensing[k] & 1) c.members.push_back(k);
    c.cap = (1.0 - cap) - pb.delta - fixed;
    return c;
  };

  Rng rng(0x5eedu);  // fixed: solve() is deterministic
  Point best;
  double best_f = std::numeric_limits<double>::infinity();
  std::vector<Cut> best_cuts;

  for (int start = 0; start < kStarts; ++start) {
    Point pt;
    pt.mu.assign(ns, ws.budget / std::max(ns, 1));
    pt.s.assign(n, std::max(ws.sqrt_v_total / n, ws.s_floor));
    pt.ell.assign(n, 1.0);
    for (int j : ws.streaming) pt.ell[j] = pb.clients[j].streaming.ell;
    if (start > 0) {
      double msum = 0.0, ssum = 0.0;
      std::vector<double> em(ns), es(n);
      for (int k = 0; k < ns; ++k) msum += em[k] = -std::log(rng.next_double() + 1e-300);
      for (int i = 0; i < n; ++i) ssum += es[i] = -std::log(rng.next_double() + 1e-300);
      for (int k = 0; k < ns; ++k) pt.mu[k] = ws.budget * em[k] / msum;
      const double spare = std::max(ws.sqrt_v_total - n * ws.s_floor, 0.0);
      for (int i = 0; i < n; ++i) pt.s[i] = ws.s_floor + spare * es[i] / ssum;
    }
    refresh_delays(pb, ws, pt);

    std::vector<Cut> active = cuts;  // reuse cuts discovered by earlier starts
    double f = descend(pb, ws, active, pt);
    for (int round = 0; round < kMaxCuts; ++round) {
      std::vector<double> full_mu = ws.fixed_mu;
      for (int k = 0; k < ns; ++k) full_mu[ws.sensing[k]] = pt.mu[k];
      auto violated = separation_oracle(full_mu, chans, pb.delta * (1.0 - 1e-9));
      if (!violated) break;
      active.push_back(make_cut(*violated));
      f = descend(pb, ws, active, pt);
    }
    cuts = active;
    if (f < best_f - 1e-12) {
      best_f = f;
      best = pt;
      best_cuts = active;
    }
  }
  if (!std::isfinite(best_f))
    throw InfeasibleProblem("subset constraints left no room for positive sensing rates");

  AllocationSolution sol;
  sol.targets.clients.resize(n);
  sol.delays.assign(n, 0.0);
  std::vector<double> full_mu = ws.fixed_mu;
  for (int k = 0; k < ns; ++k) full_mu[ws.sensing[k]] = best.mu[k];
  for (int i = 0; i < n; ++i) {
    sol.targets.clients[i] = SecondOrderModel{full_mu[i], best.s[i] * best.s[i]};
    if (pb.clients[i].kind == ClientKind::Streaming) sol.delays[i] = best.ell[i];
  }
  sol.objective = best_f;

  // binding constraints: total mean always, plus anything within kBindingTol
  double sum_mu = std::accumulate(full_mu.begin(), full_mu.end(), 0.0);
  sol.binding.push_back({ConstraintKind::TotalMean, 0, sum_mu, pb.channel_full.mean,
                         sum_mu - pb.channel_full.mean});
  double sum_s = 0.0;
  for (int i = 0; i < n; ++i) sum_s += best.s[i];
  const double vslack = sum_s - ws.sqrt_v_total;
  if (std::fabs(vslack) <= kBindingTol)
    sol.binding.push_back({ConstraintKind::VarianceBudget, 0, sum_s, ws.sqrt_v_total, vslack});
  if (n > 1) {
    auto [slack, mask] = detail::min_proper_subset_slack(off, full_mu);
    const double rel = slack - pb.delta;
    if (std::fabs(rel) <= kBindingTol) {
      ConstraintSlack c{ConstraintKind::SubsetMean, mask, 0.0, 0.0, rel};
      uint64_t m = mask;
      for (int i = 0; i < n; ++i)
        if (m >> i & 1) c.lhs += full_mu[i];
      c.rhs = c.lhs + rel;
      sol.binding.push_back(c);
    }
  }
  for (int i = 0; i < n; ++i)
    if (std::fabs(best.s[i] - ws.s_floor) <= kBindingTol)
      sol.binding.push_back({ConstraintKind::PositiveVariance, static_cast<uint64_t>(i),
                             best.s[i] * best.s[i], kSigmaSqFloor,
                             best.s[i] * best.s[i] - kSigmaSqFloor});
  return sol;
}

}  // namespace vwdsim
