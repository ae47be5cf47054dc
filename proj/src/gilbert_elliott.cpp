#include "vwdsim/gilbert_elliott.hpp"

#include <cmath>
#include <string>

namespace vwdsim {

namespace {
constexpr int64_t kMaxTruncation = 1000000;
}

void validate_channel(const GeChannelParams& ch) {
  if (!(ch.p > 0.0) || !(ch.p <= 1.0))
    throw std::invalid_argument("channel p must be in (0, 1], got " + std::to_string(ch.p));
  if (!(ch.q > 0.0) || !(ch.q <= 1.0))
    throw std::invalid_argument("channel q must be in (0, 1], got " + std::to_string(ch.q));
  if (ch.p == 1.0 && ch.q == 1.0)
    throw std::invalid_argument("channel with p = q = 1 alternates forever and has no stationary behaviour");
}

double stationary_on_prob(const GeChannelParams& ch) { return ch.q / (ch.p + ch.q); }

ChannelState sample_initial_state(const GeChannelParams& ch, Rng& rng) {
  return ChannelState{rng.next_double() < stationary_on_prob(ch)};
}

ChannelState step(ChannelState s, const GeChannelParams& ch, Rng& rng) {
  const double u = rng.next_double();
  // u < 1 always, so p = 1 or q = 1 means the transition is certain
  return ChannelState{s.on ? !(u < ch.p) : (u < ch.q)};
}

double g_function(const GeChannelParams& ch, int64_t k) {
  if (k < 1) throw std::invalid_argument("g_function lag must be >= 1");
  if (k == 1) return 1.0;
  const double pi_off = ch.p / (ch.p + ch.q);
  const double pi_on = ch.q / (ch.p + ch.q);
  const double r = 1.0 - ch.p - ch.q;
  return pi_off + pi_on * std::pow(r, static_cast<double>(k - 1));
}

int64_t truncation_depth(std::span<const GeChannelParams> channels, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("truncation tolerance must be positive");
  int64_t depth = 1;
  for (const auto& ch : channels) {
    validate_channel(ch);
    const double pi_on = ch.q / (ch.p + ch.q);
    const double r = std::fabs(1.0 - ch.p - ch.q);
    // need pi_on * r^(K-1) < tol
    int64_t k;
    if (pi_on < tol) {
      k = 1;
    } else if (r == 0.0) {
      k = 2;
    } else {
      k = 1 + static_cast<int64_t>(std::ceil(std::log(tol / pi_on) / std::log(r)));
      if (k < 1) k = 1;
      // the closed form can be off by one at the boundary; settle it exactly
      while (k > 1 && pi_on * std::pow(r, static_cast<double>(k - 2)) < tol) --k;
      while (k <= kMaxTruncation && !(pi_on * std::pow(r, static_cast<double>(k - 1)) < tol)) ++k;
    }
    if (k > kMaxTruncation)
      throw NoFiniteTruncation("no finite truncation below " + std::to_string(kMaxTruncation) +
                               " lags for channel p=" + std::to_string(ch.p) +
                               " q=" + std::to_string(ch.q) + " at tol=" + std::to_string(tol));
    depth = std::max(depth, k);
  }
  return depth;
}

double subset_mean(std::span<const GeChannelParams> channels) {
  double prod = 1.0;
  for (const auto& ch : channels) {
    validate_channel(ch);
    prod *= ch.p / (ch.p + ch.q);
  }
  return 1.0 - prod;
}

double subset_variance(std::span<const GeChannelParams> channels, int64_t K) {
  if (channels.empty())
    throw std::invalid_argument("subset_variance needs at least one channel");
  if (K < 1) throw std::invalid_argument("subset_variance truncation must be >= 1");
  const size_t n = channels.size();
  std::vector<double> pi_off(n), pi_on(n), r(n), rk(n);
  double prod_off = 1.0;
  for (size_t i = 0; i < n; ++i) {
    validate_channel(channels[i]);
    pi_off[i] = channels[i].p / (channels[i].p + channels[i].q);
    pi_on[i] = channels[i].q / (channels[i].p + channels[i].q);
    r[i] = 1.0 - channels[i].p - channels[i].q;
    rk[i] = r[i];  // r^k, starting at k = 1
    prod_off *= pi_off[i];
  }
  // sum over lags k = 1..K of (prod_n G_n(k+1) - prod_n pi_off) * prod_off
  double acc = 0.0;
  for (int64_t k = 1; k <= K; ++k) {
    double g = 1.0;
    for (size_t i = 0; i < n; ++i) {
      g *= pi_off[i] + pi_on[i] * rk[i];
      rk[i] *= r[i];
    }
    acc += g - prod_off;
  }
  const double v = 2.0 * acc * prod_off + prod_off - prod_off * prod_off;
  if (v < 0.0) {
    if (v > -1e-9) return 0.0;
    throw std::runtime_error("subset_variance went negative (" + std::to_string(v) +
                             "); numerical breakdown");
  }
  return v;
}

SecondOrderModel iid_subset_model(std::span<const double> on_probs) {
  double prod_off = 1.0;
  for (double q : on_probs) {
    if (!(q >= 0.0) || !(q <= 1.0))
      throw std::invalid_argument("iid ON probability must be in [0, 1], got " + std::to_string(q));
    prod_off *= 1.0 - q;
  }
  if (on_probs.empty()) return SecondOrderModel{0.0, 0.0};
  return SecondOrderModel{1.0 - prod_off, prod_off - prod_off * prod_off};
}

ChannelModelTable build_channel_table(std::span<const GeChannelParams> channels,
                                      int64_t K) {
  std::vector<double> off(channels.size());
  for (size_t i = 0; i < channels.size(); ++i) {
    validate_channel(channels[i]);
    off[i] = channels[i].p / (channels[i].p + channels[i].q);
  }
  SecondOrderModel full{subset_mean(channels), subset_variance(channels, K)};
  return ChannelModelTable(std::move(off), full);
}

ChannelModelTable build_channel_table_iid(std::span<const double> on_probs) {
  if (on_probs.empty())
    throw std::invalid_argument("channel table needs at least one client");
  std::vector<double> off(on_probs.size());
  for (size_t i = 0; i < on_probs.size(); ++i) off[i] = 1.0 - on_probs[i];
  return ChannelModelTable(std::move(off), iid_subset_model(on_probs));
}

}  // namespace vwdsim
