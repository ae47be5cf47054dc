#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "vwdsim/rng.hpp"
#include "vwdsim/second_order.hpp"

namespace vwdsim {

// Two-state Gilbert-Elliott channel. p = P(ON -> OFF), q = P(OFF -> ON).
// p and q live in (0,1]; p = q = 1 is rejected (the chain would alternate
// deterministically and never mix).
struct GeChannelParams {
  double p = 0.0;
  double q = 0.0;
};

void validate_channel(const GeChannelParams& ch);  // throws std::invalid_argument

struct ChannelState {
  bool on = false;
};

double stationary_on_prob(const GeChannelParams& ch);

ChannelState sample_initial_state(const GeChannelParams& ch, Rng& rng);
ChannelState step(ChannelState s, const GeChannelParams& ch, Rng& rng);

// P(channel OFF at slot t+k-1 | OFF at slot t); decays geometrically from
// g_function(ch, 1) == 1 (exact) to the stationary OFF probability p/(p+q).
double g_function(const GeChannelParams& ch, int64_t k);

struct NoFiniteTruncation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Smallest K with g(K) - p/(p+q) < tol for every listed channel. Throws
// NoFiniteTruncation if no K <= 1e6 works.
int64_t truncation_depth(std::span<const GeChannelParams> channels, double tol);

// Long-run fraction of slots in which at least one channel of the subset is
// ON. Empty subset -> 0.
double subset_mean(std::span<const GeChannelParams> channels);

// Temporal variance of the subset's any-ON indicator process, correlation sum
// truncated at lag K. Throws on an empty subset. Tiny negative results in
// (-1e-9, 0) are rounded to 0; anything below -1e-9 is an error.
double subset_variance(std::span<const GeChannelParams> channels, int64_t K);

// Special case of independent per-slot ON draws (p + q = 1, P(ON) = q): the
// closed forms need no truncation.
SecondOrderModel iid_subset_model(std::span<const double> on_probs);

// Capacity table for a set of clients sharing the channel set, full-set
// variance truncated at K.
ChannelModelTable build_channel_table(std::span<const GeChannelParams> channels,
                                      int64_t K);
ChannelModelTable build_channel_table_iid(std::span<const double> on_probs);

}  // namespace vwdsim
