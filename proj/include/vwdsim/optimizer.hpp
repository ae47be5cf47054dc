#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vwdsim/gilbert_elliott.hpp"
#include "vwdsim/second_order.hpp"

namespace vwdsim {

enum class ClientKind { Sensing, Streaming };

struct SensingParams {
  double lambda = 1.0;  // sample generation probability per slot, (0, 1]
  double alpha = 1.0;   // AoI weight in the objective
};

struct StreamingParams {
  int w = 1;             // frame period in slots
  double ell = 1.0;      // deadline in periods; ignored when configurable
  bool ell_configurable = false;
  double beta = 1.0;     // outage weight
  double gamma = 0.0;    // delay-squared weight; must be > 0 when configurable
};

struct ClientSpec {
  std::string id;
  ClientKind kind = ClientKind::Sensing;
  GeChannelParams channel;
  SensingParams sensing;
  StreamingParams streaming;
};

struct AllocationProblem {
  std::vector<ClientSpec> clients;
  double delta = 0.0;           // margin on proper-subset constraints
  int64_t truncation = 1;      // lag cut for the full-set variance
  SecondOrderModel channel_full;  // mean/variance of the full channel set
};

// delta <= 0 means "use the default 1e-3 * m_full".
AllocationProblem make_problem(std::vector<ClientSpec> clients, double delta,
                               double truncation_tol);

struct AllocationSolution {
  DeliveryTargets targets;          // one entry per client, in problem order
  std::vector<double> delays;       // resolved ell per client (0 for sensing)
  double objective = 0.0;
  std::vector<ConstraintSlack> binding;  // constraints with |slack| <= 1e-6
};

struct InfeasibleProblem : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Weighted cost of running the system at the given targets: sum of
// alpha * AoI for sensing clients plus beta * outage + gamma * ell^2 for
// streaming clients.
double objective_value(const AllocationSolution& solution,
                       const AllocationProblem& problem);

// argmin over ell of beta * sigma_sq / (2 ell) + gamma * ell^2.
double optimal_delay(double sigma_sq, double beta, double gamma);

// Most violated nonempty proper subset S: sum_{n in S} mu_n > m_S - delta.
// Exact enumeration for N <= 20, greedy prefix sweep above. nullopt when no
// subset is violated.
std::optional<uint64_t> separation_oracle(std::span<const double> mu,
                                          std::span<const GeChannelParams> channels,
                                          double delta);

// Minimize the objective over delivery targets inside the delta-relaxed
// achievable region. Streaming means are pinned to 1/w; sensing means split
// the remaining channel budget; variances split the sqrt-variance budget.
// Throws InfeasibleProblem naming the violated constraint when no target
// vector exists.
AllocationSolution solve(const AllocationProblem& problem);

}  // namespace vwdsim
