#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pqsched/mdp.hpp"
#include "pqsched/solver.hpp"

namespace pqsched {

/// Probability that K useful packets get through when the schedule is unbounded:
/// P[X_1 + ... + X_M >= K], X_m the erasure-thinned count of packets served by
/// `horizon` at rate mu_m beyond the q_m backlog.
double delivery_upper_bound(std::span<const int> queues, std::span<const double> rates,
                            std::span<const double> erasures, int block_size, double horizon);

/// Erasure-free form.
double delivery_upper_bound(std::span<const int> queues, std::span<const double> rates,
                            int block_size, double horizon);

/// Bound at the deadline for a state of the scenario.
double delivery_upper_bound(const ScenarioConfig& cfg, const SystemState& state);

/// Two-path series expression in effective rates mu_m (1 - eps_m). It drops the
/// joint both-zero correction and so undershoots when a queue is empty, and it
/// is not a bound with erasures behind a backlog; kept for comparison.
double delivery_upper_bound_series(std::span<const int> queues,
                                   std::span<const double> effective_rates, int block_size,
                                   double horizon);

/// Effective rates mu_{m, c_m} (1 - eps_m) in the given state.
std::vector<double> effective_rates(const ScenarioConfig& cfg, const SystemState& state);

/// rho / rho* for (state, action) of the model, at the deadline.
/// Throws NumericalError when rho* is zero.
double normalized_reliability(const MdpModel& model, std::size_t state, std::size_t action);

struct Sustainability {
  double total = 1.0;
  std::vector<double> per_path;
};

/// zeta_m = P[Poisson(mu'_m tau_g) >= s_m] (1 for s_m = 0) and their product.
Sustainability sustainability(std::span<const int> schedule, std::span<const double> effective_rates,
                              double generation_period);

/// Lifetime distribution handle. `survival` is 1 - cdf, computed directly where
/// the family allows it so far tails keep their relative accuracy.
struct Distribution {
  std::function<double(double)> cdf;
  std::function<double(double)> survival;

  static Distribution from_cdf(std::function<double(double)> cdf);
};

Distribution exponential_lifetime(double rate);
Distribution weibull_lifetime(double shape, double scale);

/// (1 - F(y + z)) / (1 - F(z)): survival for y more time units after z elapsed.
/// Throws InputError when F(z) = 1.
double conditional_survival(const Distribution& dist, double y, double z);

/// True when the conditional survival is non-increasing over the ascending grid of z.
bool conditional_survival_non_increasing(const Distribution& dist, double y,
                                         std::span<const double> z_grid, double tolerance = 1e-12);

/// Per-cell policy metrics over the (q1, q2) grid of a two-path model at fixed channels.
/// Drop cells hold -1 in `first_share` and `redundancy`.
struct PolicyHeatmaps {
  int bound = 0;                        ///< cells 0..bound on each axis
  std::vector<std::size_t> channels;    ///< fixed channel state per path
  std::vector<std::vector<double>> first_share;  ///< s1 / (s1 + s2)
  std::vector<std::vector<double>> redundancy;   ///< N / K
  std::vector<std::vector<double>> probability;  ///< stationary probability
};

PolicyHeatmaps extract_heatmaps(const MdpModel& model, const Policy& policy,
                                std::span<const double> stationary,
                                std::span<const std::size_t> channels, int bound);

/// CSV with header "q1/q2,0,1,..." and one row per q1.
std::string heatmap_csv(const std::vector<std::vector<double>>& grid);

/// Evaluates a policy computed on `assumed` against the dynamics of `truth`.
/// Both models must share states and action lists.
PolicyEvaluation sensitivity_eval(const MdpModel& assumed, const Policy& policy,
                                  const MdpModel& truth, const SolverOptions& opts = {});

}  // namespace pqsched
