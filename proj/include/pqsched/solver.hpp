#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pqsched/mdp.hpp"

namespace pqsched {

struct Policy {
  std::vector<std::size_t> actions;  ///< action index per state
  std::string provenance;            ///< "optimal", a heuristic name, "table", ...
};

struct SolverOptions {
  std::size_t threads = 1;
  std::size_t dense_limit = 5000;   ///< direct solves up to this many states
  int max_iterations = 1000;        ///< policy iteration cap
  double sweep_tolerance = 1e-10;   ///< residual target of iterative evaluation
  double optimality_tolerance = 1e-9;
};

struct PolicyIterationResult {
  Policy policy;
  std::vector<double> values;
  int iterations = 0;  ///< number of improvement passes
};

/// Howard policy iteration from the all-zero-index policy. Ties in the
/// improvement step keep the lowest action index. Throws NumericalError when
/// the cap is reached or the result violates the optimality condition.
PolicyIterationResult policy_iteration(const DecisionProcess& mdp, const SolverOptions& opts = {});

/// R = (I - lambda T_pi)^-1 r_pi. `warm_start` seeds the iterative path.
std::vector<double> long_term_reward(const DecisionProcess& mdp, const Policy& policy,
                                     const SolverOptions& opts = {},
                                     std::span<const double> warm_start = {});

/// Largest one-step improvement max_a Q(x, a) - v(x) over all states.
double bellman_gap(const DecisionProcess& mdp, std::span<const double> values,
                   std::size_t threads = 1);

/// Stationary distribution of the chain induced by `policy`. Throws
/// ChainStructureError when the chain has several closed classes.
std::vector<double> stationary_distribution(const DecisionProcess& mdp, const Policy& policy,
                                            const SolverOptions& opts = {});

/// phi^T values.
double steady_state_reward(std::span<const double> phi, std::span<const double> values);

/// phi^T r_pi.
double average_reward(const DecisionProcess& mdp, const Policy& policy,
                      std::span<const double> phi);

/// Gamma(t) = phi^T rho(t) for every t in the ascending grid.
std::vector<double> latency_cdf(const MdpModel& model, const Policy& policy,
                                std::span<const double> phi, std::span<const double> grid,
                                std::size_t threads = 1);

struct PolicyEvaluation {
  std::vector<double> values;      ///< long-term discounted reward per state
  std::vector<double> stationary;  ///< phi
  double steady_state = 0.0;       ///< phi^T R
  double average = 0.0;            ///< phi^T r, equal to steady_state * (1 - lambda)
  double delivery = 0.0;           ///< Gamma(deadline)
  std::vector<double> grid;
  std::vector<double> cdf;
};

PolicyEvaluation evaluate_policy(const MdpModel& model, const Policy& policy,
                                 std::span<const double> grid = {}, const SolverOptions& opts = {},
                                 std::span<const double> warm_start = {});

/// Throws InputError unless the policy picks a valid action in every state.
void check_policy(const DecisionProcess& mdp, const Policy& policy);

}  // namespace pqsched
