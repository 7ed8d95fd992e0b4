#pragma once

#include <array>
#include <optional>
#include <string_view>

#include "pqsched/mdp.hpp"
#include "pqsched/scenario.hpp"
#include "pqsched/solver.hpp"

// Two single-slot queues, one-packet blocks, no erasures, constant rates.
// States are ordered (0,0), (1,0), (0,1), (1,1) by queue occupancy.
namespace pqsched::small {

struct SmallSystem {
  double mu1 = 1.0;
  double mu2 = 1.0;
  double tau_g = 1.0;  ///< generation period
  double tau_d = 1.0;  ///< deadline

  /// Probability that a queued packet is still waiting after one period.
  double p(int m) const;
  /// Probability that a packet sent to an empty queue misses the deadline.
  double r(int m) const;
  void validate() const;
};

using Matrix4 = std::array<std::array<double, 4>, 4>;
using Vector4 = std::array<double, 4>;
using Action = std::array<int, 2>;

inline constexpr std::string_view labels = "ABCDEFGH";

/// Actions of a labelled policy in the four states. Throws InputError on an unknown label.
std::array<Action, 4> policy_actions(char label);

Matrix4 transition_matrix(const SmallSystem& sys, char label);
Vector4 reward_vector(const SmallSystem& sys, char label);

/// phi^T rho of the labelled policy, phi from the 4x4 chain.
double expected_reward(const SmallSystem& sys, char label);

/// Closed forms of the stationary expected reward for policies A and E.
double expected_reward_a(const SmallSystem& sys);
double expected_reward_e(const SmallSystem& sys);

struct SmallOptimum {
  char label = 'A';
  double reward = 0.0;
};

/// Best of the eight policies; ties go to the earliest label.
SmallOptimum optimal_policy(const SmallSystem& sys);

/// Smallest generation period for which A is optimal, for equal rates.
/// Throws UnsupportedError when mu1 != mu2.
double region_boundary(double mu1, double mu2, double tau_d);

/// The same system as a general scenario.
ScenarioConfig as_scenario(const SmallSystem& sys, double discount);

/// Labelled policy expressed over the action indices of `model`.
Policy policy_in_model(const MdpModel& model, char label);

/// Label of the policy, if it coincides with one of the eight.
std::optional<char> classify(const MdpModel& model, const Policy& policy);

}  // namespace pqsched::small
