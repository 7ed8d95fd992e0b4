#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pqsched/queue_model.hpp"
#include "pqsched/scenario.hpp"

namespace pqsched {

/// Sparse probability vector over a state space.
struct SparseRow {
  std::vector<std::size_t> index;
  std::vector<double> prob;

  double total() const;
};

/// Finite discounted MDP as seen by the solver.
class DecisionProcess {
 public:
  virtual ~DecisionProcess() = default;

  virtual std::size_t state_count() const = 0;
  virtual std::size_t action_count(std::size_t state) const = 0;
  virtual double discount() const = 0;
  virtual double reward(std::size_t state, std::size_t action) const = 0;
  virtual SparseRow transition(std::size_t state, std::size_t action) const = 0;

  /// out[x][a] = sum_y T(x, y | a) v[y] for every state and action.
  virtual std::vector<std::vector<double>> expected_values(std::span<const double> v,
                                                           std::size_t threads) const;
  /// out = T_pi v.
  virtual void policy_step(std::span<const std::size_t> policy, std::span<const double> v,
                           std::span<double> out, std::size_t threads) const;
  /// out = phi^T T_pi.
  virtual void policy_step_transposed(std::span<const std::size_t> policy,
                                      std::span<const double> phi, std::span<double> out) const;
};

/// Row-by-row MDP, used for small hand-built and random models.
class ExplicitMdp final : public DecisionProcess {
 public:
  /// rows[x][a] and rewards[x][a]; validates that every row is stochastic.
  ExplicitMdp(std::vector<std::vector<SparseRow>> rows, std::vector<std::vector<double>> rewards,
              double discount);

  std::size_t state_count() const override { return rows_.size(); }
  std::size_t action_count(std::size_t state) const override { return rows_[state].size(); }
  double discount() const override { return discount_; }
  double reward(std::size_t state, std::size_t action) const override {
    return rewards_[state][action];
  }
  SparseRow transition(std::size_t state, std::size_t action) const override {
    return rows_[state][action];
  }

 private:
  std::vector<std::vector<SparseRow>> rows_;
  std::vector<std::vector<double>> rewards_;
  double discount_;
};

/// Next local state distribution of one path (index channel * (capacity + 1) + queue).
struct LocalKernel {
  std::vector<std::uint32_t> index;
  std::vector<double> prob;
};

/// One-interval transition of a single path from `state` after scheduling
/// `scheduled` packets. Entries below 1e-15 are pruned and the rest renormalized.
LocalKernel path_transition(const PathModel& path, PathState state, int scheduled,
                            const ScenarioConfig& cfg);

/// Full transition row over the joint state space.
SparseRow transition_row(const SystemState& state, std::span<const int> schedule,
                         const ScenarioConfig& cfg);

/// Block delivery probability by the deadline; the delayed-observation form in delayed mode.
double reward_of(const SystemState& state, std::span<const int> schedule,
                 const ScenarioConfig& cfg);

/// Same quantity at an arbitrary horizon.
double reward_at_horizon(const SystemState& state, std::span<const int> schedule,
                         const ScenarioConfig& cfg, double horizon);

inline constexpr std::size_t default_pair_budget = 10'000'000;

/// Materialized MDP of a scenario. Transitions are stored per path and
/// multiplied out on demand, which keeps memory linear in the number of paths.
class MdpModel final : public DecisionProcess {
 public:
  std::size_t state_count() const override { return space_.size(); }
  std::size_t action_count(std::size_t state) const override {
    return offsets_[state + 1] - offsets_[state];
  }
  double discount() const override { return cfg_.discount; }
  double reward(std::size_t state, std::size_t action) const override {
    return rewards_[offsets_[state] + action];
  }
  SparseRow transition(std::size_t state, std::size_t action) const override;

  std::vector<std::vector<double>> expected_values(std::span<const double> v,
                                                   std::size_t threads) const override;
  void policy_step(std::span<const std::size_t> policy, std::span<const double> v,
                   std::span<double> out, std::size_t threads) const override;
  void policy_step_transposed(std::span<const std::size_t> policy, std::span<const double> phi,
                              std::span<double> out) const override;

  const ScenarioConfig& config() const noexcept { return cfg_; }
  const StateSpace& space() const noexcept { return space_; }
  bool delayed() const noexcept { return cfg_.delayed(); }
  std::size_t pair_count() const noexcept { return rewards_.size(); }

  std::span<const int> schedule(std::size_t state, std::size_t action) const;
  std::optional<std::size_t> find_action(std::size_t state, std::span<const int> schedule) const;

  /// Reward of (state, action) recomputed at another horizon.
  double reward_at(std::size_t state, std::size_t action, double horizon) const;

  friend MdpModel build_model(const ScenarioConfig& cfg, std::size_t budget, std::size_t threads);

 private:
  std::size_t kernel_key(std::size_t m, PathState s, int scheduled) const;
  const LocalKernel& kernel(std::size_t m, std::size_t local, int scheduled) const;

  ScenarioConfig cfg_;
  StateSpace space_;
  std::vector<std::size_t> offsets_;  // state -> first pair
  std::vector<int> schedules_;        // pair-major, path_count ints each
  std::vector<double> rewards_;
  std::vector<std::vector<LocalKernel>> kernels_;  // [path][kernel_key]
};

/// Throws BudgetError when the number of (state, action) pairs exceeds `budget`.
MdpModel build_model(const ScenarioConfig& cfg, std::size_t budget = default_pair_budget,
                     std::size_t threads = 1);

}  // namespace pqsched
