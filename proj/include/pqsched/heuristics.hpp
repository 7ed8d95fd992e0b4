#pragma once

#include <functional>
#include <string>

#include "pqsched/mdp.hpp"
#include "pqsched/scenario.hpp"
#include "pqsched/solver.hpp"

namespace pqsched {

struct HeuristicConfig {
  double beta = 1.0;    ///< redundancy factor of the constant-rate split
  double gamma = 0.8;   ///< stability margin of the greedy rule
  double p_thr = 0.9;   ///< target delivery probability of the greedy rule

  void validate() const;
};

using PolicyRule = std::function<Schedule(const SystemState&)>;

/// Constant coding rate: N = round(beta K) packets split in proportion to the
/// current service rates with s_m = floor(mu_m N / mu + 1/2), each clipped to
/// the queue headroom. Totals above the scenario cap are trimmed from the
/// largest share; totals below K become a drop.
Schedule ccr_schedule(const SystemState& state, const ScenarioConfig& cfg, double beta);

/// Proportional split without redundancy.
Schedule ps_schedule(const SystemState& state, const ScenarioConfig& cfg);

/// Per-path ceiling on q_m + s_m imposed by the stability margin.
int stability_cap(const PathModel& path, PathState state, double gamma, double generation_period);

/// Adds one packet at a time to the path giving the highest delivery
/// probability, within the stability and headroom caps, until at least K
/// packets are scheduled and the probability reaches p_thr. Returns a drop when
/// fewer than K packets fit.
Schedule greedy_schedule(const SystemState& state, const ScenarioConfig& cfg,
                         const HeuristicConfig& h);

/// Evaluates `rule` in every state and maps the schedules to action indices.
/// Throws InputError if a schedule is not one of the model's actions.
Policy policy_from_rule(const MdpModel& model, const PolicyRule& rule, std::string provenance);

}  // namespace pqsched
