#include "pqsched/heuristics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pqsched/errors.hpp"
#include "pqsched/parallel.hpp"

namespace pqsched {

void HeuristicConfig::validate() const {
  if (!(beta >= 1.0 && beta <= 2.0)) throw InputError("beta must lie in [1, 2]");
  if (!(gamma > 0.0 && gamma < 1.0)) throw InputError("gamma must lie in (0, 1)");
  if (!(p_thr > 0.0 && p_thr <= 1.0)) throw InputError("p_thr must lie in (0, 1]");
}

Schedule ccr_schedule(const SystemState& state, const ScenarioConfig& cfg, double beta) {
  if (!(beta >= 1.0)) throw InputError("beta must be at least 1");
  const std::size_t m_count = cfg.paths.size();
  const auto n = static_cast<double>(std::lround(beta * cfg.block_size));
  double total_rate = 0.0;
  for (std::size_t m = 0; m < m_count; ++m)
    total_rate += cfg.paths[m].rate(state.paths[m].channel);

  Schedule s(m_count, 0);
  for (std::size_t m = 0; m < m_count; ++m) {
    const double share = cfg.paths[m].rate(state.paths[m].channel) * n / total_rate;
    const int headroom = cfg.paths[m].capacity - state.paths[m].queue;
    s[m] = std::clamp(static_cast<int>(std::floor(share + 0.5)), 0, headroom);
  }
  int total = std::accumulate(s.begin(), s.end(), 0);
  while (total > cfg.total_cap()) {
    const auto largest = std::max_element(s.begin(), s.end());
    --*largest;
    --total;
  }
  if (total < cfg.block_size) std::fill(s.begin(), s.end(), 0);
  return s;
}

Schedule ps_schedule(const SystemState& state, const ScenarioConfig& cfg) {
  return ccr_schedule(state, cfg, 1.0);
}

int stability_cap(const PathModel& path, PathState state, double gamma, double generation_period) {
  return static_cast<int>(std::floor(gamma * generation_period * path.rate(state.channel)));
}

Schedule greedy_schedule(const SystemState& state, const ScenarioConfig& cfg,
                         const HeuristicConfig& h) {
  const std::size_t m_count = cfg.paths.size();
  std::vector<int> ceiling(m_count);
  for (std::size_t m = 0; m < m_count; ++m) {
    const PathModel& path = cfg.paths[m];
    ceiling[m] = std::min(path.capacity,
                          stability_cap(path, state.paths[m], h.gamma, cfg.generation_period));
  }

  Schedule s(m_count, 0);
  int total = 0;
  double rho = 0.0;
  while (total < cfg.total_cap()) {
    std::size_t pick = m_count;
    double pick_rho = -1.0;
    for (std::size_t m = 0; m < m_count; ++m) {
      if (state.paths[m].queue + s[m] + 1 > ceiling[m]) continue;
      ++s[m];
      const double candidate = reward_of(state, s, cfg);
      --s[m];
      if (pick == m_count) {
        pick = m;
        pick_rho = candidate;
        continue;
      }
      const double tie = 1e-12 * std::max(1.0, std::abs(pick_rho));
      if (candidate > pick_rho + tie) {
        pick = m;
        pick_rho = candidate;
      } else if (candidate >= pick_rho - tie &&
                 state.paths[m].queue + s[m] < state.paths[pick].queue + s[pick]) {
        // equal gain: prefer the less loaded queue, then the lower index
        pick = m;
        pick_rho = candidate;
      }
    }
    if (pick == m_count) break;
    ++s[pick];
    ++total;
    rho = pick_rho;
    if (total >= cfg.block_size && rho >= h.p_thr) break;
  }
  if (total < cfg.block_size) std::fill(s.begin(), s.end(), 0);
  return s;
}

Policy policy_from_rule(const MdpModel& model, const PolicyRule& rule, std::string provenance) {
  Policy out{std::vector<std::size_t>(model.state_count()), std::move(provenance)};
  const StateSpace& space = model.space();
  for (std::size_t x = 0; x < model.state_count(); ++x) {
    const Schedule s = rule(space.decode(x));
    const auto a = model.find_action(x, s);
    if (!a) throw InputError("rule produced a schedule outside the action set of state " +
                             std::to_string(x));
    out.actions[x] = *a;
  }
  return out;
}

}  // namespace pqsched
