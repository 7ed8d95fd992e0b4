#include "pqsched/scenario.hpp"

#include <cmath>
#include <numeric>

#include "pqsched/errors.hpp"

namespace pqsched {

void ScenarioConfig::validate() const {
  if (paths.empty()) throw InputError("scenario needs at least one path");
  for (const auto& p : paths) p.validate();
  if (block_size < 1) throw InputError("block_size must be at least 1");
  if (!(generation_period > 0.0) || !std::isfinite(generation_period))
    throw InputError("generation_period must be positive");
  if (!(deadline > 0.0) || !std::isfinite(deadline)) throw InputError("deadline must be positive");
  if (!(feedback_delay >= 0.0) || !std::isfinite(feedback_delay))
    throw InputError("feedback_delay must be non-negative");
  if (!(discount >= 0.0 && discount < 1.0)) throw InputError("discount must lie in [0, 1)");
  if (max_total && *max_total < block_size)
    throw InputError("max_total must be at least block_size");
  if (delayed() && feedback_delay > generation_period)
    throw UnsupportedError("delayed feedback requires feedback_delay <= generation_period");
  if (!delayed() && feedback_delay > 0.0)
    throw InputError("feedback_delay > 0 requires delayed feedback mode");
}

StateSpace::StateSpace(const std::vector<PathModel>& paths) {
  const std::size_t m_count = paths.size();
  local_sizes_.resize(m_count);
  strides_.resize(m_count);
  capacities_.resize(m_count);
  for (std::size_t m = 0; m < m_count; ++m) {
    capacities_[m] = paths[m].capacity;
    local_sizes_[m] = paths[m].channel_count() * static_cast<std::size_t>(paths[m].capacity + 1);
  }
  std::size_t stride = 1;
  for (std::size_t m = m_count; m-- > 0;) {
    strides_[m] = stride;
    stride *= local_sizes_[m];
  }
  size_ = m_count == 0 ? 0 : stride;
}

SystemState StateSpace::decode(std::size_t index) const {
  if (index >= size_) throw InputError("state index out of range");
  SystemState out{index, {}};
  out.paths.reserve(path_count());
  for (std::size_t m = 0; m < path_count(); ++m) out.paths.push_back(local_state(m, local_of(index, m)));
  return out;
}

std::size_t StateSpace::encode(std::span<const PathState> states) const {
  if (states.size() != path_count()) throw InputError("state has the wrong number of paths");
  std::size_t index = 0;
  for (std::size_t m = 0; m < path_count(); ++m) {
    const auto width = static_cast<std::size_t>(capacities_[m] + 1);
    if (states[m].queue < 0 || states[m].queue > capacities_[m] ||
        states[m].channel >= local_sizes_[m] / width)
      throw InputError("path state out of range");
    index += local_index(m, states[m]) * strides_[m];
  }
  return index;
}

std::vector<Schedule> enumerate_actions(const SystemState& state, const ScenarioConfig& cfg) {
  const std::size_t m_count = cfg.paths.size();
  if (state.paths.size() != m_count) throw InputError("state has the wrong number of paths");
  std::vector<int> headroom(m_count);
  for (std::size_t m = 0; m < m_count; ++m) {
    headroom[m] = cfg.paths[m].capacity - state.paths[m].queue;
    if (headroom[m] < 0) throw InputError("queue occupancy exceeds capacity");
  }

  std::vector<Schedule> out;
  out.emplace_back(m_count, 0);
  const int cap = cfg.total_cap();
  Schedule s(m_count, 0);
  int total = 0;
  while (true) {
    std::size_t m = 0;
    for (; m < m_count; ++m) {
      if (s[m] < headroom[m]) {
        ++s[m];
        ++total;
        break;
      }
      total -= s[m];
      s[m] = 0;
    }
    if (m == m_count) break;
    if (total >= cfg.block_size && total <= cap) out.push_back(s);
  }
  return out;
}

}  // namespace pqsched
