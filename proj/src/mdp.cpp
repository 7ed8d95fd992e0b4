#include "pqsched/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "pqsched/errors.hpp"
#include "pqsched/parallel.hpp"

namespace pqsched {

namespace {

constexpr double prune_threshold = 1e-15;

void check_schedule(const SystemState& state, std::span<const int> schedule,
                    const ScenarioConfig& cfg) {
  if (schedule.size() != cfg.paths.size() || state.paths.size() != cfg.paths.size())
    throw InputError("schedule and state must have one entry per path");
  for (std::size_t m = 0; m < schedule.size(); ++m) {
    if (schedule[m] < 0) throw InputError("scheduled counts must be non-negative");
    if (state.paths[m].queue + schedule[m] > cfg.paths[m].capacity)
      throw InputError("schedule exceeds the queue headroom of path " + std::to_string(m));
  }
}

CountPmf useful_pmf(const PathModel& path, PathState state, int scheduled,
                    const ScenarioConfig& cfg, double horizon) {
  return cfg.delayed()
             ? delayed_useful_pmf(path, state, scheduled, horizon, cfg.feedback_delay)
             : useful_delivery_pmf(path, state, scheduled, horizon);
}

// Number of schedules with s_m <= headroom_m and block_size <= sum <= cap, plus the drop action.
std::size_t count_actions(std::span<const int> headroom, int block_size, int cap) {
  std::vector<std::size_t> ways(static_cast<std::size_t>(cap) + 1, 0);
  ways[0] = 1;
  for (int h : headroom) {
    std::vector<std::size_t> next(ways.size(), 0);
    for (std::size_t t = 0; t < ways.size(); ++t) {
      if (ways[t] == 0) continue;
      for (int s = 0; s <= h && t + static_cast<std::size_t>(s) < ways.size(); ++s)
        next[t + static_cast<std::size_t>(s)] += ways[t];
    }
    ways = std::move(next);
  }
  std::size_t count = 1;
  for (std::size_t t = static_cast<std::size_t>(block_size); t < ways.size(); ++t) count += ways[t];
  return count;
}

// Expands the product of per-path kernels over paths [0, last) into (prefix index, prob)
// pairs, where the prefix index counts in units of `unit`.
template <typename KernelOf>
void expand_prefix(std::size_t last, const StateSpace& space, std::size_t unit, KernelOf&& kernel_of,
                   std::vector<std::pair<std::size_t, double>>& out,
                   std::vector<std::pair<std::size_t, double>>& scratch) {
  out.clear();
  out.emplace_back(0, 1.0);
  for (std::size_t m = 0; m < last; ++m) {
    const LocalKernel& k = kernel_of(m);
    const std::size_t stride = space.stride(m) / unit;
    scratch.clear();
    for (const auto& [idx, p] : out)
      for (std::size_t j = 0; j < k.index.size(); ++j)
        scratch.emplace_back(idx + k.index[j] * stride, p * k.prob[j]);
    std::swap(out, scratch);
  }
}

}  // namespace

double SparseRow::total() const { return std::accumulate(prob.begin(), prob.end(), 0.0); }

// ---------------------------------------------------------------------------
// DecisionProcess defaults

std::vector<std::vector<double>> DecisionProcess::expected_values(std::span<const double> v,
                                                                  std::size_t threads) const {
  std::vector<std::vector<double>> out(state_count());
  parallel_for(state_count(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t x = begin; x < end; ++x) {
      out[x].resize(action_count(x));
      for (std::size_t a = 0; a < out[x].size(); ++a) {
        const SparseRow row = transition(x, a);
        double acc = 0.0;
        for (std::size_t j = 0; j < row.index.size(); ++j) acc += row.prob[j] * v[row.index[j]];
        out[x][a] = acc;
      }
    }
  });
  return out;
}

void DecisionProcess::policy_step(std::span<const std::size_t> policy, std::span<const double> v,
                                  std::span<double> out, std::size_t threads) const {
  parallel_for(state_count(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t x = begin; x < end; ++x) {
      const SparseRow row = transition(x, policy[x]);
      double acc = 0.0;
      for (std::size_t j = 0; j < row.index.size(); ++j) acc += row.prob[j] * v[row.index[j]];
      out[x] = acc;
    }
  });
}

void DecisionProcess::policy_step_transposed(std::span<const std::size_t> policy,
                                             std::span<const double> phi,
                                             std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t x = 0; x < state_count(); ++x) {
    if (phi[x] == 0.0) continue;
    const SparseRow row = transition(x, policy[x]);
    for (std::size_t j = 0; j < row.index.size(); ++j) out[row.index[j]] += phi[x] * row.prob[j];
  }
}

// ---------------------------------------------------------------------------
// ExplicitMdp

ExplicitMdp::ExplicitMdp(std::vector<std::vector<SparseRow>> rows,
                         std::vector<std::vector<double>> rewards, double discount)
    : rows_(std::move(rows)), rewards_(std::move(rewards)), discount_(discount) {
  if (!(discount_ >= 0.0 && discount_ < 1.0)) throw InputError("discount must lie in [0, 1)");
  if (rows_.size() != rewards_.size()) throw InputError("rows and rewards disagree on state count");
  const std::size_t n = rows_.size();
  for (std::size_t x = 0; x < n; ++x) {
    if (rows_[x].empty()) throw InputError("every state needs at least one action");
    if (rows_[x].size() != rewards_[x].size())
      throw InputError("rows and rewards disagree on action count");
    for (const auto& row : rows_[x]) {
      if (row.index.size() != row.prob.size()) throw InputError("malformed sparse row");
      for (std::size_t j = 0; j < row.index.size(); ++j)
        if (row.index[j] >= n || row.prob[j] < 0.0) throw InputError("malformed sparse row");
      if (std::abs(row.total() - 1.0) > 1e-10) throw InputError("transition rows must sum to 1");
    }
  }
}

// ---------------------------------------------------------------------------
// Scenario-level transitions and rewards

LocalKernel path_transition(const PathModel& path, PathState state, int scheduled,
                            const ScenarioConfig& cfg) {
  if (scheduled < 0 || state.queue < 0 || state.queue + scheduled > path.capacity)
    throw InputError("schedule exceeds the queue headroom");
  const auto width = static_cast<std::size_t>(path.capacity + 1);
  std::vector<double> dense(path.channel_count() * width, 0.0);
  const auto& row = path.channel_matrix.at(state.channel);

  if (!cfg.delayed()) {
    // the channel in force during the interval is the current one
    const auto left = residual_queue_pmf(state.queue + scheduled, path.rate(state.channel),
                                         cfg.generation_period);
    for (std::size_t next = 0; next < row.size(); ++next) {
      if (row[next] == 0.0) continue;
      for (std::size_t q = 0; q < left.size(); ++q) dense[next * width + q] += row[next] * left[q];
    }
  } else {
    if (cfg.feedback_delay > cfg.generation_period)
      throw UnsupportedError("delayed feedback requires feedback_delay <= generation_period");
    // backlog drained at the observed rate until the decision, then the new channel takes over
    const CountPmf flushed =
        delivery_count_pmf(path, PathState{state.channel, 0}, state.queue, cfg.feedback_delay);
    const double rest = cfg.generation_period - cfg.feedback_delay;
    for (std::size_t next = 0; next < row.size(); ++next) {
      if (row[next] == 0.0) continue;
      for (std::size_t r = 0; r < flushed.size(); ++r) {
        if (flushed[r] == 0.0) continue;
        const double weight = row[next] * flushed[r];
        const auto left =
            residual_queue_pmf(state.queue - static_cast<int>(r) + scheduled, path.rate(next), rest);
        for (std::size_t q = 0; q < left.size(); ++q) dense[next * width + q] += weight * left[q];
      }
    }
  }

  LocalKernel out;
  double kept = 0.0;
  for (std::size_t j = 0; j < dense.size(); ++j) {
    if (dense[j] < prune_threshold) continue;
    out.index.push_back(static_cast<std::uint32_t>(j));
    out.prob.push_back(dense[j]);
    kept += dense[j];
  }
  if (!(kept > 0.0)) throw NumericalError("path transition lost all probability mass");
  for (double& p : out.prob) p /= kept;
  return out;
}

SparseRow transition_row(const SystemState& state, std::span<const int> schedule,
                         const ScenarioConfig& cfg) {
  cfg.validate();
  check_schedule(state, schedule, cfg);
  const StateSpace space(cfg.paths);
  std::vector<std::pair<std::size_t, double>> acc{{0, 1.0}}, next;
  for (std::size_t m = 0; m < cfg.paths.size(); ++m) {
    const LocalKernel k = path_transition(cfg.paths[m], state.paths[m], schedule[m], cfg);
    next.clear();
    for (const auto& [idx, p] : acc)
      for (std::size_t j = 0; j < k.index.size(); ++j)
        next.emplace_back(idx + k.index[j] * space.stride(m), p * k.prob[j]);
    std::swap(acc, next);
  }
  SparseRow row;
  row.index.reserve(acc.size());
  row.prob.reserve(acc.size());
  for (const auto& [idx, p] : acc) {
    row.index.push_back(idx);
    row.prob.push_back(p);
  }
  return row;
}

double reward_at_horizon(const SystemState& state, std::span<const int> schedule,
                         const ScenarioConfig& cfg, double horizon) {
  check_schedule(state, schedule, cfg);
  std::vector<CountPmf> useful;
  useful.reserve(cfg.paths.size());
  for (std::size_t m = 0; m < cfg.paths.size(); ++m)
    useful.push_back(useful_pmf(cfg.paths[m], state.paths[m], schedule[m], cfg, horizon));
  return block_delivery_prob(useful, cfg.block_size);
}

double reward_of(const SystemState& state, std::span<const int> schedule,
                 const ScenarioConfig& cfg) {
  return reward_at_horizon(state, schedule, cfg, cfg.deadline);
}

// ---------------------------------------------------------------------------
// MdpModel

std::size_t MdpModel::kernel_key(std::size_t m, PathState s, int scheduled) const {
  const auto width = static_cast<std::size_t>(space_.capacity(m) + 1);
  return space_.local_index(m, s) * width + static_cast<std::size_t>(scheduled);
}

const LocalKernel& MdpModel::kernel(std::size_t m, std::size_t local, int scheduled) const {
  const auto width = static_cast<std::size_t>(space_.capacity(m) + 1);
  return kernels_[m][local * width + static_cast<std::size_t>(scheduled)];
}

std::span<const int> MdpModel::schedule(std::size_t state, std::size_t action) const {
  const std::size_t m_count = space_.path_count();
  return {schedules_.data() + (offsets_[state] + action) * m_count, m_count};
}

std::optional<std::size_t> MdpModel::find_action(std::size_t state,
                                                 std::span<const int> schedule_) const {
  if (state >= state_count() || schedule_.size() != space_.path_count()) return std::nullopt;
  for (std::size_t a = 0; a < action_count(state); ++a) {
    const auto s = schedule(state, a);
    if (std::equal(s.begin(), s.end(), schedule_.begin())) return a;
  }
  return std::nullopt;
}

double MdpModel::reward_at(std::size_t state, std::size_t action, double horizon) const {
  const auto s = schedule(state, action);
  return reward_at_horizon(space_.decode(state), s, cfg_, horizon);
}

SparseRow MdpModel::transition(std::size_t state, std::size_t action) const {
  const auto s = schedule(state, action);
  std::vector<std::pair<std::size_t, double>> acc, scratch;
  expand_prefix(
      space_.path_count(), space_, 1,
      [&](std::size_t m) -> const LocalKernel& { return kernel(m, space_.local_of(state, m), s[m]); },
      acc, scratch);
  SparseRow row;
  row.index.reserve(acc.size());
  row.prob.reserve(acc.size());
  for (const auto& [idx, p] : acc) {
    row.index.push_back(idx);
    row.prob.push_back(p);
  }
  return row;
}

std::vector<std::vector<double>> MdpModel::expected_values(std::span<const double> v,
                                                           std::size_t threads) const {
  const std::size_t m_count = space_.path_count();
  const std::size_t last = m_count - 1;
  const std::size_t n_last = space_.local_size(last);
  const std::size_t prefix = space_.size() / n_last;
  const auto& last_kernels = kernels_[last];

  // contraction of v against every kernel of the last path
  std::vector<std::vector<double>> partial(last_kernels.size());
  parallel_for(last_kernels.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t key = begin; key < end; ++key) {
      const LocalKernel& k = last_kernels[key];
      if (k.index.empty()) continue;
      auto& u = partial[key];
      u.assign(prefix, 0.0);
      for (std::size_t y = 0; y < prefix; ++y) {
        const double* base = v.data() + y * n_last;
        double acc = 0.0;
        for (std::size_t j = 0; j < k.index.size(); ++j) acc += k.prob[j] * base[k.index[j]];
        u[y] = acc;
      }
    }
  });

  std::vector<std::vector<double>> out(state_count());
  const auto width_last = static_cast<std::size_t>(space_.capacity(last) + 1);
  parallel_for(state_count(), threads, [&](std::size_t begin, std::size_t end) {
    std::vector<std::pair<std::size_t, double>> pre, scratch;
    for (std::size_t x = begin; x < end; ++x) {
      const std::size_t local_last = space_.local_of(x, last);
      out[x].resize(action_count(x));
      for (std::size_t a = 0; a < out[x].size(); ++a) {
        const auto s = schedule(x, a);
        expand_prefix(
            last, space_, n_last,
            [&](std::size_t m) -> const LocalKernel& { return kernel(m, space_.local_of(x, m), s[m]); },
            pre, scratch);
        const auto& u = partial[local_last * width_last + static_cast<std::size_t>(s[last])];
        double acc = 0.0;
        for (const auto& [y, p] : pre) acc += p * u[y];
        out[x][a] = acc;
      }
    }
  });
  return out;
}

void MdpModel::policy_step(std::span<const std::size_t> policy, std::span<const double> v,
                           std::span<double> out, std::size_t threads) const {
  parallel_for(state_count(), threads, [&](std::size_t begin, std::size_t end) {
    std::vector<std::pair<std::size_t, double>> acc, scratch;
    for (std::size_t x = begin; x < end; ++x) {
      const auto s = schedule(x, policy[x]);
      expand_prefix(
          space_.path_count(), space_, 1,
          [&](std::size_t m) -> const LocalKernel& { return kernel(m, space_.local_of(x, m), s[m]); },
          acc, scratch);
      double total = 0.0;
      for (const auto& [y, p] : acc) total += p * v[y];
      out[x] = total;
    }
  });
}

void MdpModel::policy_step_transposed(std::span<const std::size_t> policy,
                                      std::span<const double> phi, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  std::vector<std::pair<std::size_t, double>> acc, scratch;
  for (std::size_t x = 0; x < state_count(); ++x) {
    if (phi[x] == 0.0) continue;
    const auto s = schedule(x, policy[x]);
    expand_prefix(
        space_.path_count(), space_, 1,
        [&](std::size_t m) -> const LocalKernel& { return kernel(m, space_.local_of(x, m), s[m]); },
        acc, scratch);
    for (const auto& [y, p] : acc) out[y] += phi[x] * p;
  }
}

MdpModel build_model(const ScenarioConfig& cfg, std::size_t budget, std::size_t threads) {
  cfg.validate();
  MdpModel model;
  model.cfg_ = cfg;
  model.space_ = StateSpace(cfg.paths);
  const StateSpace& space = model.space_;
  const std::size_t m_count = cfg.paths.size();
  const std::size_t n_states = space.size();
  if (n_states > budget) throw BudgetError(n_states, budget, true);

  // count pairs before materializing anything
  const int cap = cfg.total_cap();
  std::vector<std::size_t> counts(n_states);
  parallel_for(n_states, threads, [&](std::size_t begin, std::size_t end) {
    std::vector<int> headroom(m_count);
    for (std::size_t x = begin; x < end; ++x) {
      for (std::size_t m = 0; m < m_count; ++m)
        headroom[m] = space.capacity(m) - space.local_state(m, space.local_of(x, m)).queue;
      counts[x] = count_actions(headroom, cfg.block_size, cap);
    }
  });
  model.offsets_.assign(n_states + 1, 0);
  for (std::size_t x = 0; x < n_states; ++x) model.offsets_[x + 1] = model.offsets_[x] + counts[x];
  const std::size_t pairs = model.offsets_.back();
  if (pairs > budget) throw BudgetError(pairs, budget);

  // per-path kernels and useful-delivery pmfs, keyed by (local state, scheduled)
  model.kernels_.resize(m_count);
  std::vector<std::vector<CountPmf>> useful(m_count);
  for (std::size_t m = 0; m < m_count; ++m) {
    const PathModel& path = cfg.paths[m];
    const auto width = static_cast<std::size_t>(path.capacity + 1);
    const std::size_t keys = space.local_size(m) * width;
    model.kernels_[m].resize(keys);
    useful[m].resize(keys);
    parallel_for(space.local_size(m), threads, [&](std::size_t begin, std::size_t end) {
      for (std::size_t local = begin; local < end; ++local) {
        const PathState ps = space.local_state(m, local);
        const int top = std::min(path.capacity - ps.queue, cap);
        for (int s = 0; s <= top; ++s) {
          const std::size_t key = local * width + static_cast<std::size_t>(s);
          model.kernels_[m][key] = path_transition(path, ps, s, cfg);
          useful[m][key] = useful_pmf(path, ps, s, cfg, cfg.deadline);
        }
      }
    });
  }

  model.schedules_.resize(pairs * m_count);
  model.rewards_.resize(pairs);
  parallel_for(n_states, threads, [&](std::size_t begin, std::size_t end) {
    std::vector<CountPmf> per_path(m_count);
    for (std::size_t x = begin; x < end; ++x) {
      const SystemState state = space.decode(x);
      const auto actions = enumerate_actions(state, cfg);
      if (actions.size() != counts[x]) throw NumericalError("action count mismatch");
      for (std::size_t a = 0; a < actions.size(); ++a) {
        const std::size_t pair = model.offsets_[x] + a;
        std::copy(actions[a].begin(), actions[a].end(), model.schedules_.begin() + pair * m_count);
        for (std::size_t m = 0; m < m_count; ++m)
          per_path[m] = useful[m][model.kernel_key(m, state.paths[m], actions[a][m])];
        model.rewards_[pair] = block_delivery_prob(per_path, cfg.block_size);
      }
    }
  });
  return model;
}

}  // namespace pqsched
