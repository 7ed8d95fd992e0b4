#include "pqsched/solver.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pqsched/errors.hpp"
#include "pqsched/parallel.hpp"

namespace pqsched {

namespace {

constexpr int max_sweeps = 1'000'000;
constexpr double stationary_tolerance = 1e-13;

double max_abs(std::span<const double> v) {
  double out = 0.0;
  for (double x : v) out = std::max(out, std::abs(x));
  return out;
}

// Recurrent classes of the chain: strongly connected components with no exit.
// Returns one representative per closed class, in discovery order.
std::vector<std::size_t> closed_class_representatives(const DecisionProcess& mdp,
                                                      const Policy& policy) {
  const std::size_t n = mdp.state_count();
  std::vector<std::vector<std::size_t>> succ(n);
  for (std::size_t x = 0; x < n; ++x) {
    const SparseRow row = mdp.transition(x, policy.actions[x]);
    for (std::size_t j = 0; j < row.index.size(); ++j)
      if (row.prob[j] > 0.0) succ[x].push_back(row.index[j]);
  }

  // iterative Tarjan
  constexpr std::size_t unvisited = static_cast<std::size_t>(-1);
  std::vector<std::size_t> index(n, unvisited), low(n, 0), comp(n, unvisited);
  std::vector<bool> on_stack(n, false);
  std::vector<std::size_t> stack;
  std::vector<std::pair<std::size_t, std::size_t>> call;  // (state, next successor slot)
  std::size_t counter = 0, n_comp = 0;
  std::vector<std::size_t> comp_root;
  for (std::size_t root = 0; root < n; ++root) {
    if (index[root] != unvisited) continue;
    call.emplace_back(root, 0);
    while (!call.empty()) {
      auto& [v, slot] = call.back();
      if (slot == 0 && index[v] == unvisited) {
        index[v] = low[v] = counter++;
        stack.push_back(v);
        on_stack[v] = true;
      }
      if (slot < succ[v].size()) {
        const std::size_t w = succ[v][slot++];
        if (index[w] == unvisited) {
          call.emplace_back(w, 0);
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
        continue;
      }
      if (low[v] == index[v]) {
        std::size_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          comp[w] = n_comp;
        } while (w != v);
        comp_root.push_back(v);
        ++n_comp;
      }
      const std::size_t finished = v;
      call.pop_back();
      if (!call.empty()) {
        const std::size_t parent = call.back().first;
        low[parent] = std::min(low[parent], low[finished]);
      }
    }
  }

  std::vector<bool> closed(n_comp, true);
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y : succ[x])
      if (comp[y] != comp[x]) closed[comp[x]] = false;
  std::vector<std::size_t> reps;
  std::vector<bool> seen(n_comp, false);
  for (std::size_t x = 0; x < n; ++x) {
    const std::size_t c = comp[x];
    if (closed[c] && !seen[c]) {
      seen[c] = true;
      reps.push_back(x);
    }
  }
  return reps;
}

Eigen::MatrixXd dense_policy_matrix(const DecisionProcess& mdp, const Policy& policy) {
  const auto n = static_cast<Eigen::Index>(mdp.state_count());
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index x = 0; x < n; ++x) {
    const SparseRow row = mdp.transition(static_cast<std::size_t>(x), policy.actions[static_cast<std::size_t>(x)]);
    for (std::size_t j = 0; j < row.index.size(); ++j)
      t(x, static_cast<Eigen::Index>(row.index[j])) += row.prob[j];
  }
  return t;
}

std::vector<double> policy_rewards(const DecisionProcess& mdp, const Policy& policy) {
  std::vector<double> r(mdp.state_count());
  for (std::size_t x = 0; x < r.size(); ++x) r[x] = mdp.reward(x, policy.actions[x]);
  return r;
}

}  // namespace

void check_policy(const DecisionProcess& mdp, const Policy& policy) {
  if (policy.actions.size() != mdp.state_count())
    throw InputError("policy must assign an action to every state");
  for (std::size_t x = 0; x < policy.actions.size(); ++x)
    if (policy.actions[x] >= mdp.action_count(x))
      throw InputError("policy picks an invalid action in state " + std::to_string(x));
}

std::vector<double> long_term_reward(const DecisionProcess& mdp, const Policy& policy,
                                     const SolverOptions& opts,
                                     std::span<const double> warm_start) {
  check_policy(mdp, policy);
  const std::size_t n = mdp.state_count();
  const double lambda = mdp.discount();
  const std::vector<double> r = policy_rewards(mdp, policy);

  if (n <= opts.dense_limit) {
    Eigen::MatrixXd a = -lambda * dense_policy_matrix(mdp, policy);
    a.diagonal().array() += 1.0;
    const Eigen::Map<const Eigen::VectorXd> b(r.data(), static_cast<Eigen::Index>(n));
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    const Eigen::VectorXd v = lu.solve(b);
    if (!v.allFinite()) throw NumericalError("policy evaluation produced non-finite values");
    return {v.data(), v.data() + n};
  }

  std::vector<double> v(n), next(n);
  if (warm_start.size() == n)
    std::copy(warm_start.begin(), warm_start.end(), v.begin());
  else
    v = r;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    mdp.policy_step(policy.actions, v, next, opts.threads);
    double residual = 0.0;
    for (std::size_t x = 0; x < n; ++x) {
      next[x] = r[x] + lambda * next[x];
      residual = std::max(residual, std::abs(next[x] - v[x]));
    }
    std::swap(v, next);
    if (residual <= opts.sweep_tolerance) return v;
  }
  throw NumericalError("iterative policy evaluation did not reach the residual target");
}

double bellman_gap(const DecisionProcess& mdp, std::span<const double> values,
                   std::size_t threads) {
  const auto ev = mdp.expected_values(values, threads);
  const double lambda = mdp.discount();
  double gap = -std::numeric_limits<double>::infinity();
  for (std::size_t x = 0; x < mdp.state_count(); ++x) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < ev[x].size(); ++a)
      best = std::max(best, mdp.reward(x, a) + lambda * ev[x][a]);
    gap = std::max(gap, best - values[x]);
  }
  return gap;
}

PolicyIterationResult policy_iteration(const DecisionProcess& mdp, const SolverOptions& opts) {
  const std::size_t n = mdp.state_count();
  const double lambda = mdp.discount();
  if (!(lambda >= 0.0 && lambda < 1.0)) throw InputError("discount must lie in [0, 1)");
  PolicyIterationResult out;
  out.policy.actions.assign(n, 0);
  out.policy.provenance = "optimal";

  for (int iter = 1; iter <= opts.max_iterations; ++iter) {
    out.values = long_term_reward(mdp, out.policy, opts, out.values);
    const auto ev = mdp.expected_values(out.values, opts.threads);
    bool changed = false;
    for (std::size_t x = 0; x < n; ++x) {
      const std::size_t k = ev[x].size();
      std::vector<double> q(k);
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < k; ++a) {
        q[a] = mdp.reward(x, a) + lambda * ev[x][a];
        best = std::max(best, q[a]);
      }
      // differences below round-off are ties
      const double tie = 1e-11 * (1.0 + std::abs(best));
      const std::size_t current = out.policy.actions[x];
      if (q[current] >= best - tie) continue;
      std::size_t pick = 0;
      while (q[pick] < best - tie) ++pick;
      out.policy.actions[x] = pick;
      changed = true;
    }
    if (!changed) {
      out.iterations = iter;
      const double gap = bellman_gap(mdp, out.values, opts.threads);
      const double scale = std::max(1.0, max_abs(out.values));
      if (gap > opts.optimality_tolerance * scale)
        throw NumericalError("policy iteration stopped with Bellman gap " + std::to_string(gap));
      return out;
    }
  }
  throw NumericalError("policy iteration did not converge within " +
                       std::to_string(opts.max_iterations) + " iterations");
}

std::vector<double> stationary_distribution(const DecisionProcess& mdp, const Policy& policy,
                                            const SolverOptions& opts) {
  check_policy(mdp, policy);
  const auto reps = closed_class_representatives(mdp, policy);
  if (reps.size() > 1) throw ChainStructureError(reps[0], reps[1]);
  const std::size_t n = mdp.state_count();

  std::vector<double> phi(n);
  if (n <= opts.dense_limit) {
    const auto size = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd a = dense_policy_matrix(mdp, policy).transpose();
    a.diagonal().array() -= 1.0;
    a.row(size - 1).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(size);
    b(size - 1) = 1.0;
    const Eigen::VectorXd x = Eigen::PartialPivLU<Eigen::MatrixXd>(a).solve(b);
    if (!x.allFinite()) throw NumericalError("stationary solve produced non-finite values");
    for (std::size_t i = 0; i < n; ++i) phi[i] = std::max(0.0, x(static_cast<Eigen::Index>(i)));
  } else {
    // power iteration on the lazy chain (I + T) / 2, which has the same fixed point
    std::fill(phi.begin(), phi.end(), 1.0 / static_cast<double>(n));
    std::vector<double> next(n);
    bool done = false;
    for (int sweep = 0; sweep < max_sweeps && !done; ++sweep) {
      mdp.policy_step_transposed(policy.actions, phi, next);
      double change = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double updated = 0.5 * (phi[i] + next[i]);
        change += std::abs(updated - phi[i]);
        phi[i] = updated;
      }
      done = change <= stationary_tolerance;
    }
    if (!done) throw NumericalError("stationary power iteration did not converge");
  }
  const double total = std::accumulate(phi.begin(), phi.end(), 0.0);
  if (!(total > 0.0)) throw NumericalError("stationary distribution has no mass");
  for (double& p : phi) p /= total;
  return phi;
}

double steady_state_reward(std::span<const double> phi, std::span<const double> values) {
  if (phi.size() != values.size()) throw InputError("phi and values differ in length");
  double acc = 0.0;
  for (std::size_t i = 0; i < phi.size(); ++i) acc += phi[i] * values[i];
  return acc;
}

double average_reward(const DecisionProcess& mdp, const Policy& policy,
                      std::span<const double> phi) {
  check_policy(mdp, policy);
  double acc = 0.0;
  for (std::size_t x = 0; x < phi.size(); ++x) acc += phi[x] * mdp.reward(x, policy.actions[x]);
  return acc;
}

std::vector<double> latency_cdf(const MdpModel& model, const Policy& policy,
                                std::span<const double> phi, std::span<const double> grid,
                                std::size_t threads) {
  check_policy(model, policy);
  if (!std::is_sorted(grid.begin(), grid.end())) throw InputError("latency grid must be ascending");
  std::vector<double> out(grid.size(), 0.0);
  parallel_for(grid.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t g = begin; g < end; ++g) {
      double acc = 0.0;
      for (std::size_t x = 0; x < phi.size(); ++x) {
        if (phi[x] == 0.0) continue;
        acc += phi[x] * model.reward_at(x, policy.actions[x], grid[g]);
      }
      out[g] = std::clamp(acc, 0.0, 1.0);
    }
  });
  return out;
}

PolicyEvaluation evaluate_policy(const MdpModel& model, const Policy& policy,
                                 std::span<const double> grid, const SolverOptions& opts,
                                 std::span<const double> warm_start) {
  PolicyEvaluation out;
  out.values = long_term_reward(model, policy, opts, warm_start);
  out.stationary = stationary_distribution(model, policy, opts);
  out.steady_state = steady_state_reward(out.stationary, out.values);
  out.average = average_reward(model, policy, out.stationary);
  const double deadline = model.config().deadline;
  out.delivery = latency_cdf(model, policy, out.stationary, std::span<const double>(&deadline, 1))[0];
  out.grid.assign(grid.begin(), grid.end());
  out.cdf = latency_cdf(model, policy, out.stationary, grid, opts.threads);
  return out;
}

}  // namespace pqsched
