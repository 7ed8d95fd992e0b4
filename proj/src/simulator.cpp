#include "pqsched/simulator.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <random>

#include "pqsched/errors.hpp"
#include "pqsched/parallel.hpp"

namespace pqsched {

namespace {

constexpr std::size_t batch_count = 32;
constexpr double never = std::numeric_limits<double>::infinity();

std::size_t draw_index(std::mt19937_64& rng, const std::vector<double>& probs) {
  if (probs.size() == 1) return 0;
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return probs.size() - 1;
}

struct ReplicationResult {
  std::vector<char> delivered;       // per measured block
  std::vector<double> latency;       // per measured block, infinity if never complete
  std::vector<std::size_t> visits;   // per state index
};

ReplicationResult simulate_once(const SimConfig& cfg, const StateSpace& space,
                                const std::vector<Schedule>& table, std::uint64_t seed) {
  const ScenarioConfig& sc = cfg.scenario;
  const std::size_t m_count = sc.paths.size();
  const double tau_g = sc.generation_period;
  double horizon = sc.deadline;
  for (double t : cfg.cdf_grid) horizon = std::max(horizon, t);
  // extra arrivals so that every measured block is resolved up to the largest horizon
  const auto tail = static_cast<std::size_t>(std::ceil(horizon / tau_g)) + 1;
  const std::size_t total = cfg.blocks + tail;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  std::vector<std::deque<std::size_t>> queue(m_count);
  std::vector<std::size_t> channel(m_count);   // channel of the previous interval
  std::vector<int> snapshot(m_count, 0);       // queue length feedback_delay before the decision
  for (std::size_t m = 0; m < m_count; ++m)
    channel[m] = draw_index(rng, channel_stationary(sc.paths[m].channel_matrix));

  std::vector<int> useful(total, 0);
  std::vector<double> done(total, never);
  ReplicationResult out;
  out.visits.assign(space.size(), 0);

  std::vector<std::size_t> current(m_count);
  for (std::size_t i = 0; i < total; ++i) {
    const double t = static_cast<double>(i) * tau_g;
    for (std::size_t m = 0; m < m_count; ++m)
      current[m] = draw_index(rng, sc.paths[m].channel_matrix[channel[m]]);

    std::size_t observed = 0;
    for (std::size_t m = 0; m < m_count; ++m) {
      const PathState ps = sc.delayed()
                               ? PathState{channel[m], snapshot[m]}
                               : PathState{current[m], static_cast<int>(queue[m].size())};
      observed += space.local_index(m, ps) * space.stride(m);
    }
    const bool measured = i >= cfg.warmup && i < cfg.blocks;
    if (measured) ++out.visits[observed];

    const Schedule& s = table[observed];
    for (std::size_t m = 0; m < m_count; ++m) {
      for (int k = 0; k < s[m]; ++k) queue[m].push_back(i);
      if (static_cast<int>(queue[m].size()) > sc.paths[m].capacity)
        throw NumericalError("simulated queue exceeds its capacity");
    }

    for (std::size_t m = 0; m < m_count; ++m) {
      const PathModel& path = sc.paths[m];
      std::exponential_distribution<double> service(path.rate(current[m]));
      const double end = t + tau_g;
      const double snap_time = end - sc.feedback_delay;
      bool taken = false;
      double u = t;
      while (!queue[m].empty()) {
        const double next = u + service(rng);
        if (next >= end) break;  // memoryless: the residual is redrawn next interval
        u = next;
        if (!taken && u > snap_time) {
          snapshot[m] = static_cast<int>(queue[m].size());
          taken = true;
        }
        const std::size_t b = queue[m].front();
        queue[m].pop_front();
        const bool erased = path.erasure > 0.0 && uniform(rng) < path.erasure;
        if (!erased && ++useful[b] == sc.block_size) done[b] = u;
      }
      if (!taken) snapshot[m] = static_cast<int>(queue[m].size());
      assert(static_cast<int>(queue[m].size()) <= path.capacity);
      channel[m] = current[m];
    }
  }

  for (std::size_t i = cfg.warmup; i < cfg.blocks; ++i) {
    const double latency = done[i] - static_cast<double>(i) * tau_g;
    out.latency.push_back(latency);
    out.delivered.push_back(latency <= sc.deadline ? 1 : 0);
  }
  return out;
}

}  // namespace

void SimConfig::validate() const {
  scenario.validate();
  if (!(blocks > warmup)) throw InputError("blocks must exceed warmup");
  if (replications < 1) throw InputError("replications must be at least 1");
  if (!std::is_sorted(cdf_grid.begin(), cdf_grid.end()))
    throw InputError("cdf grid must be ascending");
  for (double t : cdf_grid)
    if (!(t >= 0.0) || !std::isfinite(t)) throw InputError("cdf grid must be finite and non-negative");
}

std::uint64_t replication_seed(std::uint64_t master, std::size_t index) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(index) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<Schedule> schedule_table(const ScenarioConfig& cfg, const PolicyRule& rule) {
  const StateSpace space(cfg.paths);
  std::vector<Schedule> out(space.size());
  for (std::size_t x = 0; x < space.size(); ++x) out[x] = rule(space.decode(x));
  return out;
}

std::vector<Schedule> schedule_table(const MdpModel& model, const Policy& policy) {
  check_policy(model, policy);
  std::vector<Schedule> out(model.state_count());
  for (std::size_t x = 0; x < out.size(); ++x) {
    const auto s = model.schedule(x, policy.actions[x]);
    out[x].assign(s.begin(), s.end());
  }
  return out;
}

SimReport run_simulation(const SimConfig& cfg, const std::vector<Schedule>& table) {
  cfg.validate();
  const StateSpace space(cfg.scenario.paths);
  if (table.size() != space.size()) throw InputError("policy table must cover every state");
  for (std::size_t x = 0; x < table.size(); ++x) {
    const SystemState st = space.decode(x);
    if (table[x].size() != cfg.scenario.paths.size())
      throw InputError("policy table entry has the wrong number of paths");
    for (std::size_t m = 0; m < table[x].size(); ++m)
      if (table[x][m] < 0 || st.paths[m].queue + table[x][m] > cfg.scenario.paths[m].capacity)
        throw InputError("policy table exceeds the queue headroom in state " + std::to_string(x));
  }

  std::vector<ReplicationResult> runs(cfg.replications);
  parallel_for(cfg.replications, cfg.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r)
      runs[r] = simulate_once(cfg, space, table, replication_seed(cfg.seed, r));
  });

  SimReport report;
  report.seed = cfg.seed;
  report.cdf_grid = cfg.cdf_grid;
  report.cdf.assign(cfg.cdf_grid.size(), 0.0);
  report.visits.assign(space.size(), 0.0);
  std::size_t measured = 0;
  for (const auto& run : runs) {
    const auto n = run.delivered.size();
    const auto hits = std::accumulate(run.delivered.begin(), run.delivered.end(), std::size_t{0});
    report.success.push_back(static_cast<double>(hits) / static_cast<double>(n));
    for (std::size_t g = 0; g < cfg.cdf_grid.size(); ++g)
      report.cdf[g] += static_cast<double>(std::count_if(
          run.latency.begin(), run.latency.end(), [&](double l) { return l <= cfg.cdf_grid[g]; }));
    for (std::size_t x = 0; x < space.size(); ++x)
      report.visits[x] += static_cast<double>(run.visits[x]);
    measured += n;
  }
  report.measured_blocks = measured;
  for (double& c : report.cdf) c /= static_cast<double>(measured);
  for (double& v : report.visits) v /= static_cast<double>(measured);

  const auto mean_var = [](const std::vector<double>& xs) {
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return std::pair{mean, ss / static_cast<double>(xs.size() - 1)};
  };
  if (cfg.replications > 1) {
    const auto [mean, var] = mean_var(report.success);
    report.success_mean = mean;
    report.standard_error = std::sqrt(var / static_cast<double>(cfg.replications));
  } else {
    const auto& d = runs.front().delivered;
    const std::size_t per = d.size() / batch_count;
    report.success_mean = report.success.front();
    if (per > 0) {
      std::vector<double> batches(batch_count);
      for (std::size_t b = 0; b < batch_count; ++b)
        batches[b] = static_cast<double>(std::accumulate(d.begin() + static_cast<std::ptrdiff_t>(b * per),
                                                         d.begin() + static_cast<std::ptrdiff_t>((b + 1) * per),
                                                         std::size_t{0})) /
                     static_cast<double>(per);
      report.standard_error = std::sqrt(mean_var(batches).second / static_cast<double>(batch_count));
    }
  }
  report.half_width = 1.959963984540054 * report.standard_error;
  return report;
}

SimReport run_simulation(const SimConfig& cfg, const PolicyRule& rule) {
  return run_simulation(cfg, schedule_table(cfg.scenario, rule));
}

void to_json(nlohmann::json& j, const SimReport& r) {
  j = nlohmann::json{{"success_mean", r.success_mean},
                     {"standard_error", r.standard_error},
                     {"half_width_95", r.half_width},
                     {"replication_success", r.success},
                     {"measured_blocks", r.measured_blocks},
                     {"seed", r.seed},
                     {"cdf_grid", r.cdf_grid},
                     {"cdf", r.cdf},
                     {"state_visits", r.visits}};
}

}  // namespace pqsched
