#include "pqsched/analysis.hpp"

#include <algorithm>
#include <boost/math/distributions/exponential.hpp>
#include <boost/math/distributions/weibull.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <cstdio>

#include "pqsched/errors.hpp"
#include "pqsched/numeric.hpp"

namespace pqsched {

namespace {

void check_bound_args(std::span<const int> queues, std::span<const double> rates, int block_size,
                      double horizon) {
  if (queues.size() != rates.size()) throw InputError("one rate per queue is required");
  if (block_size < 1) throw InputError("block size must be at least 1");
  if (!(horizon >= 0.0)) throw InputError("horizon must be non-negative");
  for (int q : queues)
    if (q < 0) throw InputError("queue lengths must be non-negative");
  for (double r : rates)
    if (!(r >= 0.0)) throw InputError("effective rates must be non-negative");
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Distribution of X = Bin((N - q)^+, 1 - eps), N ~ Poisson(mean), truncated to 0..k-1.
std::vector<double> useful_beyond_backlog(int queue, double mean, double erasure, std::size_t k) {
  const auto q = static_cast<std::size_t>(queue);
  std::vector<double> pmf(k);
  if (erasure == 0.0) {
    pmf[0] = numeric::poisson_cdf(q, mean);
    for (std::size_t x = 1; x < k; ++x) pmf[x] = numeric::poisson_pmf(q + x, mean);
    return pmf;
  }
  // served-beyond-backlog counts far enough into the Poisson tail that the rest is below round-off
  const double reach = mean + 12.0 * std::sqrt(mean) + 40.0;
  const auto n_max = std::max(k, static_cast<std::size_t>(std::ceil(std::max(0.0, reach - queue))));
  std::vector<double> served(n_max + 1);
  served[0] = numeric::poisson_cdf(q, mean);
  double used = served[0];
  for (std::size_t n = 1; n < n_max; ++n) {
    served[n] = numeric::poisson_pmf(q + n, mean);
    used += served[n];
  }
  served[n_max] = std::max(0.0, 1.0 - used);
  const CountPmf useful = thin_erasures(CountPmf(std::move(served)), erasure);
  for (std::size_t x = 0; x < k; ++x) pmf[x] = useful[x];
  return pmf;
}

}  // namespace

double delivery_upper_bound(std::span<const int> queues, std::span<const double> rates,
                            std::span<const double> erasures, int block_size, double horizon) {
  check_bound_args(queues, rates, block_size, horizon);
  if (erasures.size() != queues.size()) throw InputError("one erasure probability per queue is required");
  for (double e : erasures)
    if (!(e >= 0.0 && e <= 1.0)) throw InputError("erasure probabilities must lie in [0, 1]");
  const auto k = static_cast<std::size_t>(block_size);
  // only counts below K matter for P[sum < K]
  std::vector<double> joint{1.0};
  for (std::size_t m = 0; m < queues.size(); ++m) {
    joint = numeric::convolve(joint, useful_beyond_backlog(queues[m], rates[m] * horizon, erasures[m], k));
    joint.resize(k);
  }
  double below = 0.0;
  for (double p : joint) below += p;
  return std::clamp(1.0 - below, 0.0, 1.0);
}

double delivery_upper_bound(std::span<const int> queues, std::span<const double> rates,
                            int block_size, double horizon) {
  const std::vector<double> none(queues.size(), 0.0);
  return delivery_upper_bound(queues, rates, none, block_size, horizon);
}

double delivery_upper_bound(const ScenarioConfig& cfg, const SystemState& state) {
  const std::size_t paths = cfg.paths.size();
  if (state.paths.size() != paths) throw InputError("state does not match the scenario");
  std::vector<int> queues(paths);
  std::vector<double> rates(paths), erasures(paths);
  for (std::size_t m = 0; m < paths; ++m) {
    queues[m] = state.paths[m].queue;
    rates[m] = cfg.paths[m].rate(state.paths[m].channel);
    erasures[m] = cfg.paths[m].erasure;
  }
  return delivery_upper_bound(queues, rates, erasures, cfg.block_size, cfg.deadline);
}

double delivery_upper_bound_series(std::span<const int> queues,
                                   std::span<const double> effective_rates, int block_size,
                                   double horizon) {
  check_bound_args(queues, effective_rates, block_size, horizon);
  if (queues.size() != 2) throw InputError("the series expression needs exactly two paths");
  // Q(a, x) = P[Poisson(x) <= a - 1]
  const auto upper = [](int a, double x) {
    return x > 0.0 ? boost::math::gamma_q(static_cast<double>(a), x) : 1.0;
  };
  const double m1 = effective_rates[0] * horizon, m2 = effective_rates[1] * horizon;
  const int q1 = queues[0], q2 = queues[1], k = block_size;
  return 1.0 - upper(q1 + q2 + k, m1 + m2) - upper(q1 + 1, m1) * upper(q2 + k, m2) -
         upper(q2 + 1, m2) * upper(q1 + k, m1);
}

std::vector<double> effective_rates(const ScenarioConfig& cfg, const SystemState& state) {
  std::vector<double> out(cfg.paths.size());
  for (std::size_t m = 0; m < out.size(); ++m)
    out[m] = cfg.paths[m].rate(state.paths[m].channel) * (1.0 - cfg.paths[m].erasure);
  return out;
}

double normalized_reliability(const MdpModel& model, std::size_t state, std::size_t action) {
  const double bound = delivery_upper_bound(model.config(), model.space().decode(state));
  if (!(bound > 0.0)) throw NumericalError("normalized reliability undefined: bound is zero");
  return model.reward(state, action) / bound;
}

Sustainability sustainability(std::span<const int> schedule, std::span<const double> effective_rates,
                              double generation_period) {
  if (schedule.size() != effective_rates.size()) throw InputError("one rate per path is required");
  Sustainability out;
  out.per_path.resize(schedule.size());
  for (std::size_t m = 0; m < schedule.size(); ++m) {
    if (schedule[m] < 0) throw InputError("scheduled counts must be non-negative");
    out.per_path[m] = numeric::poisson_tail(static_cast<std::size_t>(schedule[m]),
                                            effective_rates[m] * generation_period);
    out.total *= out.per_path[m];
  }
  return out;
}

Distribution Distribution::from_cdf(std::function<double(double)> cdf) {
  Distribution d;
  d.survival = [cdf](double x) { return 1.0 - cdf(x); };
  d.cdf = std::move(cdf);
  return d;
}

Distribution exponential_lifetime(double rate) {
  const boost::math::exponential_distribution<> dist(rate);
  Distribution d;
  d.cdf = [dist](double x) { return x <= 0.0 ? 0.0 : boost::math::cdf(dist, x); };
  d.survival = [dist](double x) { return x <= 0.0 ? 1.0 : boost::math::cdf(boost::math::complement(dist, x)); };
  return d;
}

Distribution weibull_lifetime(double shape, double scale) {
  const boost::math::weibull_distribution<> dist(shape, scale);
  Distribution d;
  d.cdf = [dist](double x) { return x <= 0.0 ? 0.0 : boost::math::cdf(dist, x); };
  d.survival = [dist](double x) { return x <= 0.0 ? 1.0 : boost::math::cdf(boost::math::complement(dist, x)); };
  return d;
}

double conditional_survival(const Distribution& dist, double y, double z) {
  const double alive = dist.survival(z);
  if (!(alive > 0.0)) throw InputError("conditional survival undefined: F(z) = 1");
  return dist.survival(y + z) / alive;
}

bool conditional_survival_non_increasing(const Distribution& dist, double y,
                                         std::span<const double> z_grid, double tolerance) {
  double previous = 0.0;
  for (std::size_t i = 0; i < z_grid.size(); ++i) {
    const double value = conditional_survival(dist, y, z_grid[i]);
    if (i > 0 && value > previous + tolerance) return false;
    previous = value;
  }
  return true;
}

PolicyHeatmaps extract_heatmaps(const MdpModel& model, const Policy& policy,
                                std::span<const double> stationary,
                                std::span<const std::size_t> channels, int bound) {
  check_policy(model, policy);
  const StateSpace& space = model.space();
  if (space.path_count() != 2) throw InputError("heatmaps need a two-path model");
  if (channels.size() != 2) throw InputError("one channel state per path is required");
  if (bound < 0 || bound > space.capacity(0) || bound > space.capacity(1))
    throw InputError("heatmap bound exceeds the queue capacity");
  if (stationary.size() != model.state_count()) throw InputError("stationary vector has wrong size");

  PolicyHeatmaps out;
  out.bound = bound;
  out.channels.assign(channels.begin(), channels.end());
  const auto cells = static_cast<std::size_t>(bound + 1);
  out.first_share.assign(cells, std::vector<double>(cells));
  out.redundancy.assign(cells, std::vector<double>(cells));
  out.probability.assign(cells, std::vector<double>(cells));
  const double k = model.config().block_size;
  for (std::size_t q1 = 0; q1 < cells; ++q1) {
    for (std::size_t q2 = 0; q2 < cells; ++q2) {
      const std::vector<PathState> ps{{channels[0], static_cast<int>(q1)},
                                      {channels[1], static_cast<int>(q2)}};
      const std::size_t x = space.encode(ps);
      const auto s = model.schedule(x, policy.actions[x]);
      const int total = s[0] + s[1];
      out.first_share[q1][q2] = total == 0 ? -1.0 : static_cast<double>(s[0]) / total;
      out.redundancy[q1][q2] = total == 0 ? -1.0 : total / k;
      out.probability[q1][q2] = stationary[x];
    }
  }
  return out;
}

std::string heatmap_csv(const std::vector<std::vector<double>>& grid) {
  std::string out = "q1/q2";
  const std::size_t cols = grid.empty() ? 0 : grid.front().size();
  for (std::size_t j = 0; j < cols; ++j) out += "," + std::to_string(j);
  out += "\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out += std::to_string(i);
    for (double v : grid[i]) out += "," + format_double(v);
    out += "\n";
  }
  return out;
}

PolicyEvaluation sensitivity_eval(const MdpModel& assumed, const Policy& policy,
                                  const MdpModel& truth, const SolverOptions& opts) {
  if (assumed.state_count() != truth.state_count() ||
      assumed.space().path_count() != truth.space().path_count())
    throw InputError("assumed and true models have different state spaces");
  for (std::size_t x = 0; x < assumed.state_count(); ++x) {
    if (assumed.action_count(x) != truth.action_count(x))
      throw InputError("assumed and true models have different action sets");
    for (std::size_t a = 0; a < assumed.action_count(x); ++a) {
      const auto sa = assumed.schedule(x, a), st = truth.schedule(x, a);
      if (!std::equal(sa.begin(), sa.end(), st.begin()))
        throw InputError("assumed and true models have different action sets");
    }
  }
  return evaluate_policy(truth, policy, {}, opts);
}

}  // namespace pqsched
