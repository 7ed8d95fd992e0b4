#include "pqsched/queue_model.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numeric>
#include <string>

#include "pqsched/errors.hpp"
#include "pqsched/numeric.hpp"

namespace pqsched {

namespace {

void check_count(int value, const char* what) {
  if (value < 0) throw InputError(std::string(what) + " must be non-negative");
}

void check_time(double value, const char* what) {
  if (!(value >= 0.0) || !std::isfinite(value))
    throw InputError(std::string(what) + " must be a finite non-negative time");
}

void check_sizes(std::size_t paths, std::size_t states, std::size_t schedule) {
  if (paths != states || paths != schedule)
    throw InputError("paths, states and schedule must have the same length");
}

}  // namespace

double PathModel::rate(std::size_t channel) const {
  if (channel >= rates.size()) throw InputError("channel state out of range");
  return rates[channel];
}

void PathModel::validate() const {
  if (rates.empty()) throw InputError("path needs at least one channel state");
  for (double r : rates)
    if (!(r > 0.0) || !std::isfinite(r)) throw InputError("service rates must be strictly positive");
  if (channel_matrix.size() != rates.size())
    throw InputError("channel matrix must be C x C with C the number of rates");
  for (const auto& row : channel_matrix) {
    if (row.size() != rates.size())
      throw InputError("channel matrix must be C x C with C the number of rates");
    double sum = 0.0;
    for (double p : row) {
      if (!(p >= 0.0) || p > 1.0) throw InputError("channel matrix entries must lie in [0, 1]");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw InputError("channel matrix rows must sum to 1");
  }
  if (!(erasure >= 0.0 && erasure <= 1.0)) throw InputError("erasure probability must lie in [0, 1]");
  if (capacity < 0) throw InputError("queue capacity must be non-negative");
}

PathModel PathModel::constant(double rate, int capacity, double erasure) {
  return PathModel{{rate}, {{1.0}}, erasure, capacity};
}

CountPmf::CountPmf(std::vector<double> probs) : probs_(std::move(probs)) {}

std::vector<double> CountPmf::cdf() const {
  std::vector<double> out(probs_.size());
  std::partial_sum(probs_.begin(), probs_.end(), out.begin());
  return out;
}

double CountPmf::total() const { return std::accumulate(probs_.begin(), probs_.end(), 0.0); }

CountPmf delivery_count_pmf(const PathModel& path, PathState state, int scheduled, double horizon) {
  check_count(scheduled, "scheduled count");
  check_count(state.queue, "queue occupancy");
  check_time(horizon, "horizon");
  if (scheduled == 0) return CountPmf({1.0});

  const double mean = path.rate(state.channel) * horizon;
  const auto backlog = static_cast<std::size_t>(state.queue);
  const auto s = static_cast<std::size_t>(scheduled);
  std::vector<double> probs(s + 1);
  probs[0] = numeric::poisson_cdf(backlog, mean);
  for (std::size_t x = 1; x < s; ++x) probs[x] = numeric::poisson_pmf(backlog + x, mean);
  probs[s] = numeric::poisson_tail(backlog + s, mean);
  return CountPmf(std::move(probs));
}

CountPmf thin_erasures(const CountPmf& delivered, double erasure) {
  if (!(erasure >= 0.0 && erasure <= 1.0)) throw InputError("erasure probability must lie in [0, 1]");
  if (erasure == 0.0 || delivered.size() == 0) return delivered;
  const std::size_t n = delivered.size() - 1;
  const auto binom = numeric::binomial_rows(n, 1.0 - erasure);
  std::vector<double> out(n + 1, 0.0);
  for (std::size_t r = 0; r <= n; ++r) {
    const double weight = delivered[r];
    if (weight == 0.0) continue;
    for (std::size_t x = 0; x <= r; ++x) out[x] += weight * binom[r][x];
  }
  return CountPmf(std::move(out));
}

CountPmf useful_delivery_pmf(const PathModel& path, PathState state, int scheduled, double horizon) {
  return thin_erasures(delivery_count_pmf(path, state, scheduled, horizon), path.erasure);
}

std::vector<std::vector<int>> decoding_set(std::span<const int> schedule, int block_size) {
  if (block_size < 1) throw InputError("block size must be at least 1");
  for (int s : schedule) check_count(s, "scheduled count");
  std::vector<std::vector<int>> out;
  if (std::accumulate(schedule.begin(), schedule.end(), 0) < block_size) return out;

  std::vector<int> n(schedule.size(), 0);
  while (true) {
    if (std::accumulate(n.begin(), n.end(), 0) >= block_size) out.push_back(n);
    // odometer increment, first coordinate fastest
    std::size_t m = 0;
    for (; m < n.size(); ++m) {
      if (n[m] < schedule[m]) {
        ++n[m];
        break;
      }
      n[m] = 0;
    }
    if (m == n.size()) return out;
  }
}

double block_delivery_prob(std::span<const CountPmf> useful, int block_size) {
  if (block_size < 1) throw InputError("block size must be at least 1");
  std::vector<double> joint{1.0};
  for (const auto& pmf : useful) joint = numeric::convolve(joint, pmf.probs());
  return numeric::tail_sum(joint, static_cast<std::size_t>(block_size));
}

double block_delivery_prob_enumerated(std::span<const CountPmf> useful, int block_size) {
  std::vector<int> schedule;
  schedule.reserve(useful.size());
  for (const auto& pmf : useful) schedule.push_back(static_cast<int>(pmf.size()) - 1);
  double total = 0.0;
  for (const auto& n : decoding_set(schedule, block_size)) {
    double term = 1.0;
    for (std::size_t m = 0; m < n.size(); ++m) term *= useful[m][static_cast<std::size_t>(n[m])];
    total += term;
  }
  return total;
}

double block_delivery_prob(std::span<const PathModel> paths, std::span<const PathState> states,
                           std::span<const int> schedule, int block_size, double horizon) {
  check_sizes(paths.size(), states.size(), schedule.size());
  std::vector<CountPmf> useful;
  useful.reserve(paths.size());
  for (std::size_t m = 0; m < paths.size(); ++m)
    useful.push_back(useful_delivery_pmf(paths[m], states[m], schedule[m], horizon));
  return block_delivery_prob(useful, block_size);
}

CountPmf delayed_delivery_pmf(const PathModel& path, PathState observed, int scheduled,
                              double horizon, double feedback_delay) {
  check_count(scheduled, "scheduled count");
  check_count(observed.queue, "queue occupancy");
  check_time(horizon, "horizon");
  check_time(feedback_delay, "feedback delay");
  if (observed.channel >= path.channel_count()) throw InputError("channel state out of range");

  // packets of the observed backlog flushed while the feedback was in flight
  const CountPmf flushed =
      delivery_count_pmf(path, PathState{observed.channel, 0}, observed.queue, feedback_delay);
  const auto& row = path.channel_matrix[observed.channel];

  std::vector<double> mix(static_cast<std::size_t>(scheduled) + 1, 0.0);
  for (std::size_t next = 0; next < row.size(); ++next) {
    if (row[next] == 0.0) continue;
    for (std::size_t r = 0; r < flushed.size(); ++r) {
      if (flushed[r] == 0.0) continue;
      const double weight = row[next] * flushed[r];
      const PathState actual{next, observed.queue - static_cast<int>(r)};
      const CountPmf pmf = delivery_count_pmf(path, actual, scheduled, horizon);
      for (std::size_t x = 0; x < mix.size(); ++x) mix[x] += weight * pmf[x];
    }
  }
  return CountPmf(std::move(mix));
}

std::vector<double> delayed_delivery_cdf(const PathModel& path, PathState observed, int scheduled,
                                         double horizon, double feedback_delay) {
  return delayed_delivery_pmf(path, observed, scheduled, horizon, feedback_delay).cdf();
}

CountPmf delayed_useful_pmf(const PathModel& path, PathState observed, int scheduled,
                            double horizon, double feedback_delay) {
  return thin_erasures(delayed_delivery_pmf(path, observed, scheduled, horizon, feedback_delay),
                       path.erasure);
}

double delayed_block_delivery_prob(std::span<const PathModel> paths,
                                   std::span<const PathState> observed,
                                   std::span<const int> schedule, int block_size, double horizon,
                                   double feedback_delay) {
  check_sizes(paths.size(), observed.size(), schedule.size());
  std::vector<CountPmf> useful;
  useful.reserve(paths.size());
  for (std::size_t m = 0; m < paths.size(); ++m)
    useful.push_back(
        delayed_useful_pmf(paths[m], observed[m], schedule[m], horizon, feedback_delay));
  return block_delivery_prob(useful, block_size);
}

std::vector<double> residual_queue_pmf(int queued, double rate, double horizon) {
  check_count(queued, "queued packets");
  check_time(horizon, "horizon");
  const auto n = static_cast<std::size_t>(queued);
  const double mean = rate * horizon;
  std::vector<double> out(n + 1, 0.0);
  // k completions leave n - k packets; n or more completions empty the queue
  for (std::size_t k = 0; k < n; ++k) out[n - k] = numeric::poisson_pmf(k, mean);
  out[0] = numeric::poisson_tail(n, mean);
  return out;
}

std::vector<double> channel_stationary(const std::vector<std::vector<double>>& matrix) {
  const auto c = static_cast<Eigen::Index>(matrix.size());
  if (c == 0) throw InputError("empty channel matrix");
  if (c == 1) return {1.0};
  Eigen::MatrixXd a(c, c);
  for (Eigen::Index i = 0; i < c; ++i)
    for (Eigen::Index j = 0; j < c; ++j)
      a(j, i) = matrix[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] - (i == j ? 1.0 : 0.0);
  a.row(c - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(c);
  b(c - 1) = 1.0;
  const auto lu = a.fullPivLu();
  if (lu.rank() < c) throw NumericalError("channel matrix has more than one closed class");
  const Eigen::VectorXd phi = lu.solve(b);
  return {phi.data(), phi.data() + c};
}

}  // namespace pqsched
