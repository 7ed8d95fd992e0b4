#pragma once

#include <cstddef>
#include <span>
#include <vector>

// Single-path and joint-path delivery statistics for FIFO queues with
// exponential service, Bernoulli erasures and Markov-modulated rates.
namespace pqsched {

/// One queue/channel pair. The service rate depends on the channel state,
/// which evolves once per block interval according to `channel_matrix`.
struct PathModel {
  std::vector<double> rates;                        ///< service rate per channel state
  std::vector<std::vector<double>> channel_matrix;  ///< row-stochastic, C x C
  double erasure = 0.0;                             ///< post-service loss probability
  int capacity = 0;                                 ///< max packets resident in the queue

  std::size_t channel_count() const noexcept { return rates.size(); }
  double rate(std::size_t channel) const;

  /// Throws InputError when a rate is not strictly positive, a row does not
  /// sum to one within 1e-12, the erasure is outside [0, 1] or the capacity is negative.
  void validate() const;

  /// Convenience constructor for a single-state path.
  static PathModel constant(double rate, int capacity, double erasure = 0.0);
};

struct PathState {
  std::size_t channel = 0;
  int queue = 0;

  friend bool operator==(const PathState&, const PathState&) = default;
};

/// Probability mass function over a packet count 0..size()-1.
class CountPmf {
 public:
  CountPmf() = default;
  explicit CountPmf(std::vector<double> probs);

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t x) const { return probs_[x]; }
  std::span<const double> probs() const noexcept { return probs_; }

  /// Running sums; the last entry is the total mass.
  std::vector<double> cdf() const;
  double total() const;

  friend bool operator==(const CountPmf&, const CountPmf&) = default;

 private:
  std::vector<double> probs_;
};

/// Distribution of the number of packets of the current block delivered by
/// `horizon`, after the `state.queue` backlog has been flushed. Support 0..scheduled.
CountPmf delivery_count_pmf(const PathModel& path, PathState state, int scheduled, double horizon);

/// Binomial erasure thinning of a delivery-count pmf.
CountPmf thin_erasures(const CountPmf& delivered, double erasure);

/// Distribution of useful (non-erased) current-block packets delivered by `horizon`.
CountPmf useful_delivery_pmf(const PathModel& path, PathState state, int scheduled, double horizon);

/// Every delivery vector n with n_m <= s_m and sum(n) >= block_size, in
/// order with the first path varying fastest. Empty iff sum(s) < block_size.
std::vector<std::vector<int>> decoding_set(std::span<const int> schedule, int block_size);

/// P[sum of independent counts >= block_size], by convolution then tail sum.
double block_delivery_prob(std::span<const CountPmf> useful, int block_size);

/// Same quantity by explicit summation over decoding_set(). Kept as a cross-check.
double block_delivery_prob_enumerated(std::span<const CountPmf> useful, int block_size);

/// Joint block delivery probability of a schedule issued in `states`.
double block_delivery_prob(std::span<const PathModel> paths, std::span<const PathState> states,
                           std::span<const int> schedule, int block_size, double horizon);

/// Delivery-count pmf when the sender only knows the state observed
/// `feedback_delay` ago: mixes over the channel transition out of the observed
/// channel and over the backlog packets flushed during the feedback delay.
CountPmf delayed_delivery_pmf(const PathModel& path, PathState observed, int scheduled,
                              double horizon, double feedback_delay);

/// Cumulative form of delayed_delivery_pmf().
std::vector<double> delayed_delivery_cdf(const PathModel& path, PathState observed, int scheduled,
                                         double horizon, double feedback_delay);

CountPmf delayed_useful_pmf(const PathModel& path, PathState observed, int scheduled,
                            double horizon, double feedback_delay);

/// Joint block delivery probability under delayed observation.
double delayed_block_delivery_prob(std::span<const PathModel> paths,
                                   std::span<const PathState> observed,
                                   std::span<const int> schedule, int block_size, double horizon,
                                   double feedback_delay);

/// Distribution of the queue length left after `horizon` when `queued`
/// packets are present and no arrivals happen, at a constant service rate.
/// Support 0..queued.
std::vector<double> residual_queue_pmf(int queued, double rate, double horizon);

/// Stationary distribution of a row-stochastic matrix (single recurrent class).
std::vector<double> channel_stationary(const std::vector<std::vector<double>>& matrix);

}  // namespace pqsched
