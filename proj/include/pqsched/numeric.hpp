#pragma once

#include <cstddef>
#include <span>
#include <vector>

// Poisson and binomial primitives shared by the queue model, the diagnostics
// and the tests. Tail masses go through regularized incomplete gamma functions
// so that counts in the hundreds stay accurate.
namespace pqsched::numeric {

/// P[X = k] for X ~ Poisson(mean).
double poisson_pmf(std::size_t k, double mean);

/// P[X <= k].
double poisson_cdf(std::size_t k, double mean);

/// P[X >= k]; equals 1 for k = 0.
double poisson_tail(std::size_t k, double mean);

/// Distribution of Binomial(trials, success) for every trials in [0, max_trials],
/// built by the stable two-term recurrence. Row r has r + 1 entries.
std::vector<std::vector<double>> binomial_rows(std::size_t max_trials, double success);

/// Full linear convolution of two probability vectors.
std::vector<double> convolve(std::span<const double> a, std::span<const double> b);

/// Sum of probs[k] for k >= threshold, clamped to [0, 1].
double tail_sum(std::span<const double> probs, std::size_t threshold);

}  // namespace pqsched::numeric
