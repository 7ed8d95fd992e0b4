#include "pqsched/numeric.hpp"

#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>

namespace pqsched::numeric {

double poisson_pmf(std::size_t k, double mean) {
  if (mean <= 0.0) return k == 0 ? 1.0 : 0.0;
  // d/dx P(k+1, x) = x^k e^{-x} / k!
  return boost::math::gamma_p_derivative(static_cast<double>(k) + 1.0, mean);
}

double poisson_cdf(std::size_t k, double mean) {
  if (mean <= 0.0) return 1.0;
  return boost::math::gamma_q(static_cast<double>(k) + 1.0, mean);
}

double poisson_tail(std::size_t k, double mean) {
  if (k == 0) return 1.0;
  if (mean <= 0.0) return 0.0;
  return boost::math::gamma_p(static_cast<double>(k), mean);
}

std::vector<std::vector<double>> binomial_rows(std::size_t max_trials, double success) {
  const double failure = 1.0 - success;
  std::vector<std::vector<double>> rows(max_trials + 1);
  rows[0] = {1.0};
  for (std::size_t r = 1; r <= max_trials; ++r) {
    const auto& prev = rows[r - 1];
    auto& row = rows[r];
    row.assign(r + 1, 0.0);
    for (std::size_t x = 0; x < r; ++x) {
      row[x] += prev[x] * failure;
      row[x + 1] += prev[x] * success;
    }
  }
  return rows;
}

std::vector<double> convolve(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) return {};
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 0.0) continue;
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  }
  return out;
}

double tail_sum(std::span<const double> probs, std::size_t threshold) {
  double total = 0.0;
  for (std::size_t k = threshold; k < probs.size(); ++k) total += probs[k];
  return std::clamp(total, 0.0, 1.0);
}

}  // namespace pqsched::numeric
