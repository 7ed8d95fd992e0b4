#pragma once

// Independent reference computations used by the unit and acceptance tests.
// None of them call into the library's probability code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstddef>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

/// Monte-Carlo histogram of current-block deliveries: q backlog packets and s
/// new ones served by exponential(rate) for `horizon`, each delivered packet
/// erased with probability eps. Returns counts over 0..s.
inline std::vector<double> sampled_useful_counts(double rate, int q, int s, double horizon,
                                                 double eps, std::size_t reps,
                                                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> service(rate);
  std::bernoulli_distribution erase(eps);
  std::vector<double> hist(static_cast<std::size_t>(s) + 1, 0.0);
  for (std::size_t i = 0; i < reps; ++i) {
    double t = 0.0;
    int served = 0;
    while (served < q + s) {
      t += service(rng);
      if (t > horizon) break;
      ++served;
    }
    const int current = std::max(0, served - q);
    int useful = 0;
    for (int k = 0; k < current; ++k)
      if (!(eps > 0.0 && erase(rng))) ++useful;
    hist[static_cast<std::size_t>(useful)] += 1.0;
  }
  return hist;
}

/// Poisson pmf by direct log-space evaluation.
inline double poisson(int k, double mean) {
  if (mean == 0.0) return k == 0 ? 1.0 : 0.0;
  return std::exp(k * std::log(mean) - mean - std::lgamma(k + 1.0));
}

inline double binom(int n, int k) { return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)); }

/// P[sum_m X_m >= k] by brute-force enumeration of every combination.
inline double tail_by_enumeration(const std::vector<std::vector<double>>& pmfs, int k) {
  double total = 0.0;
  std::vector<std::size_t> idx(pmfs.size(), 0);
  while (true) {
    int sum = 0;
    double p = 1.0;
    for (std::size_t m = 0; m < pmfs.size(); ++m) {
      sum += static_cast<int>(idx[m]);
      p *= pmfs[m][idx[m]];
    }
    if (sum >= k) total += p;
    std::size_t m = 0;
    for (; m < pmfs.size(); ++m) {
      if (++idx[m] < pmfs[m].size()) break;
      idx[m] = 0;
    }
    if (m == pmfs.size()) return total;
  }
}

/// Dense (I - lambda T)^-1 r by Gaussian elimination with partial pivoting.
inline std::vector<double> solve_discounted(const std::vector<std::vector<double>>& t,
                                            const std::vector<double>& r, double lambda) {
  const std::size_t n = r.size();
  std::vector<std::vector<double>> a(n, std::vector<double>(n + 1));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) a[i][j] = (i == j ? 1.0 : 0.0) - lambda * t[i][j];
    a[i][n] = r[i];
  }
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t i = c + 1; i < n; ++i)
      if (std::abs(a[i][c]) > std::abs(a[piv][c])) piv = i;
    std::swap(a[c], a[piv]);
    for (std::size_t i = 0; i < n; ++i) {
      if (i == c) continue;
      const double f = a[i][c] / a[c][c];
      for (std::size_t j = c; j <= n; ++j) a[i][j] -= f * a[c][j];
    }
  }
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = a[i][n] / a[i][i];
  return v;
}

/// Stationary distribution by many squarings of the lazy chain.
inline std::vector<double> stationary_by_powers(std::vector<std::vector<double>> t) {
  const std::size_t n = t.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) t[i][j] *= 0.5;
    t[i][i] += 0.5;
  }
  for (int k = 0; k < 60; ++k) {
    std::vector<std::vector<double>> sq(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t l = 0; l < n; ++l)
        for (std::size_t j = 0; j < n; ++j) sq[i][j] += t[i][l] * t[l][j];
    // keep rows stochastic so round-off does not compound over the squarings
    for (auto& row : sq) {
      double total = 0.0;
      for (double x : row) total += x;
      for (double& x : row) x /= total;
    }
    t = std::move(sq);
  }
  return t[0];
}

}  // namespace oracle
