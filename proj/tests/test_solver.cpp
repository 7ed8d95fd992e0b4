#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "pqsched/analytic_small.hpp"
#include "pqsched/errors.hpp"
#include "pqsched/solver.hpp"

using namespace pqsched;

namespace {

struct RandomMdp {
  std::vector<std::vector<std::vector<double>>> t;  // [state][action][next]
  std::vector<std::vector<double>> r;
  double lambda;

  ExplicitMdp build() const {
    std::vector<std::vector<SparseRow>> rows(t.size());
    for (std::size_t x = 0; x < t.size(); ++x)
      for (const auto& dense : t[x]) {
        SparseRow row;
        for (std::size_t y = 0; y < dense.size(); ++y)
          if (dense[y] > 0.0) {
            row.index.push_back(y);
            row.prob.push_back(dense[y]);
          }
        rows[x].push_back(row);
      }
    return ExplicitMdp(rows, r, lambda);
  }

  std::vector<double> value_of(const std::vector<std::size_t>& pol) const {
    std::vector<std::vector<double>> tp;
    std::vector<double> rp;
    for (std::size_t x = 0; x < t.size(); ++x) {
      tp.push_back(t[x][pol[x]]);
      rp.push_back(r[x][pol[x]]);
    }
    return oracle::solve_discounted(tp, rp, lambda);
  }
};

RandomMdp random_mdp(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t n = 2 + static_cast<std::size_t>(u(rng) * 5);  // 2..6
  RandomMdp out;
  out.lambda = u(rng) < 0.2 ? 0.0 : 0.99 * u(rng);
  out.t.resize(n);
  out.r.resize(n);
  for (std::size_t x = 0; x < n; ++x) {
    const std::size_t k = 1 + static_cast<std::size_t>(u(rng) * 4);  // 1..4
    for (std::size_t a = 0; a < k; ++a) {
      std::vector<double> row(n);
      double total = 0.0;
      for (double& p : row) {
        p = u(rng) < 0.4 ? 0.0 : u(rng);
        total += p;
      }
      if (total == 0.0) {
        row[static_cast<std::size_t>(u(rng) * n)] = 1.0;
        total = 1.0;
      }
      for (double& p : row) p /= total;
      out.t[x].push_back(row);
      out.r[x].push_back(u(rng));
    }
  }
  return out;
}

}  // namespace

TEST_CASE("policy iteration matches exhaustive enumeration") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 60; ++trial) {
    const RandomMdp m = random_mdp(rng);
    const ExplicitMdp mdp = m.build();
    const auto result = policy_iteration(mdp);
    CHECK(result.iterations <= 100);

    // every deterministic policy
    const std::size_t n = m.t.size();
    std::vector<std::size_t> pol(n, 0);
    std::vector<double> best(n, -1.0);
    while (true) {
      const auto v = m.value_of(pol);
      for (std::size_t x = 0; x < n; ++x) best[x] = std::max(best[x], v[x]);
      std::size_t x = 0;
      for (; x < n; ++x) {
        if (++pol[x] < m.t[x].size()) break;
        pol[x] = 0;
      }
      if (x == n) break;
    }
    for (std::size_t x = 0; x < n; ++x) CHECK(std::abs(result.values[x] - best[x]) <= 1e-9);

    for (int k = 0; k < 100; ++k) {
      std::vector<std::size_t> other(n);
      for (std::size_t x = 0; x < n; ++x) other[x] = static_cast<std::size_t>(u(rng) * m.t[x].size());
      const auto v = m.value_of(other);
      for (std::size_t x = 0; x < n; ++x) CHECK(result.values[x] >= v[x] - 1e-9);
    }
  }
}

TEST_CASE("long-term reward special cases") {
  std::mt19937_64 rng(8);
  RandomMdp m = random_mdp(rng);
  for (auto& rs : m.r)
    for (double& r : rs) r = 0.37;
  m.lambda = 0.9;
  const auto mdp = m.build();
  const Policy p{std::vector<std::size_t>(m.t.size(), 0), "test"};
  for (double v : long_term_reward(mdp, p)) CHECK(v == doctest::Approx(0.37 / 0.1).epsilon(1e-12));

  m = random_mdp(rng);
  m.lambda = 0.0;
  const auto mdp0 = m.build();
  const Policy p0{std::vector<std::size_t>(m.t.size(), 0), "test"};
  const auto v0 = long_term_reward(mdp0, p0);
  for (std::size_t x = 0; x < v0.size(); ++x) CHECK(v0[x] == doctest::Approx(m.r[x][0]).epsilon(1e-14));
}

TEST_CASE("single action per state converges in one pass") {
  std::vector<std::vector<SparseRow>> rows{{SparseRow{{1}, {1.0}}}, {SparseRow{{0, 1}, {0.5, 0.5}}}};
  const ExplicitMdp mdp(rows, {{0.2}, {0.7}}, 0.8);
  const auto result = policy_iteration(mdp);
  CHECK(result.iterations == 1);
  CHECK(result.policy.actions == std::vector<std::size_t>{0, 0});
}

TEST_CASE("small system under policy A") {
  const small::SmallSystem sys{1.0, 1.0, 1.0, 1.0};
  const auto model = build_model(small::as_scenario(sys, 0.9));
  const Policy a = small::policy_in_model(model, 'A');

  // hand-built chain in the small state order, mapped to model indices
  const double p = std::exp(-1.0), r = std::exp(-1.0);
  const std::vector<std::vector<double>> t{
      {(1 - p) * (1 - p), p * (1 - p), p * (1 - p), p * p},
      {(1 - p) * (1 - p), p * (1 - p), p * (1 - p), p * p},
      {(1 - p) * (1 - p), p * (1 - p), p * (1 - p), p * p},
      {(1 - p) * (1 - p), p * (1 - p), p * (1 - p), p * p}};
  const std::vector<double> rho{1 - r * r, 1 - r, 1 - r, 0.0};
  const auto ref = oracle::solve_discounted(t, rho, 0.9);
  const std::size_t order[4] = {0, 2, 1, 3};
  const auto v = long_term_reward(model, a);
  for (int k = 0; k < 4; ++k) CHECK(v[order[k]] == doctest::Approx(ref[k]).epsilon(1e-12));

  const auto phi = stationary_distribution(model, a);
  const double expect[4] = {(1 - p) * (1 - p), p * (1 - p), p * (1 - p), p * p};
  for (int k = 0; k < 4; ++k) CHECK(phi[order[k]] == doctest::Approx(expect[k]).epsilon(1e-12));
}

TEST_CASE("stationary distribution properties") {
  SUBCASE("uniform rows") {
    std::vector<std::vector<SparseRow>> rows(3, {SparseRow{{0, 1, 2}, {1.0 / 3, 1.0 / 3, 1.0 / 3}}});
    const ExplicitMdp mdp(rows, {{0.0}, {0.0}, {0.0}}, 0.5);
    for (double x : stationary_distribution(mdp, Policy{{0, 0, 0}, "t"}))
      CHECK(x == doctest::Approx(1.0 / 3).epsilon(1e-14));
  }
  SUBCASE("two closed classes are reported") {
    std::vector<std::vector<SparseRow>> rows{
        {SparseRow{{0}, {1.0}}}, {SparseRow{{0, 2}, {0.5, 0.5}}}, {SparseRow{{2}, {1.0}}}};
    const ExplicitMdp mdp(rows, {{0.0}, {0.0}, {0.0}}, 0.5);
    try {
      (void)stationary_distribution(mdp, Policy{{0, 0, 0}, "t"});
      FAIL("expected a chain structure error");
    } catch (const ChainStructureError& e) {
      CHECK(e.first_state() == 0);
      CHECK(e.second_state() == 2);
    }
  }
  SUBCASE("fixed point on random chains, dense and iterative") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 20; ++trial) {
      RandomMdp m = random_mdp(rng);
      for (auto& rows : m.t)
        for (auto& row : rows) {
          for (double& x : row) x += 0.01;  // irreducible
          double total = 0.0;
          for (double x : row) total += x;
          for (double& x : row) x /= total;
        }
      const auto mdp = m.build();
      const Policy p{std::vector<std::size_t>(m.t.size(), 0), "t"};
      SolverOptions iterative;
      iterative.dense_limit = 1;
      const auto dense = stationary_distribution(mdp, p);
      const auto power = stationary_distribution(mdp, p, iterative);
      std::vector<std::vector<double>> tp;
      for (const auto& rows : m.t) tp.push_back(rows[0]);
      const auto ref = oracle::stationary_by_powers(tp);
      std::vector<double> moved(dense.size());
      mdp.policy_step_transposed(p.actions, dense, moved);
      double total = 0.0;
      for (std::size_t x = 0; x < dense.size(); ++x) {
        CHECK(dense[x] >= 0.0);
        total += dense[x];
        CHECK(std::abs(moved[x] - dense[x]) <= 1e-10);
        CHECK(std::abs(dense[x] - ref[x]) <= 1e-10);
        CHECK(std::abs(power[x] - ref[x]) <= 1e-10);
      }
      CHECK(std::abs(total - 1.0) <= 1e-10);
    }
  }
}

TEST_CASE("iterative evaluation agrees with the direct solve") {
  ScenarioConfig cfg;
  cfg.paths = {PathModel{{1.2, 0.6}, {{0.9, 0.1}, {0.3, 0.7}}, 0.1, 4}, PathModel::constant(0.9, 4)};
  cfg.block_size = 2;
  cfg.generation_period = 2.0;
  cfg.deadline = 2.5;
  cfg.discount = 0.95;
  const auto model = build_model(cfg);
  SolverOptions iterative;
  iterative.dense_limit = 1;
  const auto exact = policy_iteration(model);
  const auto approx = policy_iteration(model, iterative);
  CHECK(exact.policy.actions == approx.policy.actions);
  for (std::size_t x = 0; x < exact.values.size(); ++x)
    CHECK(std::abs(exact.values[x] - approx.values[x]) <= 1e-8);
}

TEST_CASE("evaluation identities and latency CDF") {
  ScenarioConfig cfg;
  cfg.paths = {PathModel::constant(1.0, 5, 0.1), PathModel::constant(1.5, 5)};
  cfg.block_size = 2;
  cfg.generation_period = 1.5;
  cfg.deadline = 2.0;
  cfg.discount = 0.99;
  const auto model = build_model(cfg);
  const auto opt = policy_iteration(model);
  std::vector<double> grid;
  for (int i = 0; i <= 40; ++i) grid.push_back(0.5 * i);
  const auto ev = evaluate_policy(model, opt.policy, grid);
  CHECK(std::abs(ev.steady_state * (1 - cfg.discount) - ev.average) <= 1e-9);
  CHECK(ev.delivery == doctest::Approx(ev.average).epsilon(1e-12));
  CHECK(ev.cdf.front() == 0.0);
  for (std::size_t g = 1; g < ev.cdf.size(); ++g) CHECK(ev.cdf[g] >= ev.cdf[g - 1] - 1e-15);
  const double far = 10 * cfg.deadline;
  const double tail = latency_cdf(model, opt.policy, ev.stationary, std::span<const double>(&far, 1))[0];
  CHECK(tail <= 1.0);
  CHECK(tail >= ev.cdf.back() - 1e-15);
  CHECK(bellman_gap(model, opt.values) <= 1e-9);
}

TEST_CASE("invalid policies are rejected") {
  const auto model = build_model(small::as_scenario({1.0, 1.0, 1.0, 1.0}, 0.9));
  CHECK_THROWS_AS(long_term_reward(model, Policy{{0, 0, 0}, "t"}), InputError);
  CHECK_THROWS_AS(long_term_reward(model, Policy{{0, 0, 0, 5}, "t"}), InputError);
}
