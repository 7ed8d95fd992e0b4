#include <cmath>
#include <random>

#include "doctest.h"
#include "pqsched/analytic_small.hpp"
#include "pqsched/errors.hpp"

using namespace pqsched;
using small::SmallSystem;

namespace {

double pipeline_reward(const SmallSystem& sys, char label) {
  const auto model = build_model(small::as_scenario(sys, 0.9));
  const Policy p = small::policy_in_model(model, label);
  const auto phi = stationary_distribution(model, p);
  return average_reward(model, p, phi);
}

}  // namespace

TEST_CASE("policy A closed form at unit rates") {
  const SmallSystem sys{1.0, 1.0, 1.0, 1.0};
  CHECK(small::expected_reward_a(sys) == doctest::Approx(0.6394915).epsilon(1e-7));
  CHECK(std::abs(small::expected_reward(sys, 'A') - small::expected_reward_a(sys)) <= 1e-12);
}

TEST_CASE("closed forms agree with the four-state chain") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.05, 3.0);
  for (int i = 0; i < 200; ++i) {
    const SmallSystem sys{u(rng), u(rng), u(rng), u(rng)};
    CHECK(std::abs(small::expected_reward(sys, 'A') - small::expected_reward_a(sys)) <= 1e-12);
    CHECK(std::abs(small::expected_reward(sys, 'E') - small::expected_reward_e(sys)) <= 1e-12);
  }
}

TEST_CASE("long deadline limit of policy A") {
  const SmallSystem sys{1.3, 0.7, 0.8, 60.0};
  CHECK(small::expected_reward_a(sys) ==
        doctest::Approx(1 - sys.p(0) * sys.p(1)).epsilon(1e-12));
}

TEST_CASE("unknown labels are rejected") {
  CHECK_THROWS_AS(small::policy_actions('Z'), InputError);
  CHECK_THROWS_AS(small::expected_reward({1, 1, 1, 1}, 'I'), InputError);
}

TEST_CASE("region boundary") {
  CHECK(small::region_boundary(1.0, 1.0, 1.0) == doctest::Approx(0.643408).epsilon(1e-6));
  CHECK(small::region_boundary(1.0, 1.0, 0.0) == 0.0);
  // independent evaluation of the expression gives 0.5619185
  CHECK(small::region_boundary(2.0, 2.0, 1.0) == doctest::Approx(0.5619185).epsilon(1e-6));
  CHECK_THROWS_AS(small::region_boundary(2.0, 1.0, 1.0), UnsupportedError);
}

TEST_CASE("optimal policy spot points") {
  CHECK(small::optimal_policy({1.0, 1.0, 1.0, 1.0}).label == 'A');
  CHECK(small::optimal_policy({1.0, 1.0, 0.3, 1.0}).label == 'E');
  CHECK(small::optimal_policy({2.5, 0.5, 1.0, 1.0}).label == 'E');
  CHECK(small::optimal_policy({0.5, 2.5, 1.0, 1.0}).label == 'G');
  CHECK(small::optimal_policy({2.0, 2.0, 1.0, 1.0}).label == 'A');
}

TEST_CASE("optimal policy flips at the boundary") {
  for (double mu : {0.5, 1.0, 2.0}) {
    for (double tau_d : {0.5, 1.0, 2.0, 3.0}) {
      const double b = small::region_boundary(mu, mu, tau_d);
      CHECK(small::optimal_policy({mu, mu, b * 0.99, tau_d}).label == 'E');
      CHECK(small::optimal_policy({mu, mu, b * 1.01, tau_d}).label == 'A');
    }
  }
}

TEST_CASE("swapping the rates mirrors E and G") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  for (int i = 0; i < 50; ++i) {
    const SmallSystem a{u(rng), u(rng), u(rng), u(rng)};
    const SmallSystem b{a.mu2, a.mu1, a.tau_g, a.tau_d};
    CHECK(std::abs(small::expected_reward(a, 'E') - small::expected_reward(b, 'G')) <= 1e-12);
    CHECK(std::abs(small::expected_reward(a, 'A') - small::expected_reward(b, 'A')) <= 1e-12);
    CHECK(std::abs(small::expected_reward(a, 'D') - small::expected_reward(b, 'D')) <= 1e-12);
  }
}

TEST_CASE("closed forms equal the general machinery") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  for (int i = 0; i < 30; ++i) {
    const SmallSystem sys{u(rng), u(rng), u(rng), u(rng)};
    for (char label : small::labels)
      CHECK(std::abs(small::expected_reward(sys, label) - pipeline_reward(sys, label)) <= 1e-9);
  }
}

TEST_CASE("policy iteration agrees with enumeration over a grid") {
  for (int i = 1; i <= 20; ++i) {
    for (int j = 1; j <= 20; ++j) {
      const SmallSystem sys{1.0, 1.0, 0.15 * i, 0.15 * j};
      const auto best = small::optimal_policy(sys);
      const auto model = build_model(small::as_scenario(sys, 0.999));
      const auto pi = policy_iteration(model);
      const auto label = small::classify(model, pi.policy);
      REQUIRE(label.has_value());
      CHECK(*label == best.label);
    }
  }
}
