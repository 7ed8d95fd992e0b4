#include <cmath>
#include <random>

#include "doctest.h"
#include "pqsched/errors.hpp"
#include "pqsched/mdp.hpp"

using namespace pqsched;

namespace {

ScenarioConfig two_paths(int cap, int k, double tau_g, double tau_d) {
  ScenarioConfig cfg;
  cfg.paths = {PathModel::constant(1.0, cap), PathModel::constant(1.0, cap)};
  cfg.block_size = k;
  cfg.generation_period = tau_g;
  cfg.deadline = tau_d;
  return cfg;
}

ScenarioConfig random_markov(std::mt19937_64& rng, int paths, int cap, bool delayed) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ScenarioConfig cfg;
  for (int m = 0; m < paths; ++m) {
    const double a = 0.5 + 0.5 * u(rng), b = 0.2 + 0.6 * u(rng);
    cfg.paths.push_back(PathModel{{0.5 + u(rng), 0.2 + u(rng)}, {{a, 1 - a}, {b, 1 - b}}, 0.2 * u(rng), cap});
  }
  cfg.block_size = 1 + static_cast<int>(u(rng) * 3);
  cfg.generation_period = 0.5 + 2 * u(rng);
  cfg.deadline = 0.5 + 2 * u(rng);
  if (delayed) {
    cfg.feedback = FeedbackMode::delayed;
    cfg.feedback_delay = u(rng) * cfg.generation_period;
  }
  return cfg;
}

std::vector<double> dense_row(const SparseRow& row, std::size_t n) {
  std::vector<double> out(n, 0.0);
  for (std::size_t j = 0; j < row.index.size(); ++j) out[row.index[j]] += row.prob[j];
  return out;
}

}  // namespace

TEST_CASE("action enumeration") {
  const auto cfg = two_paths(1, 1, 1.0, 1.0);
  const StateSpace space(cfg.paths);
  using A = std::vector<Schedule>;
  CHECK(enumerate_actions(space.decode(space.encode(std::vector<PathState>{{0, 0}, {0, 0}})), cfg) ==
        A{{0, 0}, {1, 0}, {0, 1}, {1, 1}});
  CHECK(enumerate_actions(space.decode(space.encode(std::vector<PathState>{{0, 1}, {0, 1}})), cfg) ==
        A{{0, 0}});
  const auto cfg2 = two_paths(2, 2, 1.0, 1.0);
  const StateSpace space2(cfg2.paths);
  CHECK(enumerate_actions(space2.decode(space2.encode(std::vector<PathState>{{0, 0}, {0, 1}})), cfg2) ==
        A{{0, 0}, {2, 0}, {1, 1}, {2, 1}});
}

TEST_CASE("max_total caps the action set") {
  auto cfg = two_paths(5, 2, 1.0, 1.0);
  cfg.max_total = 3;
  const StateSpace space(cfg.paths);
  for (const auto& s : enumerate_actions(space.decode(0), cfg)) {
    const int n = s[0] + s[1];
    CHECK((n == 0 || (n >= 2 && n <= 3)));
  }
  CHECK(enumerate_actions(space.decode(0), cfg).size() == 1 + 3 + 4);
}

TEST_CASE("state space indexing") {
  CHECK(StateSpace(two_paths(1, 1, 1, 1).paths).size() == 4);
  CHECK(StateSpace(two_paths(2, 1, 1, 1).paths).size() == 9);
  std::mt19937_64 rng(1);
  const auto cfg = random_markov(rng, 2, 1, false);
  const StateSpace space(cfg.paths);
  CHECK(space.size() == 16);
  for (std::size_t x = 0; x < space.size(); ++x) CHECK(space.encode(space.decode(x).paths) == x);
}

TEST_CASE("single-path transitions") {
  ScenarioConfig cfg;
  cfg.paths = {PathModel::constant(1.0, 3)};
  cfg.generation_period = 1.0;
  const StateSpace space(cfg.paths);
  SUBCASE("one packet from empty") {
    const auto row = dense_row(transition_row(space.decode(0), std::vector<int>{1}, cfg), 4);
    CHECK(row[0] == doctest::Approx(1 - std::exp(-1.0)).epsilon(1e-14));
    CHECK(row[1] == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
  }
  SUBCASE("one packet behind one") {
    cfg.generation_period = 2.0;
    const auto row = dense_row(transition_row(space.decode(1), std::vector<int>{1}, cfg), 4);
    const double e2 = std::exp(-2.0);
    CHECK(row[2] == doctest::Approx(e2).epsilon(1e-14));
    CHECK(row[1] == doctest::Approx(2 * e2).epsilon(1e-14));
    CHECK(row[0] == doctest::Approx(1 - 3 * e2).epsilon(1e-14));
  }
  SUBCASE("delayed observation drains before the decision") {
    cfg.feedback = FeedbackMode::delayed;
    cfg.feedback_delay = 1.0;
    cfg.generation_period = 2.0;
    const auto row = dense_row(transition_row(space.decode(1), std::vector<int>{1}, cfg), 4);
    const double e1 = std::exp(-1.0);
    // r = 0 with e^-1 leaves 2 packets, r = 1 leaves 1, then one more unit of service
    CHECK(row[2] == doctest::Approx(e1 * e1).epsilon(1e-13));
    CHECK(row[1] == doctest::Approx(e1 * e1 + (1 - e1) * e1).epsilon(1e-13));
    CHECK(row[0] == doctest::Approx(e1 * (1 - 2 * e1) + (1 - e1) * (1 - e1)).epsilon(1e-13));
  }
}

TEST_CASE("drop from empty queues is a self loop") {
  const auto cfg = two_paths(3, 2, 1.0, 1.0);
  const StateSpace space(cfg.paths);
  const auto row = transition_row(space.decode(0), std::vector<int>{0, 0}, cfg);
  REQUIRE(row.index.size() == 1);
  CHECK(row.index[0] == 0);
  CHECK(row.prob[0] == 1.0);
  CHECK(reward_of(space.decode(0), std::vector<int>{0, 0}, cfg) == 0.0);
}

TEST_CASE("model sizes and action counts") {
  const auto small = build_model(two_paths(1, 1, 1.0, 1.0));
  CHECK(small.state_count() == 4);
  CHECK(small.action_count(0) == 4);  // (0,0)
  CHECK(small.action_count(1) == 2);  // (0,1)
  CHECK(small.action_count(2) == 2);  // (1,0)
  CHECK(small.action_count(3) == 1);  // (1,1)
  CHECK(build_model(two_paths(2, 1, 1.0, 1.0)).state_count() == 9);
  std::mt19937_64 rng(2);
  CHECK(build_model(random_markov(rng, 2, 1, false)).state_count() == 16);
}

TEST_CASE("budget and configuration errors") {
  CHECK_THROWS_AS(build_model(two_paths(12, 4, 3.0, 3.0), 100), BudgetError);
  auto cfg = two_paths(2, 1, 1.0, 1.0);
  cfg.feedback = FeedbackMode::delayed;
  cfg.feedback_delay = 1.5;
  CHECK_THROWS_AS(build_model(cfg), UnsupportedError);
  cfg = two_paths(2, 1, 1.0, 1.0);
  cfg.discount = 1.0;
  CHECK_THROWS_AS(build_model(cfg), InputError);
}

TEST_CASE("rows are stochastic and channels evolve independently of the schedule") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 8; ++trial) {
    const auto cfg = random_markov(rng, 2, 3, trial % 2 == 1);
    const auto model = build_model(cfg);
    const StateSpace& space = model.space();
    for (std::size_t x = 0; x < model.state_count(); ++x) {
      const SystemState st = space.decode(x);
      for (std::size_t a = 0; a < model.action_count(x); ++a) {
        const SparseRow row = model.transition(x, a);
        double total = 0.0;
        std::vector<double> channel_mass(4, 0.0);
        for (std::size_t j = 0; j < row.index.size(); ++j) {
          CHECK(row.prob[j] >= 0.0);
          total += row.prob[j];
          const auto next = space.decode(row.index[j]);
          channel_mass[next.paths[0].channel * 2 + next.paths[1].channel] += row.prob[j];
        }
        CHECK(std::abs(total - 1.0) <= 1e-10);
        for (std::size_t c0 = 0; c0 < 2; ++c0)
          for (std::size_t c1 = 0; c1 < 2; ++c1) {
            const double expect = cfg.paths[0].channel_matrix[st.paths[0].channel][c0] *
                                  cfg.paths[1].channel_matrix[st.paths[1].channel][c1];
            CHECK(std::abs(channel_mass[c0 * 2 + c1] - expect) <= 1e-12);
          }
        const double r = model.reward(x, a);
        CHECK(r >= 0.0);
        CHECK(r <= 1.0);
      }
    }
  }
}

TEST_CASE("model rows and rewards match the standalone definitions") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 4; ++trial) {
    const auto cfg = random_markov(rng, 2, 2, trial >= 2);
    const auto model = build_model(cfg);
    for (std::size_t x = 0; x < model.state_count(); ++x) {
      const SystemState st = model.space().decode(x);
      for (std::size_t a = 0; a < model.action_count(x); ++a) {
        const auto s = model.schedule(x, a);
        const SparseRow mine = model.transition(x, a), ref = transition_row(st, s, cfg);
        CHECK(mine.index == ref.index);
        CHECK(mine.prob == ref.prob);
        CHECK(model.reward(x, a) == reward_of(st, s, cfg));
        CHECK(model.reward_at(x, a, cfg.deadline) == model.reward(x, a));
      }
    }
  }
}

TEST_CASE("factored products agree with row-by-row products") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int paths : {1, 2, 3}) {
    const auto cfg = random_markov(rng, paths, 2, paths == 2);
    const auto model = build_model(cfg);
    const std::size_t n = model.state_count();
    std::vector<double> v(n);
    for (double& x : v) x = u(rng);
    const auto fast = model.expected_values(v, 2);
    const auto slow = model.DecisionProcess::expected_values(v, 1);
    for (std::size_t x = 0; x < n; ++x)
      for (std::size_t a = 0; a < fast[x].size(); ++a) CHECK(std::abs(fast[x][a] - slow[x][a]) < 1e-13);

    std::vector<std::size_t> policy(n);
    for (std::size_t x = 0; x < n; ++x) policy[x] = static_cast<std::size_t>(u(rng) * model.action_count(x));
    std::vector<double> a(n), b(n);
    model.policy_step(policy, v, a, 1);
    model.DecisionProcess::policy_step(policy, v, b, 1);
    for (std::size_t x = 0; x < n; ++x) CHECK(std::abs(a[x] - b[x]) < 1e-13);
    model.policy_step_transposed(policy, v, a);
    model.DecisionProcess::policy_step_transposed(policy, v, b);
    for (std::size_t x = 0; x < n; ++x) CHECK(std::abs(a[x] - b[x]) < 1e-13);
  }
}

TEST_CASE("reward grows with every extra packet when nothing is erased") {
  const auto cfg = two_paths(6, 3, 2.0, 2.5);
  const auto model = build_model(cfg);
  for (std::size_t x = 0; x < model.state_count(); ++x) {
    const SystemState st = model.space().decode(x);
    for (std::size_t a = 1; a < model.action_count(x); ++a) {
      Schedule s(model.schedule(x, a).begin(), model.schedule(x, a).end());
      for (std::size_t m = 0; m < 2; ++m) {
        if (st.paths[m].queue + s[m] + 1 > cfg.paths[m].capacity) continue;
        Schedule more = s;
        ++more[m];
        CHECK(reward_of(st, more, cfg) >= model.reward(x, a) - 1e-15);
      }
    }
  }
}

TEST_CASE("delayed model with no delay and one channel is the instantaneous model") {
  auto cfg = two_paths(4, 2, 1.5, 2.0);
  cfg.paths[0].erasure = 0.1;
  cfg.paths[1] = PathModel::constant(1.7, 4, 0.05);
  const auto instant = build_model(cfg);
  cfg.feedback = FeedbackMode::delayed;
  const auto delayed = build_model(cfg);
  REQUIRE(instant.pair_count() == delayed.pair_count());
  for (std::size_t x = 0; x < instant.state_count(); ++x) {
    for (std::size_t a = 0; a < instant.action_count(x); ++a) {
      CHECK(instant.reward(x, a) == delayed.reward(x, a));
      const auto r1 = instant.transition(x, a), r2 = delayed.transition(x, a);
      CHECK(r1.index == r2.index);
      CHECK(r1.prob == r2.prob);
    }
  }
}
