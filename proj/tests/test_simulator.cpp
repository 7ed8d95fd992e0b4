#include <cmath>
#include <set>

#include "doctest.h"
#include "pqsched/analytic_small.hpp"
#include "pqsched/errors.hpp"
#include "pqsched/simulator.hpp"

using namespace pqsched;

namespace {

ScenarioConfig scaled(bool markov, double eps, double tau_f) {
  ScenarioConfig cfg;
  const PathModel two_state{{1.03125, 0.5}, {{0.95, 0.05}, {0.8, 0.2}}, eps, 12};
  if (markov)
    cfg.paths = {two_state, two_state};
  else
    cfg.paths = {PathModel::constant(1.0, 12, eps), PathModel::constant(1.0, 12, eps)};
  cfg.block_size = 4;
  cfg.generation_period = 3.0;
  cfg.deadline = 3.0;
  cfg.feedback_delay = tau_f;
  if (tau_f > 0.0) cfg.feedback = FeedbackMode::delayed;
  return cfg;
}

SimConfig sim_of(const ScenarioConfig& cfg, std::size_t blocks, std::uint64_t seed) {
  SimConfig sc;
  sc.scenario = cfg;
  sc.blocks = blocks;
  sc.warmup = 1000;
  sc.seed = seed;
  return sc;
}

double total_variation(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
  return 0.5 * d;
}

}  // namespace

TEST_CASE("simulation is deterministic for a fixed seed") {
  const auto cfg = scaled(true, 0.1, 1.0);
  const auto model = build_model(cfg);
  const auto table = schedule_table(model, policy_iteration(model).policy);
  auto sc = sim_of(cfg, 20000, 99);
  sc.replications = 3;
  sc.cdf_grid = {0.5, 1.0, 2.0, 3.0};
  const nlohmann::json a = run_simulation(sc, table), b = run_simulation(sc, table);
  CHECK(a.dump() == b.dump());
  sc.threads = 2;
  CHECK(nlohmann::json(run_simulation(sc, table)).dump() == a.dump());
  sc.seed = 100;
  CHECK(nlohmann::json(run_simulation(sc, table)).dump() != a.dump());
}

TEST_CASE("replication seeds are distinct") {
  std::set<std::uint64_t> seen;
  for (std::size_t i = 0; i < 1000; ++i) seen.insert(replication_seed(5, i));
  CHECK(seen.size() == 1000);
  CHECK(replication_seed(5, 0) != replication_seed(6, 0));
}

TEST_CASE("unit system under policy A matches the closed form") {
  const small::SmallSystem sys{1.0, 1.0, 1.0, 1.0};
  const auto model = build_model(small::as_scenario(sys, 0.9));
  const auto table = schedule_table(model, small::policy_in_model(model, 'A'));
  const auto report = run_simulation(sim_of(small::as_scenario(sys, 0.9), 1'000'000, 11), table);
  const double expect = small::expected_reward_a(sys);
  INFO("simulated " << report.success_mean << " +- " << report.standard_error);
  CHECK(std::abs(report.success_mean - expect) <= 4 * report.standard_error);
}

TEST_CASE("scaled scenarios agree with the analytical pipeline") {
  int case_id = 0;
  for (bool markov : {false, true})
    for (double eps : {0.0, 0.1})
      for (double tau_f : {0.0, 1.0}) {
        const auto cfg = scaled(markov, eps, tau_f);
        const auto model = build_model(cfg);
        const auto policy = policy_iteration(model).policy;
        std::vector<double> grid{1.0, 2.0, 3.0, 4.5};
        const auto ev = evaluate_policy(model, policy, grid);
        auto sc = sim_of(cfg, 1'000'000, 1000 + static_cast<std::uint64_t>(case_id++));
        sc.cdf_grid = grid;
        const auto report = run_simulation(sc, schedule_table(model, policy));
        INFO("markov " << markov << " eps " << eps << " tau_f " << tau_f);
        INFO("simulated " << report.success_mean << " +- " << report.standard_error << ", analytical "
                          << ev.delivery);
        CHECK(std::abs(report.success_mean - ev.delivery) <= 4 * report.standard_error);
        CHECK(total_variation(report.visits, ev.stationary) < 0.01);
        REQUIRE(report.cdf.size() == grid.size());
        for (std::size_t g = 0; g < grid.size(); ++g) {
          CHECK(report.cdf[g] >= 0.0);
          CHECK(report.cdf[g] <= 1.0);
          if (g > 0) CHECK(report.cdf[g] >= report.cdf[g - 1]);
        }
        // success is delivery by the deadline
        CHECK(report.cdf[2] == doctest::Approx(report.success_mean).epsilon(1e-12));
      }
}

TEST_CASE("heuristic rules run directly") {
  const auto cfg = scaled(false, 0.0, 0.0);
  const auto model = build_model(cfg);
  const PolicyRule ps = [&](const SystemState& s) { return ps_schedule(s, cfg); };
  auto sc = sim_of(cfg, 200000, 3);
  const auto direct = run_simulation(sc, ps);
  const auto via_table = run_simulation(sc, schedule_table(model, policy_from_rule(model, ps, "ps")));
  CHECK(nlohmann::json(direct).dump() == nlohmann::json(via_table).dump());
  const auto ev = evaluate_policy(model, policy_from_rule(model, ps, "ps"));
  CHECK(std::abs(direct.success_mean - ev.delivery) <= 4 * direct.standard_error);
  for (double f : direct.success) {
    CHECK(f >= 0.0);
    CHECK(f <= 1.0);
  }
}

TEST_CASE("simulation configuration is validated") {
  const auto cfg = scaled(false, 0.0, 0.0);
  const auto model = build_model(cfg);
  const auto table = schedule_table(model, policy_iteration(model).policy);
  auto sc = sim_of(cfg, 1000, 1);
  CHECK_THROWS_AS(run_simulation(sc, table), InputError);
  sc.blocks = 2000;
  sc.cdf_grid = {2.0, 1.0};
  CHECK_THROWS_AS(run_simulation(sc, table), InputError);
  sc.cdf_grid = {};
  auto overfull = table;
  overfull.back() = Schedule{1, 0};  // both queues full in the last state
  CHECK_THROWS_AS(run_simulation(sc, overfull), InputError);
  overfull.pop_back();
  CHECK_THROWS_AS(run_simulation(sc, overfull), InputError);
}
