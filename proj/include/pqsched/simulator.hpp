#pragma once

#include <cstddef>
#include <cstdint>
#include "json.hpp"
#include <vector>

#include "pqsched/heuristics.hpp"
#include "pqsched/scenario.hpp"
#include "pqsched/solver.hpp"

namespace pqsched {

struct SimConfig {
  ScenarioConfig scenario;
  std::size_t blocks = 100'000;     ///< per replication, including warm-up
  std::size_t warmup = 1'000;       ///< leading blocks left out of the statistics
  std::uint64_t seed = 1;
  std::size_t replications = 1;
  std::vector<double> cdf_grid;     ///< latency grid of the empirical CDF
  std::size_t threads = 1;

  void validate() const;
};

struct SimReport {
  std::vector<double> success;      ///< per-replication fraction delivered by the deadline
  double success_mean = 0.0;
  double standard_error = 0.0;      ///< across replications, batch means for a single one
  double half_width = 0.0;          ///< 95% normal-approximation half-width
  std::vector<double> cdf_grid;
  std::vector<double> cdf;          ///< pooled empirical P[latency <= t]
  std::vector<double> visits;       ///< pooled observed-state visit frequencies
  std::size_t measured_blocks = 0;  ///< total over replications
  std::uint64_t seed = 0;
};

void to_json(nlohmann::json& j, const SimReport& r);

/// Seed of replication `index`, from a SplitMix64 sequence started at `master`.
std::uint64_t replication_seed(std::uint64_t master, std::size_t index);

/// Schedule per state index, from a rule or a solved policy.
std::vector<Schedule> schedule_table(const ScenarioConfig& cfg, const PolicyRule& rule);
std::vector<Schedule> schedule_table(const MdpModel& model, const Policy& policy);

/// Event-driven simulation of block arrivals every generation period, FIFO
/// exponential service at the rate of the channel drawn for the interval, erasures
/// after service, and decisions taken on the observed (possibly aged) state.
/// Deterministic for a given configuration.
SimReport run_simulation(const SimConfig& cfg, const std::vector<Schedule>& table);
SimReport run_simulation(const SimConfig& cfg, const PolicyRule& rule);

}  // namespace pqsched
