#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "pqsched/heuristics.hpp"
#include "pqsched/scenario.hpp"
#include "pqsched/solver.hpp"

// Scenario parameterizations, experiment specs and the subcommand runners behind the CLI.
namespace pqsched {

enum class Load { low, average, high };

struct LoadPreset {
  int capacity = 0;
  int block_size = 0;
  double generation_period = 0.0;
  double deadline = 0.0;
  double beta = 1.0;  ///< CCR redundancy paired with the load
};

inline constexpr double preset_gamma = 0.8;
inline constexpr double preset_p_thr = 0.9;

/// Reference loads. The scaled variant divides capacity, K, tau_g and tau_d by 5.
LoadPreset load_preset(Load load, bool scaled);
std::optional<Load> parse_load(std::string_view name);

/// Two unit-rate exponential paths at the given load.
ScenarioConfig preset_scenario(Load load, bool scaled);

/// Rates (1 - alpha, 1 + alpha); the aggregate stays 2. Requires alpha in [0, 1).
std::vector<double> alpha_rates(double alpha);

/// Two-state channel with a fast and a slow state.
namespace markov {
const std::vector<std::vector<double>>& theta();
double kappa1();  ///< stationary share of the fast state
double xi_max();  ///< 1 / kappa1 - 1
/// Rates (1 + xi, (1 - (1 + xi) kappa1) / (1 - kappa1)) with xi = xi_bar * xi_max,
/// so the stationary mean rate is 1. Requires xi_bar in [0, 1).
std::vector<double> rates(double xi_bar);
}  // namespace markov

/// Channel matrix with mean sojourn 1 / (1 - theta22) in the slow state and
/// stationary slow-state share kappa2.
std::vector<std::vector<double>> sojourn_matrix(double theta22, double kappa2);

enum class Command { solve, evaluate, simulate, sweep, analytic, heatmap, sensitivity };
std::optional<Command> parse_command(std::string_view name);
std::string command_name(Command c);

struct PolicySpec {
  enum class Kind { optimal, ccr, ps, greedy, table } kind = Kind::optimal;
  double beta = 1.0;
  HeuristicConfig heuristic;
  std::filesystem::path file;  ///< absolute path of a policy CSV for Kind::table

  std::string label() const;
};

struct SweepSpec {
  std::string axis;  ///< alpha | xi_bar | theta22 | erasure | feedback_delay | deadline | generation_period | discount
  std::vector<double> values;
};

struct HeatmapSpec {
  std::vector<std::size_t> channels;
  std::optional<int> bound;  ///< defaults to the smaller queue capacity
};

struct SimulationSpec {
  std::size_t blocks = 100'000;
  std::size_t warmup = 1'000;
  std::size_t replications = 1;
};

struct RegionGrid {
  double mu1 = 1.0;
  double mu2 = 1.0;
  std::vector<double> generation_periods;
  std::vector<double> deadlines;
};

struct AnalyticSpec {
  std::vector<double> rates{1.0};
  std::vector<double> deadlines;  ///< boundary curve abscissae
  std::optional<RegionGrid> grid;
};

struct ExperimentSpec {
  std::optional<ScenarioConfig> scenario;
  std::vector<PolicySpec> policies;
  std::optional<SweepSpec> sweep;
  std::vector<double> cdf_grid;
  std::optional<HeatmapSpec> heatmap;
  SimulationSpec simulation;
  AnalyticSpec analytic;
  std::uint64_t seed = 1;
  std::size_t budget = 10'000'000;
};

/// Parses and validates a schema-1 spec. Relative policy file paths resolve
/// against `base_dir`. Errors name the offending field.
ExperimentSpec parse_spec(const nlohmann::json& j, const std::filesystem::path& base_dir);
ExperimentSpec load_spec(const std::filesystem::path& file);

/// Scenario with one sweep coordinate applied.
ScenarioConfig apply_axis(const ScenarioConfig& base, const std::string& axis, double value);

/// Resolved experiment plus provenance. Parsing the manifest reproduces the experiment.
nlohmann::json manifest(const ExperimentSpec& spec, Command command);

/// Policy for the model per the selector.
Policy make_policy(const MdpModel& model, const PolicySpec& selector, const SolverOptions& opts);

struct RunOptions {
  std::size_t threads = 1;
};

/// Runs a subcommand and writes manifest.json plus its outputs into `out_dir`.
void run_experiment(Command command, const ExperimentSpec& spec, const std::filesystem::path& out_dir,
                    const RunOptions& options = {});

/// "%.17g" text of a double.
std::string format_number(double v);

}  // namespace pqsched
