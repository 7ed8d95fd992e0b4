#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>

#include "CLI11.hpp"
#include "pqsched/errors.hpp"
#include "pqsched/experiment.hpp"

namespace {

enum Exit { exit_ok = 0, exit_validation = 2, exit_budget = 3, exit_numerical = 4, exit_other = 1 };

int fail(int code, const std::string& message) {
  std::fprintf(stderr, "error: %s\n", message.c_str());
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coded scheduling over parallel queues: solve, evaluate, simulate and sweep."};
  app.require_subcommand(1);
  app.fallthrough();

  std::string spec_path, out_dir;
  std::uint64_t seed = 0;
  std::size_t threads = 1, budget = 0;
  app.add_option("--spec", spec_path, "Experiment spec (JSON, schema 1)")->required();
  app.add_option("--out", out_dir, "Output directory")->required();
  auto* seed_opt = app.add_option("--seed", seed, "Master RNG seed (overrides the experiment file)");
  app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  auto* budget_opt =
      app.add_option("--budget", budget, "Maximum (state, action) pairs per model (overrides the experiment file)")
          ->check(CLI::PositiveNumber);

  const struct {
    const char* name;
    const char* help;
  } commands[] = {
      {"solve", "Optimal policy by policy iteration"},
      {"evaluate", "Analytical evaluation of the selected policies"},
      {"simulate", "Monte-Carlo simulation next to the analytical delivery probability"},
      {"sweep", "Reward and delivery probability along a sweep axis"},
      {"analytic", "Two-queue unit-block boundary curve and policy regions"},
      {"heatmap", "Per-queue-state policy maps"},
      {"sensitivity", "Policies built on one sweep value evaluated on every other"},
  };
  for (const auto& c : commands) app.add_subcommand(c.name, c.help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_validation;
  }

  try {
    const auto command = pqsched::parse_command(app.get_subcommands().front()->get_name());
    pqsched::ExperimentSpec spec = pqsched::load_spec(spec_path);
    if (*seed_opt) spec.seed = seed;
    if (*budget_opt) spec.budget = budget;
    pqsched::run_experiment(*command, spec, out_dir, pqsched::RunOptions{threads});
  } catch (const pqsched::BudgetError& e) {
    return fail(exit_budget, e.what());
  } catch (const pqsched::NumericalError& e) {
    return fail(exit_numerical, e.what());
  } catch (const pqsched::InputError& e) {
    return fail(exit_validation, e.what());
  } catch (const pqsched::UnsupportedError& e) {
    return fail(exit_validation, e.what());
  } catch (const std::exception& e) {
    return fail(exit_other, e.what());
  }
  return exit_ok;
}
