#include "pqsched/experiment.hpp"

#include <Eigen/Core>
#include <boost/version.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "pqsched/analysis.hpp"
#include "pqsched/analytic_small.hpp"
#include "pqsched/errors.hpp"
#include "pqsched/parallel.hpp"
#include "pqsched/simulator.hpp"

namespace pqsched {

using nlohmann::json;

namespace {

constexpr int schema_version = 1;
constexpr const char* library_version = "1.0.0";

// ---- JSON field access with the field path in every message

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw InputError(where + ": " + what);
}

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail(where, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) fail(where.empty() ? key : where + "." + key, "unknown field");
  }
}

std::string child(const std::string& where, const std::string& key) {
  return where.empty() ? key : where + "." + key;
}

double number(const json& v, const std::string& where) {
  if (!v.is_number()) fail(where, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail(where, "expected a finite number");
  return x;
}

long long integer(const json& v, const std::string& where) {
  if (!v.is_number_integer()) fail(where, "expected an integer");
  return v.get<long long>();
}

int small_int(const json& v, const std::string& where) {
  const long long x = integer(v, where);
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
    fail(where, "integer out of range");
  return static_cast<int>(x);
}

std::size_t count(const json& v, const std::string& where) {
  const long long x = integer(v, where);
  if (x < 0) fail(where, "must be non-negative");
  return static_cast<std::size_t>(x);
}

std::vector<double> numbers(const json& v, const std::string& where) {
  if (!v.is_array()) fail(where, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

std::string text(const json& v, const std::string& where) {
  if (!v.is_string()) fail(where, "expected a string");
  return v.get<std::string>();
}

bool flag(const json& v, const std::string& where) {
  if (!v.is_boolean()) fail(where, "expected true or false");
  return v.get<bool>();
}

void require_ascending(const std::vector<double>& xs, const std::string& where) {
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i] < 0.0) fail(where, "values must be non-negative");
    if (i > 0 && !(xs[i] > xs[i - 1])) fail(where, "values must be strictly ascending");
  }
}

// shortest text that reads back to the same double
std::string short_number(double v) { return json(v).dump(); }

// ---- scenario

PathModel parse_path(const json& j, const std::string& where, std::optional<int> capacity, double erasure) {
  check_keys(j, where, {"rates", "transition", "erasure", "capacity"});
  PathModel p;
  if (!j.contains("rates")) fail(child(where, "rates"), "required");
  p.rates = numbers(j["rates"], child(where, "rates"));
  if (j.contains("transition")) {
    const json& t = j["transition"];
    if (!t.is_array()) fail(child(where, "transition"), "expected a matrix");
    for (std::size_t r = 0; r < t.size(); ++r)
      p.channel_matrix.push_back(numbers(t[r], child(where, "transition") + "[" + std::to_string(r) + "]"));
  } else if (p.rates.size() == 1) {
    p.channel_matrix = {{1.0}};
  } else {
    fail(child(where, "transition"), "required with more than one channel state");
  }
  p.erasure = j.contains("erasure") ? number(j["erasure"], child(where, "erasure")) : erasure;
  if (j.contains("capacity"))
    p.capacity = small_int(j["capacity"], child(where, "capacity"));
  else if (capacity)
    p.capacity = *capacity;
  else
    fail(child(where, "capacity"), "required");
  try {
    p.validate();
  } catch (const InputError& e) {
    fail(where, e.what());
  }
  return p;
}

std::vector<PathModel> parse_channel(const json& j, int capacity, double erasure) {
  const std::string where = "scenario.channel";
  check_keys(j, where, {"model", "alpha", "xi_bar", "theta22"});
  const std::string model = j.contains("model") ? text(j["model"], child(where, "model")) : "constant";
  const auto param = [&](const char* key, double fallback, const char* range) {
    const double v = j.contains(key) ? number(j[key], child(where, key)) : fallback;
    if (!(v >= 0.0 && v < 1.0)) fail(child(where, key), std::string("must lie in ") + range);
    return v;
  };
  std::vector<PathModel> paths(2);
  if (model == "constant") {
    if (j.contains("xi_bar") || j.contains("theta22")) fail(where, "constant model takes only alpha");
    const auto rates = alpha_rates(param("alpha", 0.0, "[0, 1)"));
    for (std::size_t m = 0; m < 2; ++m) paths[m] = PathModel::constant(rates[m], capacity, erasure);
  } else if (model == "markov" || model == "sojourn") {
    if (j.contains("alpha")) fail(child(where, "alpha"), "only valid for the constant model");
    if (model == "markov" && j.contains("theta22")) fail(child(where, "theta22"), "only valid for the sojourn model");
    const double xi_bar = param("xi_bar", model == "markov" ? 0.0 : 0.32, "[0, 1)");
    const auto matrix = model == "markov" ? markov::theta()
                                          : sojourn_matrix(param("theta22", 0.2, "[0, 1)"), 1.0 - markov::kappa1());
    for (auto& p : paths) p = PathModel{markov::rates(xi_bar), matrix, erasure, capacity};
  } else {
    fail(child(where, "model"), "unknown channel model '" + model + "' (constant, markov, sojourn)");
  }
  return paths;
}

ScenarioConfig parse_scenario(const json& j) {
  const std::string where = "scenario";
  check_keys(j, where,
             {"preset", "scaled", "paths", "channel", "capacity", "erasure", "block_size", "generation_period",
              "deadline", "feedback_delay", "feedback", "discount", "max_total"});
  ScenarioConfig cfg;
  std::optional<int> capacity;
  if (j.contains("preset")) {
    const std::string name = text(j["preset"], "scenario.preset");
    const auto load = parse_load(name);
    if (!load) fail("scenario.preset", "unknown preset '" + name + "' (low-load, average-load, high-load)");
    const bool scaled = j.contains("scaled") && flag(j["scaled"], "scenario.scaled");
    cfg = preset_scenario(*load, scaled);
    capacity = load_preset(*load, scaled).capacity;
  } else if (j.contains("scaled")) {
    fail("scenario.scaled", "requires a preset");
  }
  if (j.contains("capacity")) capacity = small_int(j["capacity"], "scenario.capacity");
  const double erasure = j.contains("erasure") ? number(j["erasure"], "scenario.erasure") : 0.0;
  if (!(erasure >= 0.0 && erasure <= 1.0)) fail("scenario.erasure", "must lie in [0, 1]");

  if (j.contains("paths") && j.contains("channel")) fail("scenario", "give either paths or channel, not both");
  if (j.contains("channel")) {
    if (!capacity) fail("scenario.capacity", "required with a channel model");
    cfg.paths = parse_channel(j["channel"], *capacity, erasure);
  } else if (j.contains("paths")) {
    const json& ps = j["paths"];
    if (!ps.is_array() || ps.empty()) fail("scenario.paths", "expected a non-empty array");
    cfg.paths.clear();
    for (std::size_t m = 0; m < ps.size(); ++m)
      cfg.paths.push_back(parse_path(ps[m], "scenario.paths[" + std::to_string(m) + "]", capacity, erasure));
  } else if (!cfg.paths.empty()) {
    for (auto& p : cfg.paths) {
      if (capacity) p.capacity = *capacity;
      p.erasure = erasure;
    }
  } else {
    fail("scenario.paths", "required unless a preset or channel model is given");
  }

  if (j.contains("block_size")) cfg.block_size = small_int(j["block_size"], "scenario.block_size");
  if (j.contains("generation_period"))
    cfg.generation_period = number(j["generation_period"], "scenario.generation_period");
  if (j.contains("deadline")) cfg.deadline = number(j["deadline"], "scenario.deadline");
  if (j.contains("feedback_delay")) cfg.feedback_delay = number(j["feedback_delay"], "scenario.feedback_delay");
  if (j.contains("discount")) cfg.discount = number(j["discount"], "scenario.discount");
  if (j.contains("max_total") && !j["max_total"].is_null())
    cfg.max_total = small_int(j["max_total"], "scenario.max_total");
  const std::string feedback = j.contains("feedback") ? text(j["feedback"], "scenario.feedback") : "auto";
  if (feedback == "auto")
    cfg.feedback = cfg.feedback_delay > 0.0 ? FeedbackMode::delayed : FeedbackMode::instantaneous;
  else if (feedback == "instantaneous")
    cfg.feedback = FeedbackMode::instantaneous;
  else if (feedback == "delayed")
    cfg.feedback = FeedbackMode::delayed;
  else
    fail("scenario.feedback", "expected auto, instantaneous or delayed");

  try {
    cfg.validate();
  } catch (const InputError& e) {
    fail("scenario", e.what());
  }
  return cfg;
}

json scenario_json(const ScenarioConfig& cfg) {
  json paths = json::array();
  for (const auto& p : cfg.paths)
    paths.push_back({{"rates", p.rates}, {"transition", p.channel_matrix}, {"erasure", p.erasure},
                     {"capacity", p.capacity}});
  json out{{"paths", paths},
           {"block_size", cfg.block_size},
           {"generation_period", cfg.generation_period},
           {"deadline", cfg.deadline},
           {"feedback_delay", cfg.feedback_delay},
           {"feedback", cfg.delayed() ? "delayed" : "instantaneous"},
           {"discount", cfg.discount}};
  if (cfg.max_total) out["max_total"] = *cfg.max_total;
  return out;
}

// ---- policies

PolicySpec parse_policy(const json& j, const std::string& where, const std::filesystem::path& base_dir) {
  PolicySpec p;
  std::string kind;
  if (j.is_string()) {
    kind = j.get<std::string>();
  } else {
    check_keys(j, where, {"kind", "beta", "gamma", "p_thr", "file"});
    if (!j.contains("kind")) fail(child(where, "kind"), "required");
    kind = text(j["kind"], child(where, "kind"));
  }
  const auto get = [&](const char* key, double fallback) {
    return j.is_object() && j.contains(key) ? number(j[key], child(where, key)) : fallback;
  };
  const auto only = [&](std::initializer_list<const char*> keys) {
    if (!j.is_object()) return;
    for (const auto& [key, value] : j.items()) {
      bool ok = key == "kind";
      for (const char* k : keys) ok = ok || key == k;
      if (!ok) fail(child(where, key), "not a parameter of " + kind);
    }
  };
  if (kind == "optimal") {
    p.kind = PolicySpec::Kind::optimal;
    only({});
  } else if (kind == "ps") {
    p.kind = PolicySpec::Kind::ps;
    only({});
  } else if (kind == "ccr") {
    p.kind = PolicySpec::Kind::ccr;
    only({"beta"});
    p.beta = get("beta", 1.0);
    if (!(p.beta >= 1.0 && p.beta <= 2.0)) fail(child(where, "beta"), "must lie in [1, 2]");
  } else if (kind == "greedy") {
    p.kind = PolicySpec::Kind::greedy;
    only({"gamma", "p_thr"});
    p.heuristic.gamma = get("gamma", preset_gamma);
    p.heuristic.p_thr = get("p_thr", preset_p_thr);
    try {
      p.heuristic.validate();
    } catch (const InputError& e) {
      fail(where, e.what());
    }
  } else if (kind == "table") {
    p.kind = PolicySpec::Kind::table;
    only({"file"});
    if (!j.is_object() || !j.contains("file")) fail(child(where, "file"), "required for a table policy");
    std::filesystem::path file = text(j["file"], child(where, "file"));
    if (file.is_relative()) file = base_dir / file;
    p.file = std::filesystem::absolute(file).lexically_normal();
  } else {
    fail(child(where, "kind"), "unknown policy '" + kind + "' (optimal, ccr, ps, greedy, table)");
  }
  return p;
}

json policy_json(const PolicySpec& p) {
  switch (p.kind) {
    case PolicySpec::Kind::optimal: return {{"kind", "optimal"}};
    case PolicySpec::Kind::ps: return {{"kind", "ps"}};
    case PolicySpec::Kind::ccr: return {{"kind", "ccr"}, {"beta", p.beta}};
    case PolicySpec::Kind::greedy:
      return {{"kind", "greedy"}, {"gamma", p.heuristic.gamma}, {"p_thr", p.heuristic.p_thr}};
    case PolicySpec::Kind::table: return {{"kind", "table"}, {"file", p.file.string()}};
  }
  return {};
}

Policy read_policy_table(const MdpModel& model, const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw InputError("policy file " + file.string() + ": cannot be read");
  const std::size_t paths = model.space().path_count();
  std::string line;
  if (!std::getline(in, line)) throw InputError("policy file " + file.string() + ": empty");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  std::size_t state_col = header.size();
  std::vector<std::size_t> s_cols(paths, header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "state") state_col = c;
    for (std::size_t m = 0; m < paths; ++m)
      if (header[c] == "s" + std::to_string(m + 1)) s_cols[m] = c;
  }
  if (state_col == header.size()) throw InputError("policy file " + file.string() + ": no state column");
  for (std::size_t m = 0; m < paths; ++m)
    if (s_cols[m] == header.size())
      throw InputError("policy file " + file.string() + ": no s" + std::to_string(m + 1) + " column");

  Policy policy{std::vector<std::size_t>(model.state_count()), "table(" + file.filename().string() + ")"};
  std::vector<bool> seen(model.state_count(), false);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    const std::string at = "policy file " + file.string() + " line " + std::to_string(line_no);
    if (cells.size() != header.size()) throw InputError(at + ": wrong number of columns");
    try {
      const std::size_t x = std::stoull(cells[state_col]);
      if (x >= model.state_count()) throw InputError(at + ": state index out of range");
      Schedule s(paths);
      for (std::size_t m = 0; m < paths; ++m) s[m] = std::stoi(cells[s_cols[m]]);
      const auto a = model.find_action(x, s);
      if (!a) throw InputError(at + ": schedule is not an action of state " + std::to_string(x));
      if (seen[x]) throw InputError(at + ": state listed twice");
      seen[x] = true;
      policy.actions[x] = *a;
    } catch (const std::logic_error&) {
      throw InputError(at + ": malformed number");
    }
  }
  for (std::size_t x = 0; x < seen.size(); ++x)
    if (!seen[x]) throw InputError("policy file " + file.string() + ": state " + std::to_string(x) + " missing");
  return policy;
}

// ---- output

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << content;
  if (!out) throw InputError("cannot write " + path.string());
}

std::string header_row(const std::string& corner, const std::vector<double>& values) {
  std::string out = corner;
  for (double v : values) out += "," + short_number(v);
  return out + "\n";
}

std::vector<std::string> labels_of(const std::vector<PolicySpec>& ps) {
  std::vector<std::string> out;
  for (const auto& p : ps) out.push_back(p.label());
  return out;
}

const ScenarioConfig& need_scenario(const ExperimentSpec& spec, Command command) {
  if (!spec.scenario) throw InputError("scenario: required for " + command_name(command));
  return *spec.scenario;
}

const SweepSpec& need_sweep(const ExperimentSpec& spec, Command command) {
  if (!spec.sweep) throw InputError("sweep: required for " + command_name(command));
  return *spec.sweep;
}

SolverOptions solver_options(std::size_t threads) {
  SolverOptions o;
  o.threads = threads;
  return o;
}

std::string cdf_csv(const std::vector<double>& grid, const std::vector<std::string>& labels,
                    const std::vector<std::vector<double>>& cdfs) {
  std::string out = "t";
  for (const auto& l : labels) out += "," + l;
  out += "\n";
  for (std::size_t g = 0; g < grid.size(); ++g) {
    out += format_number(grid[g]);
    for (const auto& c : cdfs) out += "," + format_number(c[g]);
    out += "\n";
  }
  return out;
}

void run_solve(const ExperimentSpec& spec, const std::filesystem::path& out, std::size_t threads) {
  const ScenarioConfig& cfg = need_scenario(spec, Command::solve);
  const auto opts = solver_options(threads);
  const MdpModel model = build_model(cfg, spec.budget, threads);
  const auto pi = policy_iteration(model, opts);
  const auto ev = evaluate_policy(model, pi.policy, spec.cdf_grid, opts, pi.values);

  const StateSpace& space = model.space();
  const std::size_t paths = space.path_count();
  std::string csv = "state";
  for (std::size_t m = 1; m <= paths; ++m) csv += ",c" + std::to_string(m) + ",q" + std::to_string(m);
  for (std::size_t m = 1; m <= paths; ++m) csv += ",s" + std::to_string(m);
  csv += ",value\n";
  for (std::size_t x = 0; x < model.state_count(); ++x) {
    const SystemState s = space.decode(x);
    csv += std::to_string(x);
    for (const auto& p : s.paths) csv += "," + std::to_string(p.channel) + "," + std::to_string(p.queue);
    for (int k : model.schedule(x, pi.policy.actions[x])) csv += "," + std::to_string(k);
    csv += "," + format_number(pi.values[x]) + "\n";
  }
  write_file(out / "policy.csv", csv);

  const json summary{{"policy", "optimal"},
                     {"iterations", pi.iterations},
                     {"states", model.state_count()},
                     {"pairs", model.pair_count()},
                     {"steady_state_reward", ev.steady_state},
                     {"average_reward", ev.average},
                     {"delivery_probability", ev.delivery},
                     {"reward_percent", 100.0 * ev.delivery}};
  write_file(out / "summary.json", summary.dump(2) + "\n");
  if (!spec.cdf_grid.empty()) write_file(out / "cdf.csv", cdf_csv(spec.cdf_grid, {"optimal"}, {ev.cdf}));
}

void run_evaluate(const ExperimentSpec& spec, const std::filesystem::path& out, std::size_t threads) {
  const ScenarioConfig& cfg = need_scenario(spec, Command::evaluate);
  const auto opts = solver_options(threads);
  const MdpModel model = build_model(cfg, spec.budget, threads);
  std::string csv = "policy,steady_state_reward,average_reward,delivery_probability,reward_percent\n";
  std::vector<std::vector<double>> cdfs;
  for (const auto& selector : spec.policies) {
    const Policy p = make_policy(model, selector, opts);
    const auto ev = evaluate_policy(model, p, spec.cdf_grid, opts);
    csv += selector.label() + "," + format_number(ev.steady_state) + "," + format_number(ev.average) + "," +
           format_number(ev.delivery) + "," + format_number(100.0 * ev.delivery) + "\n";
    cdfs.push_back(ev.cdf);
  }
  write_file(out / "evaluation.csv", csv);
  if (!spec.cdf_grid.empty()) write_file(out / "cdf.csv", cdf_csv(spec.cdf_grid, labels_of(spec.policies), cdfs));
}

void run_simulate(const ExperimentSpec& spec, const std::filesystem::path& out, std::size_t threads) {
  const ScenarioConfig& cfg = need_scenario(spec, Command::simulate);
  const auto opts = solver_options(threads);
  const MdpModel model = build_model(cfg, spec.budget, threads);
  SimConfig sc;
  sc.scenario = cfg;
  sc.blocks = spec.simulation.blocks;
  sc.warmup = spec.simulation.warmup;
  sc.replications = spec.simulation.replications;
  sc.seed = spec.seed;
  sc.cdf_grid = spec.cdf_grid;
  sc.threads = threads;
  std::string csv = "policy,measured_blocks,success_mean,standard_error,half_width,analytical_delivery\n";
  json reports = json::array();
  for (const auto& selector : spec.policies) {
    const Policy p = make_policy(model, selector, opts);
    const auto ev = evaluate_policy(model, p, {}, opts);
    const SimReport r = run_simulation(sc, schedule_table(model, p));
    csv += selector.label() + "," + std::to_string(r.measured_blocks) + "," + format_number(r.success_mean) + "," +
           format_number(r.standard_error) + "," + format_number(r.half_width) + "," + format_number(ev.delivery) +
           "\n";
    reports.push_back({{"policy", selector.label()}, {"analytical_delivery", ev.delivery}, {"report", r}});
  }
  write_file(out / "simulation.csv", csv);
  write_file(out / "simulation.json", reports.dump(2) + "\n");
}

void run_sweep(const ExperimentSpec& spec, const std::filesystem::path& out, std::size_t threads) {
  const ScenarioConfig& base = need_scenario(spec, Command::sweep);
  const SweepSpec& sweep = need_sweep(spec, Command::sweep);
  const std::size_t points = sweep.values.size(), families = spec.policies.size();
  std::vector<std::vector<double>> reward(families, std::vector<double>(points));
  std::vector<std::vector<double>> delivery = reward;
  parallel_for(points, threads, [&](std::size_t begin, std::size_t end) {
    const auto opts = solver_options(1);
    for (std::size_t i = begin; i < end; ++i) {
      const MdpModel model = build_model(apply_axis(base, sweep.axis, sweep.values[i]), spec.budget, 1);
      for (std::size_t f = 0; f < families; ++f) {
        const auto ev = evaluate_policy(model, make_policy(model, spec.policies[f], opts), {}, opts);
        reward[f][i] = ev.steady_state;
        delivery[f][i] = ev.delivery;
      }
    }
  });
  const auto table = [&](const std::vector<std::vector<double>>& rows) {
    std::string csv = header_row("policy", sweep.values);
    for (std::size_t f = 0; f < families; ++f) {
      csv += spec.policies[f].label();
      for (double v : rows[f]) csv += "," + format_number(v);
      csv += "\n";
    }
    return csv;
  };
  write_file(out / "sweep_reward.csv", table(reward));
  write_file(out / "sweep_delivery.csv", table(delivery));
}

void run_analytic(const ExperimentSpec& spec, const std::filesystem::path& out) {
  const AnalyticSpec& a = spec.analytic;
  std::string csv = "tau_d";
  for (double mu : a.rates) csv += ",mu=" + short_number(mu);
  csv += "\n";
  for (double t : a.deadlines) {
    csv += format_number(t);
    for (double mu : a.rates) csv += "," + format_number(small::region_boundary(mu, mu, t));
    csv += "\n";
  }
  write_file(out / "boundary.csv", csv);
  if (a.grid) {
    std::string regions = header_row("tau_g/tau_d", a.grid->deadlines);
    for (double tg : a.grid->generation_periods) {
      regions += short_number(tg);
      for (double td : a.grid->deadlines)
        regions += std::string(",") + small::optimal_policy({a.grid->mu1, a.grid->mu2, tg, td}).label;
      regions += "\n";
    }
    write_file(out / "regions.csv", regions);
  }
}

void run_heatmap(const ExperimentSpec& spec, const std::filesystem::path& out, std::size_t threads) {
  const ScenarioConfig& cfg = need_scenario(spec, Command::heatmap);
  if (cfg.paths.size() != 2) throw InputError("scenario.paths: heatmaps need exactly two paths");
  const auto opts = solver_options(threads);
  const MdpModel model = build_model(cfg, spec.budget, threads);
  const Policy p = make_policy(model, spec.policies.front(), opts);
  const auto phi = stationary_distribution(model, p, opts);
  const HeatmapSpec h = spec.heatmap.value_or(HeatmapSpec{});
  std::vector<std::size_t> channels = h.channels.empty() ? std::vector<std::size_t>(2, 0) : h.channels;
  for (std::size_t m = 0; m < 2; ++m)
    if (channels.size() == 2 && channels[m] >= cfg.paths[m].channel_count())
      throw InputError("heatmap.channels: channel state out of range");
  const int bound = h.bound.value_or(std::min(cfg.paths[0].capacity, cfg.paths[1].capacity));
  const auto maps = extract_heatmaps(model, p, phi, channels, bound);
  write_file(out / "heatmap_first_share.csv", heatmap_csv(maps.first_share));
  write_file(out / "heatmap_redundancy.csv", heatmap_csv(maps.redundancy));
  write_file(out / "heatmap_probability.csv", heatmap_csv(maps.probability));
}

void run_sensitivity(const ExperimentSpec& spec, const std::filesystem::path& out, std::size_t threads) {
  const ScenarioConfig& base = need_scenario(spec, Command::sensitivity);
  const SweepSpec& sweep = need_sweep(spec, Command::sensitivity);
  const std::size_t n = sweep.values.size();
  std::vector<std::optional<MdpModel>> models(n);
  std::vector<Policy> policies(n);
  parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      models[i] = build_model(apply_axis(base, sweep.axis, sweep.values[i]), spec.budget, 1);
      policies[i] = make_policy(*models[i], spec.policies.front(), solver_options(1));
    }
  });
  std::vector<std::vector<double>> matrix(n, std::vector<double>(n));
  parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t)
      for (std::size_t a = 0; a < n; ++a)
        matrix[t][a] = sensitivity_eval(*models[a], policies[a], *models[t], solver_options(1)).steady_state;
  });
  std::string csv = header_row("true/assumed", sweep.values);
  for (std::size_t t = 0; t < n; ++t) {
    csv += short_number(sweep.values[t]);
    for (double v : matrix[t]) csv += "," + format_number(v);
    csv += "\n";
  }
  write_file(out / "sensitivity.csv", csv);
}

}  // namespace

// ---- parameterizations

LoadPreset load_preset(Load load, bool scaled) {
  LoadPreset p;
  switch (load) {
    case Load::low: p = {60, 20, 20.0, 12.0, 1.5}; break;
    case Load::average: p = {60, 20, 15.0, 15.0, 1.3}; break;
    case Load::high: p = {60, 20, 12.0, 20.0, 1.1}; break;
  }
  if (scaled) {
    p.capacity /= 5;
    p.block_size /= 5;
    p.generation_period /= 5.0;
    p.deadline /= 5.0;
  }
  return p;
}

std::optional<Load> parse_load(std::string_view name) {
  if (name == "low-load") return Load::low;
  if (name == "average-load") return Load::average;
  if (name == "high-load") return Load::high;
  return std::nullopt;
}

ScenarioConfig preset_scenario(Load load, bool scaled) {
  const LoadPreset p = load_preset(load, scaled);
  ScenarioConfig cfg;
  cfg.paths = {PathModel::constant(1.0, p.capacity), PathModel::constant(1.0, p.capacity)};
  cfg.block_size = p.block_size;
  cfg.generation_period = p.generation_period;
  cfg.deadline = p.deadline;
  return cfg;
}

std::vector<double> alpha_rates(double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw InputError("alpha must lie in [0, 1)");
  return {1.0 - alpha, 1.0 + alpha};
}

namespace markov {

const std::vector<std::vector<double>>& theta() {
  static const std::vector<std::vector<double>> t{{0.95, 0.05}, {0.8, 0.2}};
  return t;
}

double kappa1() { return channel_stationary(theta())[0]; }

double xi_max() { return 1.0 / kappa1() - 1.0; }

std::vector<double> rates(double xi_bar) {
  if (!(xi_bar >= 0.0 && xi_bar < 1.0)) throw InputError("xi_bar must lie in [0, 1)");
  const double k = kappa1(), xi = xi_bar * xi_max();
  return {1.0 + xi, (1.0 - (1.0 + xi) * k) / (1.0 - k)};
}

}  // namespace markov

std::vector<std::vector<double>> sojourn_matrix(double theta22, double kappa2) {
  if (!(theta22 >= 0.0 && theta22 < 1.0)) throw InputError("theta22 must lie in [0, 1)");
  if (!(kappa2 > 0.0 && kappa2 < 0.5)) throw InputError("kappa2 must lie in (0, 1/2)");
  const double a = (1.0 - 2.0 * kappa2 + theta22 * kappa2) / (1.0 - kappa2);
  return {{a, 1.0 - a}, {1.0 - theta22, theta22}};
}

std::optional<Command> parse_command(std::string_view name) {
  for (Command c : {Command::solve, Command::evaluate, Command::simulate, Command::sweep, Command::analytic,
                    Command::heatmap, Command::sensitivity})
    if (command_name(c) == name) return c;
  return std::nullopt;
}

std::string command_name(Command c) {
  switch (c) {
    case Command::solve: return "solve";
    case Command::evaluate: return "evaluate";
    case Command::simulate: return "simulate";
    case Command::sweep: return "sweep";
    case Command::analytic: return "analytic";
    case Command::heatmap: return "heatmap";
    case Command::sensitivity: return "sensitivity";
  }
  return "";
}

std::string PolicySpec::label() const {
  switch (kind) {
    case Kind::optimal: return "optimal";
    case Kind::ps: return "ps";
    case Kind::ccr: return "ccr(beta=" + short_number(beta) + ")";
    case Kind::greedy:
      return "greedy(gamma=" + short_number(heuristic.gamma) + ";p_thr=" + short_number(heuristic.p_thr) + ")";
    case Kind::table: return "table(" + file.filename().string() + ")";
  }
  return "";
}

ScenarioConfig apply_axis(const ScenarioConfig& base, const std::string& axis, double value) {
  ScenarioConfig cfg = base;
  const auto two_paths = [&] {
    if (cfg.paths.size() != 2) throw InputError("sweep.axis: " + axis + " needs exactly two paths");
  };
  if (axis == "alpha") {
    two_paths();
    const auto rates = alpha_rates(value);
    for (std::size_t m = 0; m < 2; ++m) {
      if (cfg.paths[m].channel_count() != 1) throw InputError("sweep.axis: alpha needs single-state channels");
      cfg.paths[m].rates = {rates[m]};
    }
  } else if (axis == "xi_bar") {
    two_paths();
    for (auto& p : cfg.paths) {
      p.rates = markov::rates(value);
      p.channel_matrix = markov::theta();
    }
  } else if (axis == "theta22") {
    two_paths();
    for (auto& p : cfg.paths) {
      if (p.channel_count() != 2) throw InputError("sweep.axis: theta22 needs two-state channels");
      p.channel_matrix = sojourn_matrix(value, channel_stationary(p.channel_matrix)[1]);
    }
  } else if (axis == "erasure") {
    for (auto& p : cfg.paths) p.erasure = value;
  } else if (axis == "feedback_delay") {
    cfg.feedback_delay = value;
    cfg.feedback = value > 0.0 ? FeedbackMode::delayed : FeedbackMode::instantaneous;
  } else if (axis == "deadline") {
    cfg.deadline = value;
  } else if (axis == "generation_period") {
    cfg.generation_period = value;
  } else if (axis == "discount") {
    cfg.discount = value;
  } else {
    throw InputError("sweep.axis: unknown axis '" + axis +
                     "' (alpha, xi_bar, theta22, erasure, feedback_delay, deadline, generation_period, discount)");
  }
  cfg.validate();
  return cfg;
}

ExperimentSpec parse_spec(const json& j, const std::filesystem::path& base_dir) {
  check_keys(j, "",
             {"schema_version", "scenario", "policy", "policies", "sweep", "cdf_grid", "heatmap", "simulation",
              "analytic", "seed", "budget", "command", "versions", "channel_stationary"});
  if (!j.contains("schema_version")) fail("schema_version", "required");
  if (integer(j["schema_version"], "schema_version") != schema_version)
    fail("schema_version", "unsupported version (expected " + std::to_string(schema_version) + ")");

  ExperimentSpec spec;
  if (j.contains("scenario")) spec.scenario = parse_scenario(j["scenario"]);

  if (j.contains("policy") && j.contains("policies")) fail("policy", "give either policy or policies, not both");
  if (j.contains("policy")) spec.policies.push_back(parse_policy(j["policy"], "policy", base_dir));
  if (j.contains("policies")) {
    if (!j["policies"].is_array() || j["policies"].empty()) fail("policies", "expected a non-empty array");
    for (std::size_t i = 0; i < j["policies"].size(); ++i)
      spec.policies.push_back(parse_policy(j["policies"][i], "policies[" + std::to_string(i) + "]", base_dir));
  }
  if (spec.policies.empty()) spec.policies.push_back(PolicySpec{});

  if (j.contains("sweep")) {
    const json& s = j["sweep"];
    check_keys(s, "sweep", {"axis", "values"});
    SweepSpec sweep;
    if (!s.contains("axis")) fail("sweep.axis", "required");
    if (!s.contains("values")) fail("sweep.values", "required");
    sweep.axis = text(s["axis"], "sweep.axis");
    sweep.values = numbers(s["values"], "sweep.values");
    if (sweep.values.empty()) fail("sweep.values", "expected at least one value");
    if (spec.scenario)
      for (std::size_t i = 0; i < sweep.values.size(); ++i) {
        try {
          (void)apply_axis(*spec.scenario, sweep.axis, sweep.values[i]);
        } catch (const InputError& e) {
          const std::string what = e.what();
          if (what.rfind("sweep.axis", 0) == 0) throw;
          fail("sweep.values[" + std::to_string(i) + "]", what);
        } catch (const UnsupportedError& e) {
          throw UnsupportedError("sweep.values[" + std::to_string(i) + "]: " + e.what());
        }
      }
    spec.sweep = sweep;
  }

  if (j.contains("cdf_grid")) {
    spec.cdf_grid = numbers(j["cdf_grid"], "cdf_grid");
    require_ascending(spec.cdf_grid, "cdf_grid");
  }

  if (j.contains("heatmap")) {
    const json& h = j["heatmap"];
    check_keys(h, "heatmap", {"channels", "bound"});
    HeatmapSpec hs;
    if (h.contains("channels")) {
      if (!h["channels"].is_array() || h["channels"].size() != 2) fail("heatmap.channels", "expected two channel states");
      for (std::size_t m = 0; m < 2; ++m)
        hs.channels.push_back(count(h["channels"][m], "heatmap.channels[" + std::to_string(m) + "]"));
    }
    if (h.contains("bound")) hs.bound = small_int(h["bound"], "heatmap.bound");
    spec.heatmap = hs;
  }

  if (j.contains("simulation")) {
    const json& s = j["simulation"];
    check_keys(s, "simulation", {"blocks", "warmup", "replications"});
    if (s.contains("blocks")) spec.simulation.blocks = count(s["blocks"], "simulation.blocks");
    if (s.contains("warmup")) spec.simulation.warmup = count(s["warmup"], "simulation.warmup");
    if (s.contains("replications")) spec.simulation.replications = count(s["replications"], "simulation.replications");
    if (!(spec.simulation.blocks > spec.simulation.warmup)) fail("simulation.blocks", "must exceed simulation.warmup");
    if (spec.simulation.replications < 1) fail("simulation.replications", "must be at least 1");
  }

  for (int i = 1; i <= 30; ++i) spec.analytic.deadlines.push_back(i / 10.0);
  if (j.contains("analytic")) {
    const json& a = j["analytic"];
    check_keys(a, "analytic", {"rates", "deadlines", "grid"});
    if (a.contains("rates")) spec.analytic.rates = numbers(a["rates"], "analytic.rates");
    for (double mu : spec.analytic.rates)
      if (!(mu > 0.0)) fail("analytic.rates", "rates must be positive");
    if (a.contains("deadlines")) {
      spec.analytic.deadlines = numbers(a["deadlines"], "analytic.deadlines");
      require_ascending(spec.analytic.deadlines, "analytic.deadlines");
    }
    if (a.contains("grid")) {
      const json& g = a["grid"];
      check_keys(g, "analytic.grid", {"mu1", "mu2", "generation_periods", "deadlines"});
      RegionGrid grid;
      if (g.contains("mu1")) grid.mu1 = number(g["mu1"], "analytic.grid.mu1");
      if (g.contains("mu2")) grid.mu2 = number(g["mu2"], "analytic.grid.mu2");
      if (!(grid.mu1 > 0.0 && grid.mu2 > 0.0)) fail("analytic.grid", "rates must be positive");
      if (!g.contains("generation_periods")) fail("analytic.grid.generation_periods", "required");
      if (!g.contains("deadlines")) fail("analytic.grid.deadlines", "required");
      grid.generation_periods = numbers(g["generation_periods"], "analytic.grid.generation_periods");
      grid.deadlines = numbers(g["deadlines"], "analytic.grid.deadlines");
      for (double t : grid.generation_periods)
        if (!(t > 0.0)) fail("analytic.grid.generation_periods", "values must be positive");
      for (double t : grid.deadlines)
        if (!(t > 0.0)) fail("analytic.grid.deadlines", "values must be positive");
      spec.analytic.grid = grid;
    }
  }

  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) fail("seed", "expected a non-negative integer");
    spec.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("budget")) {
    spec.budget = count(j["budget"], "budget");
    if (spec.budget == 0) fail("budget", "must be positive");
  }
  return spec;
}

ExperimentSpec load_spec(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw InputError("spec " + file.string() + ": cannot be read");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError("spec " + file.string() + ": " + e.what());
  }
  return parse_spec(j, std::filesystem::absolute(file).parent_path());
}

json manifest(const ExperimentSpec& spec, Command command) {
  json m{{"schema_version", schema_version}, {"command", command_name(command)}, {"seed", spec.seed},
         {"budget", spec.budget}};
  if (spec.scenario) {
    m["scenario"] = scenario_json(*spec.scenario);
    json stationary = json::array();
    for (const auto& p : spec.scenario->paths) {
      try {
        stationary.push_back(channel_stationary(p.channel_matrix));
      } catch (const NumericalError&) {
        stationary.push_back(nullptr);  // not unique
      }
    }
    m["channel_stationary"] = stationary;
  }
  json policies = json::array();
  for (const auto& p : spec.policies) policies.push_back(policy_json(p));
  m["policies"] = policies;
  if (spec.sweep) m["sweep"] = {{"axis", spec.sweep->axis}, {"values", spec.sweep->values}};
  if (!spec.cdf_grid.empty()) m["cdf_grid"] = spec.cdf_grid;
  if (spec.heatmap) {
    json h = json::object();
    if (!spec.heatmap->channels.empty()) h["channels"] = spec.heatmap->channels;
    if (spec.heatmap->bound) h["bound"] = *spec.heatmap->bound;
    m["heatmap"] = h;
  }
  m["simulation"] = {{"blocks", spec.simulation.blocks},
                     {"warmup", spec.simulation.warmup},
                     {"replications", spec.simulation.replications}};
  json analytic{{"rates", spec.analytic.rates}, {"deadlines", spec.analytic.deadlines}};
  if (spec.analytic.grid)
    analytic["grid"] = {{"mu1", spec.analytic.grid->mu1},
                        {"mu2", spec.analytic.grid->mu2},
                        {"generation_periods", spec.analytic.grid->generation_periods},
                        {"deadlines", spec.analytic.grid->deadlines}};
  m["analytic"] = analytic;
  m["versions"] = {{"pqsched", library_version},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"boost", BOOST_LIB_VERSION},
                   {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                         std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                         std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
  return m;
}

Policy make_policy(const MdpModel& model, const PolicySpec& selector, const SolverOptions& opts) {
  const ScenarioConfig& cfg = model.config();
  switch (selector.kind) {
    case PolicySpec::Kind::optimal: {
      Policy p = policy_iteration(model, opts).policy;
      p.provenance = selector.label();
      return p;
    }
    case PolicySpec::Kind::ccr:
      return policy_from_rule(
          model, [&](const SystemState& s) { return ccr_schedule(s, cfg, selector.beta); }, selector.label());
    case PolicySpec::Kind::ps:
      return policy_from_rule(model, [&](const SystemState& s) { return ps_schedule(s, cfg); }, selector.label());
    case PolicySpec::Kind::greedy:
      return policy_from_rule(
          model, [&](const SystemState& s) { return greedy_schedule(s, cfg, selector.heuristic); }, selector.label());
    case PolicySpec::Kind::table: return read_policy_table(model, selector.file);
  }
  throw InputError("unknown policy kind");
}

void run_experiment(Command command, const ExperimentSpec& spec, const std::filesystem::path& out_dir,
                    const RunOptions& options) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw InputError("cannot create output directory " + out_dir.string() + ": " + ec.message());
  write_file(out_dir / "manifest.json", manifest(spec, command).dump(2) + "\n");
  const std::size_t threads = std::max<std::size_t>(1, options.threads);
  switch (command) {
    case Command::solve: run_solve(spec, out_dir, threads); break;
    case Command::evaluate: run_evaluate(spec, out_dir, threads); break;
    case Command::simulate: run_simulate(spec, out_dir, threads); break;
    case Command::sweep: run_sweep(spec, out_dir, threads); break;
    case Command::analytic: run_analytic(spec, out_dir); break;
    case Command::heatmap: run_heatmap(spec, out_dir, threads); break;
    case Command::sensitivity: run_sensitivity(spec, out_dir, threads); break;
  }
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace pqsched
