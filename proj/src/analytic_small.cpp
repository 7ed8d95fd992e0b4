#include "pqsched/analytic_small.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "pqsched/errors.hpp"

namespace pqsched::small {

namespace {

constexpr std::array<std::array<int, 2>, 4> queue_of{{{0, 0}, {1, 0}, {0, 1}, {1, 1}}};

// Model index of each small state (the last path varies fastest in the model).
constexpr std::array<std::size_t, 4> model_index{0, 2, 1, 3};

}  // namespace

double SmallSystem::p(int m) const { return std::exp(-(m == 0 ? mu1 : mu2) * tau_g); }
double SmallSystem::r(int m) const { return std::exp(-(m == 0 ? mu1 : mu2) * tau_d); }

void SmallSystem::validate() const {
  if (!(mu1 > 0.0 && mu2 > 0.0)) throw InputError("rates must be positive");
  if (!(tau_g > 0.0 && tau_d > 0.0)) throw InputError("times must be positive");
}

std::array<Action, 4> policy_actions(char label) {
  switch (label) {
    case 'A': return {{{1, 1}, {0, 1}, {1, 0}, {0, 0}}};
    case 'B': return {{{1, 1}, {0, 1}, {0, 0}, {0, 0}}};
    case 'C': return {{{1, 1}, {0, 0}, {1, 0}, {0, 0}}};
    case 'D': return {{{1, 1}, {0, 0}, {0, 0}, {0, 0}}};
    case 'E': return {{{1, 0}, {0, 1}, {1, 0}, {0, 0}}};
    case 'F': return {{{1, 0}, {0, 1}, {0, 0}, {0, 0}}};
    case 'G': return {{{0, 1}, {0, 1}, {1, 0}, {0, 0}}};
    case 'H': return {{{0, 1}, {0, 0}, {1, 0}, {0, 0}}};
    default: throw InputError(std::string("unknown small-system policy '") + label + "'");
  }
}

Matrix4 transition_matrix(const SmallSystem& sys, char label) {
  sys.validate();
  const auto actions = policy_actions(label);
  const std::array<double, 2> p{sys.p(0), sys.p(1)};
  Matrix4 t{};
  for (std::size_t x = 0; x < 4; ++x) {
    // a queue holding a packet keeps it for the whole period with probability p_m
    std::array<int, 2> busy{};
    for (int m = 0; m < 2; ++m) busy[m] = queue_of[x][m] + actions[x][m];
    for (std::size_t y = 0; y < 4; ++y) {
      double prob = 1.0;
      for (int m = 0; m < 2; ++m) {
        const double stay = busy[m] * p[m];
        prob *= queue_of[y][m] == 1 ? stay : 1.0 - stay;
      }
      t[x][y] = prob;
    }
  }
  return t;
}

Vector4 reward_vector(const SmallSystem& sys, char label) {
  sys.validate();
  const auto a = policy_actions(label);
  const double r1 = sys.r(0), r2 = sys.r(1);
  return {1.0 - (1.0 - a[0][0] * (1.0 - r1)) * (1.0 - a[0][1] * (1.0 - r2)),
          a[1][1] * (1.0 - r2), a[2][0] * (1.0 - r1), 0.0};
}

double expected_reward(const SmallSystem& sys, char label) {
  const Matrix4 t = transition_matrix(sys, label);
  const Vector4 rho = reward_vector(sys, label);
  Eigen::Matrix4d a;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) a(j, i) = t[i][j] - (i == j ? 1.0 : 0.0);
  a.row(3).setOnes();
  const Eigen::Vector4d b(0.0, 0.0, 0.0, 1.0);
  const Eigen::Vector4d phi = a.fullPivLu().solve(b);
  double out = 0.0;
  for (int i = 0; i < 4; ++i) out += phi(i) * rho[static_cast<std::size_t>(i)];
  return out;
}

double expected_reward_a(const SmallSystem& sys) {
  sys.validate();
  const double p1 = sys.p(0), p2 = sys.p(1), r1 = sys.r(0), r2 = sys.r(1);
  return 1.0 - p1 * p2 - p2 * r1 * (1.0 - p1) - p1 * r2 * (1.0 - p2) -
         r1 * r2 * (1.0 - p1) * (1.0 - p2);
}

double expected_reward_e(const SmallSystem& sys) {
  sys.validate();
  const double p1 = sys.p(0), p2 = sys.p(1), r1 = sys.r(0), r2 = sys.r(1);
  // a: both empty, b: only path 1 busy, c: only path 2 busy; (1,1) is unreachable
  const double a = (1.0 - p1) * (1.0 - p2) / (p1 + (1.0 - p1) * (1.0 - p2));
  const double rest = 1.0 - a;
  const double b = a * p1 + rest * p1 * (1.0 - p2);
  const double c = rest * (1.0 - p1) * p2;
  return a * (1.0 - r1) + b * (1.0 - r2) + c * (1.0 - r1);
}

SmallOptimum optimal_policy(const SmallSystem& sys) {
  SmallOptimum best{'A', expected_reward(sys, 'A')};
  for (char label : labels.substr(1)) {
    const double value = expected_reward(sys, label);
    if (value > best.reward + 1e-12 * (1.0 + std::abs(best.reward))) best = {label, value};
  }
  return best;
}

double region_boundary(double mu1, double mu2, double tau_d) {
  if (mu1 != mu2) throw UnsupportedError("the region boundary is only defined for equal rates");
  if (!(mu1 > 0.0)) throw InputError("rate must be positive");
  if (!(tau_d >= 0.0)) throw InputError("deadline must be non-negative");
  const double mu = mu1;
  return std::log((1.0 + std::sqrt(4.0 * std::exp(mu * tau_d) - 3.0)) / 2.0) / mu;
}

ScenarioConfig as_scenario(const SmallSystem& sys, double discount) {
  sys.validate();
  ScenarioConfig cfg;
  cfg.paths = {PathModel::constant(sys.mu1, 1), PathModel::constant(sys.mu2, 1)};
  cfg.block_size = 1;
  cfg.generation_period = sys.tau_g;
  cfg.deadline = sys.tau_d;
  cfg.discount = discount;
  return cfg;
}

Policy policy_in_model(const MdpModel& model, char label) {
  const auto actions = policy_actions(label);
  if (model.state_count() != 4 || model.space().path_count() != 2)
    throw InputError("model is not the two-queue single-slot system");
  Policy out{std::vector<std::size_t>(4), std::string(1, label)};
  for (std::size_t k = 0; k < 4; ++k) {
    const auto a = model.find_action(model_index[k], actions[k]);
    if (!a) throw InputError("policy action missing from the model");
    out.actions[model_index[k]] = *a;
  }
  return out;
}

std::optional<char> classify(const MdpModel& model, const Policy& policy) {
  for (char label : labels) {
    const Policy candidate = policy_in_model(model, label);
    if (candidate.actions == policy.actions) return label;
  }
  return std::nullopt;
}

}  // namespace pqsched::small
