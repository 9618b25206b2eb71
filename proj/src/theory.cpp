#include "acesearcher/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "acesearcher/common.hpp"

namespace acesearcher::theory {

namespace {

double log_sum_exp(const Vector& xs) {
  const double hi = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - hi);
  return hi + std::log(acc);
}

/// exp(x - lse(x)), renormalized so the sum is 1 to rounding.
Vector softmax(const Vector& logits) {
  const double lse = log_sum_exp(logits);
  Vector p(logits.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::exp(logits[i] - lse);
  const double s = std::accumulate(p.begin(), p.end(), 0.0);
  for (double& x : p) x /= s;
  return p;
}

double kl(const Vector& p, const Vector& q) {
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) acc += p[i] * (std::log(p[i]) - std::log(q[i]));
  return acc;
}

void check_distribution(const Vector& p, std::size_t size, double min_cell, const std::string& what) {
  if (p.size() != size)
    throw Error(ErrorCode::invalid_argument, what + " has " + std::to_string(p.size()) + " cells, expected " +
                                                 std::to_string(size));
  double sum = 0.0;
  for (double x : p) {
    if (!std::isfinite(x) || x < min_cell)
      throw Error(ErrorCode::invalid_argument,
                  what + " has a cell below " + format_double(min_cell) + ": " + format_double(x));
    sum += x;
  }
  if (std::fabs(sum - 1.0) > kSumTolerance)
    throw Error(ErrorCode::invalid_argument, what + " sums to " + format_double(sum));
}

// Objective without validation, for the grid search inner loop.
double objective_raw(const DiscreteSelfPlayEnv& env, const Vector& rho, const Matrix& pi) {
  double value = -env.beta * kl(rho, env.rho_ref);
  for (std::size_t z = 0; z < rho.size(); ++z) {
    if (rho[z] <= 0.0) continue;
    double expected = 0.0;
    for (std::size_t a = 0; a < pi[z].size(); ++a) expected += pi[z][a] * env.reward[z][a];
    value += rho[z] * (expected - env.beta * kl(pi[z], env.pi_ref[z]));
  }
  return value;
}

/// Every vector of `parts` multiples of 1/K summing to 1.
std::vector<Vector> simplex_grid(std::size_t parts, long long K) {
  std::vector<Vector> out;
  std::vector<long long> counts(parts, 0);
  auto rec = [&](auto&& self, std::size_t i, long long left) -> void {
    if (i + 1 == parts) {
      counts[i] = left;
      Vector v(parts);
      for (std::size_t j = 0; j < parts; ++j) v[j] = static_cast<double>(counts[j]) / static_cast<double>(K);
      out.push_back(std::move(v));
      return;
    }
    for (long long c = 0; c <= left; ++c) {
      counts[i] = c;
      self(self, i + 1, left - c);
    }
  };
  rec(rec, 0, K);
  return out;
}

Vector random_simplex(std::mt19937_64& rng, std::size_t n, double lo) {
  std::uniform_real_distribution<double> u(lo, 1.0);
  Vector v(n);
  for (double& x : v) x = u(rng);
  const double s = std::accumulate(v.begin(), v.end(), 0.0);
  for (double& x : v) x /= s;
  return v;
}

double max_sum_deviation(const PolicyTable& p) {
  double worst = std::fabs(std::accumulate(p.rho.begin(), p.rho.end(), 0.0) - 1.0);
  for (const auto& row : p.pi) worst = std::max(worst, std::fabs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0));
  return worst;
}

}  // namespace

void DiscreteSelfPlayEnv::validate() const {
  if (z_space.empty() || wa_space.empty())
    throw Error(ErrorCode::invalid_argument, "environment needs at least one decomposition and one outcome");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw Error(ErrorCode::invalid_argument, "beta must be positive");
  check_distribution(rho_ref, nz(), kMinReferenceMass, "rho_ref");
  if (pi_ref.size() != nz() || reward.size() != nz())
    throw Error(ErrorCode::invalid_argument, "pi_ref and reward need one row per decomposition");
  for (std::size_t z = 0; z < nz(); ++z) {
    check_distribution(pi_ref[z], nwa(), kMinReferenceMass, "pi_ref row " + std::to_string(z));
    if (reward[z].size() != nwa())
      throw Error(ErrorCode::invalid_argument, "reward row " + std::to_string(z) + " has the wrong width");
    for (double r : reward[z])
      if (!(r >= 0.0 && r <= 1.0)) throw Error(ErrorCode::invalid_argument, "reward outside [0, 1]");
  }
}

void PolicyTable::validate(std::size_t nz, std::size_t nwa) const {
  check_distribution(rho, nz, 0.0, "rho");
  if (pi.size() != nz) throw Error(ErrorCode::invalid_argument, "pi needs one row per decomposition");
  for (std::size_t z = 0; z < nz; ++z) check_distribution(pi[z], nwa, 0.0, "pi row " + std::to_string(z));
}

PolicyTable reference_policy(const DiscreteSelfPlayEnv& env) { return PolicyTable{env.rho_ref, env.pi_ref}; }

double objective_value(const DiscreteSelfPlayEnv& env, const PolicyTable& policy) {
  env.validate();
  policy.validate(env.nz(), env.nwa());
  return objective_raw(env, policy.rho, policy.pi);
}

KlGap kl_decomposition_gap(const DiscreteSelfPlayEnv& env, const PolicyTable& policy) {
  env.validate();
  policy.validate(env.nz(), env.nwa());
  KlGap gap;
  for (std::size_t z = 0; z < env.nz(); ++z) {
    for (std::size_t a = 0; a < env.nwa(); ++a) {
      const double u = policy.rho[z] * policy.pi[z][a];
      const double u_ref = env.rho_ref[z] * env.pi_ref[z][a];
      if (u > 0.0) gap.lhs += u * std::log(u / u_ref);
    }
  }
  gap.rhs = kl(policy.rho, env.rho_ref);
  for (std::size_t z = 0; z < env.nz(); ++z) gap.rhs += policy.rho[z] * kl(policy.pi[z], env.pi_ref[z]);
  return gap;
}

namespace {

Vector log_partitions(const DiscreteSelfPlayEnv& env) {
  Vector log_z(env.nz());
  for (std::size_t z = 0; z < env.nz(); ++z) {
    Vector logits(env.nwa());
    for (std::size_t a = 0; a < env.nwa(); ++a) logits[a] = std::log(env.pi_ref[z][a]) + env.reward[z][a] / env.beta;
    log_z[z] = log_sum_exp(logits);
  }
  return log_z;
}

}  // namespace

Matrix solver_closed_form(const DiscreteSelfPlayEnv& env) {
  env.validate();
  Matrix pi(env.nz());
  for (std::size_t z = 0; z < env.nz(); ++z) {
    Vector logits(env.nwa());
    for (std::size_t a = 0; a < env.nwa(); ++a) logits[a] = std::log(env.pi_ref[z][a]) + env.reward[z][a] / env.beta;
    pi[z] = softmax(logits);
  }
  return pi;
}

Vector decomposer_closed_form(const DiscreteSelfPlayEnv& env) {
  env.validate();
  const Vector log_z = log_partitions(env);
  Vector logits(env.nz());
  for (std::size_t z = 0; z < env.nz(); ++z) logits[z] = std::log(env.rho_ref[z]) + log_z[z];
  return softmax(logits);
}

PolicyTable closed_form_policy(const DiscreteSelfPlayEnv& env) {
  return PolicyTable{decomposer_closed_form(env), solver_closed_form(env)};
}

GridResult grid_verify_optimality(const DiscreteSelfPlayEnv& env, double resolution) {
  if (!(resolution > 0.0) || resolution > 1.0)
    throw Error(ErrorCode::invalid_argument, "grid resolution must lie in (0, 1]");
  env.validate();
  if (env.nz() > 2 || env.nwa() > 3)
    throw Error(ErrorCode::invalid_argument, "grid search is limited to |Z| <= 2 and |WA| <= 3");

  const long long K = std::max(1LL, std::llround(1.0 / resolution));
  const auto rho_grid = simplex_grid(env.nz(), K);
  const auto pi_grid = simplex_grid(env.nwa(), K);

  GridResult result;
  result.closed_form_value = objective_value(env, closed_form_policy(env));
  result.grid_max_value = -std::numeric_limits<double>::infinity();

  Matrix pi(env.nz());
  std::vector<std::size_t> pick(env.nz(), 0);
  for (const auto& rho : rho_grid) {
    std::fill(pick.begin(), pick.end(), 0);
    for (;;) {
      for (std::size_t z = 0; z < env.nz(); ++z) pi[z] = pi_grid[pick[z]];
      result.grid_max_value = std::max(result.grid_max_value, objective_raw(env, rho, pi));
      ++result.evaluated;
      std::size_t z = 0;
      while (z < pick.size() && ++pick[z] == pi_grid.size()) pick[z++] = 0;
      if (z == pick.size()) break;
    }
  }
  return result;
}

std::vector<PolicyTable> iterate_policy_update(const DiscreteSelfPlayEnv& env, int steps) {
  if (steps < 1) throw Error(ErrorCode::invalid_argument, "steps must be at least 1");
  env.validate();

  Matrix log_u(env.nz(), Vector(env.nwa()));
  for (std::size_t z = 0; z < env.nz(); ++z)
    for (std::size_t a = 0; a < env.nwa(); ++a) log_u[z][a] = std::log(env.rho_ref[z]) + std::log(env.pi_ref[z][a]);

  auto to_policy = [&] {
    PolicyTable p;
    Vector row_lse(env.nz());
    for (std::size_t z = 0; z < env.nz(); ++z) {
      row_lse[z] = log_sum_exp(log_u[z]);
      Vector logits(env.nwa());
      for (std::size_t a = 0; a < env.nwa(); ++a) logits[a] = log_u[z][a] - row_lse[z];
      p.pi.push_back(softmax(logits));
    }
    p.rho = softmax(row_lse);
    return p;
  };

  std::vector<PolicyTable> out;
  out.push_back(reference_policy(env));
  for (int t = 0; t < steps; ++t) {
    Vector flat;
    for (std::size_t z = 0; z < env.nz(); ++z)
      for (std::size_t a = 0; a < env.nwa(); ++a) {
        log_u[z][a] += env.reward[z][a] / env.beta;
        flat.push_back(log_u[z][a]);
      }
    const double lse = log_sum_exp(flat);
    for (auto& row : log_u)
      for (double& x : row) x -= lse;
    out.push_back(to_policy());
  }
  return out;
}

double joint_mass(const PolicyTable& policy, std::size_t z, std::size_t wa) { return policy.rho.at(z) * policy.pi.at(z).at(wa); }

DiscreteSelfPlayEnv random_env(std::mt19937_64& rng, std::size_t nz, std::size_t nwa, double beta) {
  DiscreteSelfPlayEnv env;
  for (std::size_t z = 0; z < nz; ++z) env.z_space.push_back("z" + std::to_string(z + 1));
  for (std::size_t a = 0; a < nwa; ++a) env.wa_space.push_back("o" + std::to_string(a + 1));
  env.rho_ref = random_simplex(rng, nz, 0.05);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t z = 0; z < nz; ++z) {
    env.pi_ref.push_back(random_simplex(rng, nwa, 0.05));
    Vector row(nwa);
    for (double& r : row) r = unit(rng);
    env.reward.push_back(std::move(row));
  }
  env.beta = beta;
  return env;
}

PolicyTable random_policy(std::mt19937_64& rng, std::size_t nz, std::size_t nwa) {
  PolicyTable p;
  p.rho = random_simplex(rng, nz, 1e-6);
  for (std::size_t z = 0; z < nz; ++z) p.pi.push_back(random_simplex(rng, nwa, 1e-6));
  return p;
}

// ---------------------------------------------------------------------------
// Suite

bool TheorySuiteReport::passed() const noexcept {
  return std::all_of(checks.begin(), checks.end(), [](const TheoryCheck& c) { return c.passed; });
}

TheorySuiteReport run_theory_suite(const TheorySuiteOptions& options) {
  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<std::size_t> pick_z(1, 5), pick_wa(1, 6);
  const double betas[] = {0.1, 1.0, 10.0};
  TheorySuiteReport report;
  double worst_sum = 0.0;

  {
    double worst = 0.0;
    for (int i = 0; i < options.kl_envs; ++i) {
      auto env = random_env(rng, pick_z(rng), pick_wa(rng), betas[i % 3]);
      auto gap = kl_decomposition_gap(env, random_policy(rng, env.nz(), env.nwa()));
      worst = std::max(worst, std::fabs(gap.lhs - gap.rhs));
    }
    report.checks.push_back({"kl_decomposition", worst <= 1e-9, worst, 1e-9,
                             std::to_string(options.kl_envs) + " random environments, max |lhs - rhs|"});
  }

  {
    double worst = std::numeric_limits<double>::infinity();
    std::uniform_real_distribution<double> mix(0.0, 1.0);
    for (int i = 0; i < options.dominance_envs; ++i) {
      auto env = random_env(rng, pick_z(rng), pick_wa(rng), betas[i % 3]);
      const auto star = closed_form_policy(env);
      worst_sum = std::max(worst_sum, max_sum_deviation(star));
      const double best = objective_raw(env, star.rho, star.pi);
      for (int j = 0; j < options.dominance_policies; ++j) {
        auto p = random_policy(rng, env.nz(), env.nwa());
        if (j % 2 == 1) {
          // Half the probes sit close to the optimum.
          const double w = 1e-3 * mix(rng);
          for (std::size_t z = 0; z < env.nz(); ++z) {
            p.rho[z] = (1 - w) * star.rho[z] + w * p.rho[z];
            for (std::size_t a = 0; a < env.nwa(); ++a) p.pi[z][a] = (1 - w) * star.pi[z][a] + w * p.pi[z][a];
          }
        }
        worst = std::min(worst, best - objective_raw(env, p.rho, p.pi));
      }
    }
    report.checks.push_back({"closed_form_dominance", worst >= -1e-12, worst, -1e-12,
                             "min of J(closed form) - J(random policy)"});
  }

  {
    double worst = std::numeric_limits<double>::infinity();
    for (int i = 0; i < options.grid_envs; ++i) {
      auto env = random_env(rng, 2, 2, betas[i % 3]);
      auto g = grid_verify_optimality(env, options.grid_resolution);
      worst = std::min(worst, g.closed_form_value - g.grid_max_value);
    }
    report.checks.push_back({"grid_optimality", worst >= -1e-3, worst, -1e-3,
                             "min of J(closed form) - grid max at resolution " + format_double(options.grid_resolution)});
  }

  {
    double lowest_final = 1.0;
    bool monotone = true;
    std::uniform_real_distribution<double> low(0.0, 0.5);
    for (int i = 0; i < options.iteration_envs; ++i) {
      auto env = random_env(rng, pick_z(rng), pick_wa(rng), 0.1);
      for (auto& row : env.reward)
        for (double& r : row) r = low(rng);
      const std::size_t bz = rng() % env.nz(), ba = rng() % env.nwa();
      env.reward[bz][ba] = 1.0;
      const auto iterates = iterate_policy_update(env, options.iteration_steps);
      for (std::size_t t = 1; t < iterates.size(); ++t) {
        worst_sum = std::max(worst_sum, max_sum_deviation(iterates[t]));
        if (joint_mass(iterates[t], bz, ba) < joint_mass(iterates[t - 1], bz, ba)) monotone = false;
      }
      lowest_final = std::min(lowest_final, joint_mass(iterates.back(), bz, ba));
    }
    report.checks.push_back({"iterate_concentration", monotone && lowest_final > 0.999, lowest_final, 0.999,
                             std::string("argmax mass after ") + std::to_string(options.iteration_steps) +
                                 " steps (min over environments); monotone: " + (monotone ? "yes" : "no")});
  }

  report.checks.push_back({"normalization", worst_sum <= kSumTolerance, worst_sum, kSumTolerance,
                           "max |sum - 1| over returned distributions"});
  return report;
}

nlohmann::json to_json(const TheorySuiteReport& report) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : report.checks)
    checks.push_back({{"name", c.name},
                      {"passed", c.passed},
                      {"measured", c.measured},
                      {"threshold", c.threshold},
                      {"detail", c.detail}});
  return {{"passed", report.passed()}, {"checks", std::move(checks)}};
}

}  // namespace acesearcher::theory
