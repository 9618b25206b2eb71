#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "acesearcher/common.hpp"

namespace acesearcher::theory {

using Vector = std::vector<double>;
using Matrix = std::vector<Vector>;  // row per decomposition

/// One question, finitely many decompositions z and solution outcomes (w, a').
struct DiscreteSelfPlayEnv {
  std::vector<std::string> z_space;
  std::vector<std::string> wa_space;
  Vector rho_ref;
  Matrix pi_ref;
  Matrix reward;  // reward[z][wa] in [0, 1]
  double beta = 0.1;

  std::size_t nz() const noexcept { return z_space.size(); }
  std::size_t nwa() const noexcept { return wa_space.size(); }

  /// Reference cells must be >= kMinReferenceMass and every distribution must
  /// sum to 1 within kSumTolerance. Throws Error(invalid_argument).
  void validate() const;
};

inline constexpr double kMinReferenceMass = 1e-9;
inline constexpr double kSumTolerance = 1e-12;

struct PolicyTable {
  Vector rho;
  Matrix pi;

  /// Non-negative cells (zeros allowed, since KL(p||ref) stays finite) with
  /// distributions summing to 1 within kSumTolerance.
  void validate(std::size_t nz, std::size_t nwa) const;
};

PolicyTable reference_policy(const DiscreteSelfPlayEnv& env);

/// E[r] - beta*KL(rho||rho_ref) - beta*E_rho[KL(pi||pi_ref)].
double objective_value(const DiscreteSelfPlayEnv& env, const PolicyTable& policy);

struct KlGap {
  double lhs = 0.0;  // KL of the joint against the joint reference
  double rhs = 0.0;  // decomposer KL plus expected solver KL
};

KlGap kl_decomposition_gap(const DiscreteSelfPlayEnv& env, const PolicyTable& policy);

/// pi*(wa|z) proportional to pi_ref(wa|z) exp(r(z,wa)/beta).
Matrix solver_closed_form(const DiscreteSelfPlayEnv& env);

/// rho*(z) proportional to rho_ref(z) * sum_wa pi_ref(wa|z) exp(r(z,wa)/beta).
Vector decomposer_closed_form(const DiscreteSelfPlayEnv& env);

PolicyTable closed_form_policy(const DiscreteSelfPlayEnv& env);

struct GridResult {
  double closed_form_value = 0.0;
  double grid_max_value = 0.0;
  std::size_t evaluated = 0;
};

/// Brute-force maximum of the objective over a simplex grid with spacing
/// `resolution` in every distribution. Limited to |Z| <= 2 and |WA| <= 3.
GridResult grid_verify_optimality(const DiscreteSelfPlayEnv& env, double resolution);

/// Iterates u_t proportional to u_{t-1} exp(r/beta) on the joint, starting from
/// the reference. Element 0 is the reference, element t the t-th iterate.
std::vector<PolicyTable> iterate_policy_update(const DiscreteSelfPlayEnv& env, int steps);

/// Joint probability of (z, wa).
double joint_mass(const PolicyTable& policy, std::size_t z, std::size_t wa);

DiscreteSelfPlayEnv random_env(std::mt19937_64& rng, std::size_t nz, std::size_t nwa, double beta);
PolicyTable random_policy(std::mt19937_64& rng, std::size_t nz, std::size_t nwa);

/// Numerical checks run by the theory-check command.
struct TheoryCheck {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double threshold = 0.0;
  std::string detail;
};

struct TheorySuiteOptions {
  std::uint64_t seed = 0;
  int kl_envs = 1000;
  int dominance_envs = 50;
  int dominance_policies = 10000;
  int grid_envs = 20;
  double grid_resolution = 0.02;
  int iteration_envs = 100;
  int iteration_steps = 20;
};

struct TheorySuiteReport {
  std::vector<TheoryCheck> checks;
  bool passed() const noexcept;
};

TheorySuiteReport run_theory_suite(const TheorySuiteOptions& options = {});
nlohmann::json to_json(const TheorySuiteReport& report);

}  // namespace acesearcher::theory
