#pragma once

#include <functional>
#include <span>
#include <vector>

#include "ciirl/mdp.hpp"
#include "ciirl/trajectories.hpp"

namespace ciirl {

struct TooLargeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Exhaustive enumeration of the Gibbs trajectory model: every state-action
/// sequence of `horizon` steps with nonzero dynamics probability, with exact
/// normalized log-probabilities
///   log p(xi) = log mu0(s_1) + sum_t log p(s_{t+1}|s_t,a_t) + sum_t r(s_t) - log Z.
struct EnumeratedModel {
  std::vector<Trajectory> trajectories;
  std::vector<double> log_probs;
  double log_partition = 0.0;

  /// Expected feature sums under the enumerated model: sum_xi p(xi) phi(xi).
  std::vector<double> feature_expectation(const FeatureFn& feat, int feature_dim) const;
  /// Per-timestep state occupancy (horizon x n_states, flattened).
  std::vector<double> state_visitation(int horizon, int n_states) const;
};

/// Brute-force Gibbs enumeration; exponential by design and guarded: throws
/// TooLargeError when the trajectory count would exceed one million.
EnumeratedModel enumerate_gibbs(const TabularMdp& mdp, std::span<const double> state_reward, int horizon);

/// Central-difference gradient of an arbitrary scalar function.
std::vector<double> finite_diff(const std::function<double(std::span<const double>)>& fn,
                                std::span<const double> params, double h);

/// Exact policy evaluation by solving (I - gamma P_pi) v = r, independent of
/// the iterative solver.
std::vector<double> policy_evaluation_solve(const TabularMdp& mdp, std::span<const double> reward,
                                            std::span<const int> policy);

/// Jensen-Shannon divergence of two discrete distributions (natural log).
double discrete_js(std::span<const double> p, std::span<const double> q);

}  // namespace ciirl
