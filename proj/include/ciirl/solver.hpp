#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ciirl/mdp.hpp"
#include "ciirl/trajectories.hpp"

namespace ciirl {

/// Finite-horizon stochastic policy from the maximum-causal-entropy backup.
/// probs[t,s,a] = exp(Q(t,s,a) - V(t,s)), V(t,s) = logsumexp_a Q(t,s,a).
struct SoftPolicy {
  int horizon = 0;
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> probs;        // (t, s, a)
  std::vector<double> soft_values;  // (t, s) for t = 0..horizon, V(horizon,.) = 0
  std::vector<double> soft_q;       // (t, s, a)

  double prob(int t, int s, int a) const {
    return probs[(static_cast<std::size_t>(t) * n_states + s) * n_actions + a];
  }
  double value(int t, int s) const { return soft_values[static_cast<std::size_t>(t) * n_states + s]; }
  double q(int t, int s, int a) const {
    return soft_q[(static_cast<std::size_t>(t) * n_states + s) * n_actions + a];
  }
  /// logsumexp over initial states of log mu0(s) + V(0,s).
  double log_partition(const TabularMdp& mdp) const;
};

/// Greedy policy and values from discounted hard value iteration.
struct HardPolicy {
  std::vector<int> action;
  std::vector<double> values;
  double residual = 0.0;
};

/// Discounted infinite-horizon value iteration, iterated until the sup-norm
/// Bellman residual of the returned values is <= tol. Q(s,a) = r(s) +
/// gamma * E[V(s')]; ties broken by lowest action index.
HardPolicy value_iteration(const TabularMdp& mdp, std::span<const double> reward, double tol = 1e-9);

/// Undiscounted finite-horizon soft backup over t = T-1..0 with terminal
/// V(T,.) = 0 and Q(t,s,a) = reward[s] + E[V(t+1,s')].
SoftPolicy soft_value_iteration(const TabularMdp& mdp, std::span<const double> state_reward);

/// State-action-reward variant: Q(t,s,a) = reward[s*A+a] + E[V(t+1,s')].
SoftPolicy soft_value_iteration_sa(const TabularMdp& mdp, std::span<const double> sa_reward);

struct RolloutResult {
  std::vector<Trajectory> trajectories;
  double mean_return = 0.0;  // mean undiscounted ground-truth return
};

/// Samples n episodes. Episodes stop at the horizon or one step after
/// entering an absorbing state (the absorbing state is recorded once).
/// Reproducible given the seed. `truth` scores each trajectory.
RolloutResult rollout(const TabularMdp& mdp, const SoftPolicy& policy, std::span<const double> truth, int n,
                      std::uint64_t seed, double return_discount = 1.0);
RolloutResult rollout(const TabularMdp& mdp, const HardPolicy& policy, std::span<const double> truth, int n,
                      std::uint64_t seed, double return_discount = 1.0);

/// Exact log-probability of a recorded trajectory under mu0, the policy and
/// the dynamics (the final transition out of the last pair is marginalized).
double trajectory_log_prob(const TabularMdp& mdp, const SoftPolicy& policy, const Trajectory& traj);

/// log mu0(s_1) + sum of log transition probabilities along the trajectory.
double trajectory_log_dynamics(const TabularMdp& mdp, const Trajectory& traj);

}  // namespace ciirl
