#include "ciirl/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ciirl/util.hpp"

namespace ciirl {

namespace {

void check_finite(std::span<const double> reward, std::size_t expected, const char* what) {
  if (reward.size() != expected) throw std::invalid_argument(std::string(what) + ": reward has wrong length");
  for (double r : reward)
    if (!std::isfinite(r)) throw std::invalid_argument(std::string(what) + ": non-finite reward entry");
}

}  // namespace

double SoftPolicy::log_partition(const TabularMdp& mdp) const {
  std::vector<double> terms;
  terms.reserve(n_states);
  for (int s = 0; s < n_states; ++s) {
    double mu = mdp.initial_dist()[s];
    if (mu > 0.0) terms.push_back(std::log(mu) + value(0, s));
  }
  return logsumexp(terms);
}

HardPolicy value_iteration(const TabularMdp& mdp, std::span<const double> reward, double tol) {
  check_finite(reward, static_cast<std::size_t>(mdp.n_states()), "value_iteration");
  if (!(tol > 0.0)) throw std::invalid_argument("value_iteration: tol must be positive");
  const int S = mdp.n_states(), A = mdp.n_actions();
  const double gamma = mdp.discount();
  std::vector<double> v(S, 0.0), v_next(S, 0.0);
  double residual = std::numeric_limits<double>::infinity();
  // gamma-contraction: the residual shrinks geometrically
  const int max_iters = 1000000;
  int iter = 0;
  while (residual > tol && iter++ < max_iters) {
    residual = 0.0;
    for (int s = 0; s < S; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < A; ++a) {
        double ev = 0.0;
        for (const auto& succ : mdp.successors(s, a)) ev += succ.prob * v[succ.state];
        best = std::max(best, reward[s] + gamma * ev);
      }
      v_next[s] = best;
      residual = std::max(residual, std::abs(v_next[s] - v[s]));
    }
    std::swap(v, v_next);
  }
  HardPolicy out;
  out.values = v;
  out.residual = residual * gamma;  // one extra application bounds the Bellman residual
  out.action.assign(S, 0);
  for (int s = 0; s < S; ++s) {
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < A; ++a) {
      double ev = 0.0;
      for (const auto& succ : mdp.successors(s, a)) ev += succ.prob * v[succ.state];
      double q = reward[s] + gamma * ev;
      if (q > best) {
        best = q;
        out.action[s] = a;
      }
    }
  }
  return out;
}

namespace {

SoftPolicy soft_backup(const TabularMdp& mdp, std::span<const double> reward, bool state_action) {
  const int S = mdp.n_states(), A = mdp.n_actions(), T = mdp.horizon();
  SoftPolicy pol;
  pol.horizon = T;
  pol.n_states = S;
  pol.n_actions = A;
  pol.probs.assign(static_cast<std::size_t>(T) * S * A, 0.0);
  pol.soft_q.assign(static_cast<std::size_t>(T) * S * A, 0.0);
  pol.soft_values.assign(static_cast<std::size_t>(T + 1) * S, 0.0);

  std::vector<double> q_row(A);
  for (int t = T - 1; t >= 0; --t) {
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        double ev = 0.0;
        for (const auto& succ : mdp.successors(s, a)) ev += succ.prob * pol.value(t + 1, succ.state);
        double r = state_action ? reward[static_cast<std::size_t>(s) * A + a] : reward[s];
        q_row[a] = r + ev;
      }
      double v = logsumexp(q_row);
      pol.soft_values[static_cast<std::size_t>(t) * S + s] = v;
      std::size_t base = (static_cast<std::size_t>(t) * S + s) * A;
      for (int a = 0; a < A; ++a) {
        pol.soft_q[base + a] = q_row[a];
        pol.probs[base + a] = std::exp(q_row[a] - v);
      }
    }
  }
  return pol;
}

}  // namespace

SoftPolicy soft_value_iteration(const TabularMdp& mdp, std::span<const double> state_reward) {
  check_finite(state_reward, static_cast<std::size_t>(mdp.n_states()), "soft_value_iteration");
  return soft_backup(mdp, state_reward, false);
}

SoftPolicy soft_value_iteration_sa(const TabularMdp& mdp, std::span<const double> sa_reward) {
  check_finite(sa_reward, static_cast<std::size_t>(mdp.n_states()) * mdp.n_actions(), "soft_value_iteration");
  return soft_backup(mdp, sa_reward, true);
}

namespace {

template <typename ActionFn>
RolloutResult rollout_impl(const TabularMdp& mdp, std::span<const double> truth, int n, std::uint64_t seed,
                           double return_discount, ActionFn select_action) {
  if (n < 1) throw std::invalid_argument("rollout: n must be >= 1");
  check_finite(truth, static_cast<std::size_t>(mdp.n_states()), "rollout");
  const int T = mdp.horizon();
  Rng rng(seed);
  RolloutResult out;
  out.trajectories.reserve(n);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    Trajectory traj;
    int s = rng.categorical(mdp.initial_dist());
    double ret = 0.0, disc = 1.0;
    for (int t = 0; t < T; ++t) {
      traj.states.push_back(s);
      traj.actions.push_back(select_action(t, s, rng));
      ret += disc * truth[s];
      disc *= return_discount;
      if (mdp.is_absorbing(s)) break;
      auto succ = mdp.successors(s, traj.actions.back());
      if (succ.size() == 1) {
        s = succ[0].state;
      } else {
        double u = rng.uniform();
        double acc = 0.0;
        int next = succ.back().state;
        for (const auto& sp : succ) {
          acc += sp.prob;
          if (u < acc) {
            next = sp.state;
            break;
          }
        }
        s = next;
      }
    }
    total += ret;
    out.trajectories.push_back(std::move(traj));
  }
  out.mean_return = total / static_cast<double>(n);
  return out;
}

}  // namespace

RolloutResult rollout(const TabularMdp& mdp, const SoftPolicy& policy, std::span<const double> truth, int n,
                      std::uint64_t seed, double return_discount) {
  if (policy.horizon != mdp.horizon() || policy.n_states != mdp.n_states())
    throw std::invalid_argument("rollout: policy does not match mdp");
  auto result = rollout_impl(mdp, truth, n, seed, return_discount, [&](int t, int s, Rng& rng) {
    std::size_t base = (static_cast<std::size_t>(t) * policy.n_states + s) * policy.n_actions;
    return rng.categorical({&policy.probs[base], static_cast<std::size_t>(policy.n_actions)});
  });
  return result;
}

RolloutResult rollout(const TabularMdp& mdp, const HardPolicy& policy, std::span<const double> truth, int n,
                      std::uint64_t seed, double return_discount) {
  if (policy.action.size() != static_cast<std::size_t>(mdp.n_states()))
    throw std::invalid_argument("rollout: policy does not match mdp");
  return rollout_impl(mdp, truth, n, seed, return_discount,
                      [&](int, int s, Rng&) { return policy.action[s]; });
}

double trajectory_log_prob(const TabularMdp& mdp, const SoftPolicy& policy, const Trajectory& traj) {
  if (traj.length() == 0) throw std::invalid_argument("empty trajectory");
  double lp = std::log(mdp.initial_dist()[traj.states[0]]);
  for (std::size_t t = 0; t < traj.length(); ++t) {
    lp += std::log(policy.prob(static_cast<int>(t), traj.states[t], traj.actions[t]));
    if (t + 1 < traj.length()) lp += std::log(mdp.transition(traj.states[t], traj.actions[t], traj.states[t + 1]));
  }
  return lp;
}

double trajectory_log_dynamics(const TabularMdp& mdp, const Trajectory& traj) {
  if (traj.length() == 0) throw std::invalid_argument("empty trajectory");
  double lp = std::log(mdp.initial_dist()[traj.states[0]]);
  for (std::size_t t = 0; t + 1 < traj.length(); ++t)
    lp += std::log(mdp.transition(traj.states[t], traj.actions[t], traj.states[t + 1]));
  return lp;
}

}  // namespace ciirl
