#pragma once

#include <vector>

#include "ciirl/mdp.hpp"
#include "ciirl/util.hpp"

namespace ciirl::testing {

// random stochastic MDP; point-mass initial state unless spread_start
inline TabularMdp make_random_mdp(int n_states, int n_actions, int horizon, std::uint64_t seed,
                                  bool deterministic = false, bool spread_start = false) {
  Rng rng(seed);
  std::vector<double> transition(static_cast<std::size_t>(n_states) * n_actions * n_states, 0.0);
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a) {
      double* row = &transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states];
      if (deterministic) {
        row[rng.uniform_int(n_states)] = 1.0;
      } else {
        double sum = 0.0;
        for (int s2 = 0; s2 < n_states; ++s2) {
          row[s2] = rng.uniform() < 0.6 ? rng.uniform() : 0.0;
          sum += row[s2];
        }
        if (sum == 0.0) {
          row[rng.uniform_int(n_states)] = 1.0;
          sum = 1.0;
        }
        for (int s2 = 0; s2 < n_states; ++s2) row[s2] /= sum;
        // renormalize exactly
        double check = 0.0;
        for (int s2 = 0; s2 < n_states - 1; ++s2) check += row[s2];
        row[n_states - 1] = 1.0 - check;
        if (row[n_states - 1] < 0.0) row[n_states - 1] = 0.0;
        double final_sum = 0.0;
        for (int s2 = 0; s2 < n_states; ++s2) final_sum += row[s2];
        for (int s2 = 0; s2 < n_states; ++s2) row[s2] /= final_sum;
      }
    }
  std::vector<double> mu0(n_states, 0.0);
  if (spread_start) {
    double sum = 0.0;
    for (int s = 0; s < n_states; ++s) {
      mu0[s] = 0.1 + rng.uniform();
      sum += mu0[s];
    }
    for (int s = 0; s < n_states; ++s) mu0[s] /= sum;
    double check = 0.0;
    for (int s = 0; s + 1 < n_states; ++s) check += mu0[s];
    mu0[n_states - 1] = 1.0 - check;
  } else {
    mu0[0] = 1.0;
  }
  return TabularMdp(n_states, n_actions, std::move(transition), std::move(mu0), 0.9, horizon);
}

inline std::vector<double> make_random_reward(int n_states, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::vector<double> r(n_states);
  for (double& v : r) v = rng.uniform(-scale, scale);
  return r;
}

// right/stay chain with absorbing last state
inline TabularMdp make_chain_mdp(int n_states, int horizon, bool absorbing_end = false) {
  const int A = 2;  // 0 = advance, 1 = stay
  std::vector<double> transition(static_cast<std::size_t>(n_states) * A * n_states, 0.0);
  for (int s = 0; s < n_states; ++s) {
    int nxt = std::min(s + 1, n_states - 1);
    if (absorbing_end && s == n_states - 1) nxt = s;
    transition[(static_cast<std::size_t>(s) * A + 0) * n_states + nxt] = 1.0;
    transition[(static_cast<std::size_t>(s) * A + 1) * n_states + s] = 1.0;
  }
  std::vector<double> mu0(n_states, 0.0);
  mu0[0] = 1.0;
  return TabularMdp(n_states, A, std::move(transition), std::move(mu0), 0.9, horizon);
}

}  // namespace ciirl::testing
