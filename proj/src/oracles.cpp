#include "ciirl/oracles.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "ciirl/util.hpp"

namespace ciirl {

std::vector<double> EnumeratedModel::feature_expectation(const FeatureFn& feat, int feature_dim) const {
  std::vector<double> out(feature_dim, 0.0);
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    auto f = trajectory_features(trajectories[i], feat, feature_dim);
    double p = std::exp(log_probs[i]);
    for (int j = 0; j < feature_dim; ++j) out[j] += p * f[j];
  }
  return out;
}

std::vector<double> EnumeratedModel::state_visitation(int horizon, int n_states) const {
  std::vector<double> out(static_cast<std::size_t>(horizon) * n_states, 0.0);
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    double p = std::exp(log_probs[i]);
    const auto& traj = trajectories[i];
    for (std::size_t t = 0; t < traj.length(); ++t) out[t * n_states + traj.states[t]] += p;
  }
  return out;
}

EnumeratedModel enumerate_gibbs(const TabularMdp& mdp, std::span<const double> state_reward, int horizon) {
  if (state_reward.size() != static_cast<std::size_t>(mdp.n_states()))
    throw std::invalid_argument("enumerate_gibbs: reward has wrong length");
  if (horizon < 1) throw std::invalid_argument("enumerate_gibbs: horizon must be >= 1");
  constexpr std::size_t kGuard = 1000000;

  EnumeratedModel model;
  std::vector<double> unnormalized_logs;

  Trajectory current;
  // depth-first expansion of (s, a) prefixes; log_w carries mu0, dynamics
  // and reward factors of the prefix
  std::function<void(int, int, double)> expand = [&](int s, int t, double log_w) {
    current.states.push_back(s);
    double with_reward = log_w + state_reward[s];
    for (int a = 0; a < mdp.n_actions(); ++a) {
      current.actions.push_back(a);
      if (t + 1 == horizon) {
        if (model.trajectories.size() >= kGuard) throw TooLargeError("enumerate_gibbs: guard exceeded");
        model.trajectories.push_back(current);
        unnormalized_logs.push_back(with_reward);
      } else {
        for (const auto& succ : mdp.successors(s, a)) expand(succ.state, t + 1, with_reward + std::log(succ.prob));
      }
      current.actions.pop_back();
    }
    current.states.pop_back();
  };

  for (int s = 0; s < mdp.n_states(); ++s)
    if (mdp.initial_dist()[s] > 0.0) expand(s, 0, std::log(mdp.initial_dist()[s]));

  model.log_partition = logsumexp(unnormalized_logs);
  model.log_probs.resize(unnormalized_logs.size());
  for (std::size_t i = 0; i < unnormalized_logs.size(); ++i)
    model.log_probs[i] = unnormalized_logs[i] - model.log_partition;
  return model;
}

std::vector<double> finite_diff(const std::function<double(std::span<const double>)>& fn,
                                std::span<const double> params, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff: h must be positive");
  std::vector<double> x(params.begin(), params.end());
  std::vector<double> grad(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    double orig = x[i];
    x[i] = orig + h;
    double up = fn(x);
    x[i] = orig - h;
    double down = fn(x);
    x[i] = orig;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

std::vector<double> policy_evaluation_solve(const TabularMdp& mdp, std::span<const double> reward,
                                            std::span<const int> policy) {
  const int S = mdp.n_states();
  if (policy.size() != static_cast<std::size_t>(S)) throw std::invalid_argument("policy has wrong length");
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(S, S);
  Eigen::VectorXd r(S);
  for (int s = 0; s < S; ++s) {
    r[s] = reward[s];
    for (const auto& succ : mdp.successors(s, policy[s])) A(s, succ.state) -= mdp.discount() * succ.prob;
  }
  Eigen::VectorXd v = A.partialPivLu().solve(r);
  return std::vector<double>(v.data(), v.data() + v.size());
}

double discrete_js(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("discrete_js: size mismatch");
  auto kl_to_mix = [&](std::span<const double> a) {
    double out = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] <= 0.0) continue;
      double m = 0.5 * (p[i] + q[i]);
      out += a[i] * std::log(a[i] / m);
    }
    return out;
  };
  return 0.5 * kl_to_mix(p) + 0.5 * kl_to_mix(q);
}

}  // namespace ciirl
