#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "ciirl/features.hpp"
#include "ciirl/maxent.hpp"
#include "ciirl/mdp.hpp"
#include "ciirl/solver.hpp"
#include "ciirl/trajectories.hpp"

namespace ciirl {

/// Transition classifier: logit z(s,a) = head . phi(s,a), g_D = sigmoid(z).
/// In state-only mode the action is not observed and z depends on s alone.
struct Discriminator {
  FeatureNet net;
  Eigen::VectorXd head;
  int n_actions = 1;
  bool state_only = false;

  int item(int s, int a) const { return state_only ? s : s * n_actions + a; }
  double logit(int s, int a) { return head.dot(net.forward(item(s, a))); }
  /// All logits as a state-action reward table (s*A+a), the log g - log(1-g)
  /// reward of the classifier.
  std::vector<double> sa_logits();
  /// Per-state reward summary (mean logit over actions), for rendering and
  /// transfer evaluation.
  std::vector<double> state_rewards();
};

Discriminator make_discriminator(const Gridworld& gw, InputEncoding encoding,
                                 const std::vector<int>& hidden_dims, int output_dim, Activation activation,
                                 std::uint64_t seed, bool state_only = false);

using TransitionBatch = std::vector<std::pair<int, int>>;  // (state, action)

TransitionBatch transitions_of(const SettingDataset& ds);
TransitionBatch transitions_of(const std::vector<Trajectory>& trajs);

/// Binary cross-entropy discrimination between expert and policy batches.
/// `objective` is the maximization-form value E_E[log g] + E_P[log(1-g)];
/// at the optimal classifier it equals 2 JS(p||q) - log 4, so js_estimate =
/// (objective + log 4) / 2, clipped to [0, log 2]. Gradients are of the
/// minimization loss (-objective).
struct BceResult {
  double objective = 0.0;
  double loss = 0.0;
  double js_estimate = 0.0;
  FeatureNet::Grads loss_grads;
  Eigen::VectorXd head_loss_grads;
};
BceResult bce_loss(Discriminator& disc, const TransitionBatch& expert, const TransitionBatch& policy);

/// Scalar-predictor CI penalty of the BCE loss with the logit scaled by w,
/// evaluated at w = 1; exact parameter gradients.
struct CiBceResult {
  double penalty = 0.0;
  double dloss_dw = 0.0;
  FeatureNet::Grads grads;
  Eigen::VectorXd head_grads;
};
CiBceResult ci_bce_penalty(Discriminator& disc, const TransitionBatch& expert, const TransitionBatch& policy);

/// Trajectory samples from a sampling distribution q with per-trajectory
/// log-densities under q and under the Gibbs model p. When `enumeration` is
/// set the samples are an exhaustive atom list and exp(log_q) are the atom
/// masses rather than Monte-Carlo draws.
struct SamplerEstimate {
  std::vector<Trajectory> samples;
  std::vector<double> log_q;
  std::vector<double> log_p;
  bool enumeration = false;

  /// Importance ratios q/p per sample.
  std::vector<double> weights() const;
};

/// Rolls out the model's own soft policy: q is the policy-induced trajectory
/// distribution, log_p the Gibbs log-density under `model`'s reward.
SamplerEstimate sample_from_model(const TabularMdp& mdp, RewardModel& model, int n, std::uint64_t seed);

struct DualGradient {
  Eigen::VectorXd gradient;
  double effective_sample_size = 0.0;
  bool degenerate = false;  // fewer than 5 effective samples
};

/// Importance-sampled dual gradient: empirical feature expectation minus the
/// reweighted model-expectation term. Self-normalized weights by default;
/// unnormalized mode exists for the exactness checks.
DualGradient dual_gradient_is(const TabularMdp& mdp, RewardModel& model, const SettingDataset& expert,
                              const SamplerEstimate& sampler, bool self_normalized = true);

struct AirlConfig {
  int buffer_size = 32;
  int eval_rollouts = 32;
  bool state_only = false;
  int lip_interpolations = 16;
  double saturation_logit = 20.0;
  /// Entropy temperature of the tabular soft agent: the policy is solved on
  /// logits / agent_temperature (the SAC temperature analog).
  double agent_temperature = 0.2;
};

struct AirlTraceRow {
  int iteration = 0;
  int setting_id = 0;
  double bce = 0.0;
  double ci = 0.0;
  double js = 0.0;
  double gt_return = 0.0;
  bool saturated = false;
};

struct AirlResult {
  Discriminator disc;
  SoftPolicy agent;
  std::vector<AirlTraceRow> trace;
  bool saturation_warning = false;
};

/// Adversarial loop with a tabular soft agent: per outer iteration collect a
/// shared policy buffer, then for each setting take one discriminator step
/// (BCE + lambda_ci * CI penalty + lambda_lip * input-gradient penalty) and
/// re-solve the agent on the updated logits (one agent update per
/// discriminator update). Returns the regularized discriminator as the
/// recovered reward.
AirlResult train_ci_airl_toy(const TabularMdp& mdp, std::span<const double> truth,
                             const std::vector<SettingDataset>& settings, const TrainConfig& cfg,
                             const AirlConfig& acfg, Discriminator disc);

std::string airl_trace_csv(const std::vector<AirlTraceRow>& trace);
void write_airl_trace_csv(const std::filesystem::path& path, const std::vector<AirlTraceRow>& trace);

}  // namespace ciirl
