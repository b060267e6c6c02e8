#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "ciirl/features.hpp"
#include "ciirl/mdp.hpp"
#include "ciirl/regularizers.hpp"
#include "ciirl/solver.hpp"
#include "ciirl/trajectories.hpp"

namespace ciirl {

/// Expected state visitation frequencies under a soft policy, the model
/// feature expectation they induce, and the log-partition value.
struct ModelExpectation {
  Eigen::MatrixXd svf;             // horizon x n_states; each row sums to 1
  Eigen::VectorXd state_marginal;  // sum over timesteps; sums to horizon
  Eigen::VectorXd feature_expectation;
  double log_partition = 0.0;
};

/// Forward pass: svf[0,.] = mu0, svf[t+1,s'] = sum_{s,a} svf[t,s] pi(a|s,t) p(s'|s,a).
ModelExpectation expected_svf(const TabularMdp& mdp, const SoftPolicy& policy);

/// expected_svf plus feature expectation sum_t sum_s svf[t,s] phi(s) and the
/// log partition from the policy's initial soft values.
ModelExpectation model_expectation(const TabularMdp& mdp, const SoftPolicy& policy,
                                   const Eigen::MatrixXd& features);

enum class SettingMode { SumOverSettings, RoundRobin };
SettingMode setting_mode_from_string(const std::string& s);
std::string to_string(SettingMode m);

struct TrainConfig {
  double lambda_ci = 0.0;
  double lambda_l2 = 0.0;
  double lambda_lip = 0.0;
  double lr = 1e-3;
  int iters = 300;
  std::uint64_t seed = 0;
  SettingMode setting_mode = SettingMode::SumOverSettings;
  double rmsprop_decay = 0.99;
  double rmsprop_eps = 1e-8;
  double grad_tol = 1e-5;
  int spectral_iters = 10;

  void validate() const;
};

/// Average log-likelihood of the dataset under the Gibbs trajectory model:
/// mean over trajectories of [log mu0 + sum log p(s'|s,a) + head.phi(xi)]
/// minus the log partition. The dynamics terms are parameter-independent
/// constants; they make the value an interpretable log-probability.
double mle_loss(const TabularMdp& mdp, RewardModel& model, const SettingDataset& ds);

/// C_e = empirical feature expectation - model feature expectation; equals
/// the gradient of mle_loss in the reward head.
Eigen::VectorXd mle_gradient_psi(const TabularMdp& mdp, RewardModel& model, const SettingDataset& ds);

/// ||C||^2, the scalar-predictor gradient-norm penalty of the matching loss
/// evaluated with the head frozen at the all-ones vector.
double ci_penalty(const Eigen::VectorXd& c);

/// Directional derivative of the state marginal: d rho_M / d reward applied
/// to `direction` by tangent propagation through the soft backup and the
/// svf forward pass. Exact; cost of one extra backup + forward pass.
Eigen::VectorXd svf_response(const TabularMdp& mdp, const SoftPolicy& policy, const Eigen::MatrixXd& svf,
                             const Eigen::VectorXd& direction);

/// Exact per-state upstream gradients of the CI penalty ||psi ∘ C||^2 on the
/// feature table (n_states x d). Combines the direct aggregation term
/// 2 psi_j^2 C_j (rho_E - rho_M)(s) with the visitation-response term routed
/// through svf_response. Backpropagating rows through the feature network
/// yields the exact parameter gradient of the penalty.
Eigen::MatrixXd ci_penalty_feature_grad(const TabularMdp& mdp, const SoftPolicy& policy,
                                        const ModelExpectation& me, const Eigen::MatrixXd& features,
                                        const Eigen::VectorXd& head, const Eigen::VectorXd& c,
                                        const Eigen::VectorXd& empirical_counts);

struct FmirlIteration {
  int iteration = 0;
  std::vector<PenaltyReport> settings;
  double grad_norm = 0.0;
};

struct FmirlResult {
  RewardModel model;
  std::vector<FmirlIteration> trace;
  bool early_stopped = false;
};

struct TrainingDivergedError : std::runtime_error {
  explicit TrainingDivergedError(std::vector<FmirlIteration> trace_)
      : std::runtime_error("training diverged: non-finite loss"), trace(std::move(trace_)) {}
  std::vector<FmirlIteration> trace;
};

/// Feature-matching IRL with the causal-invariance penalty. Each iteration
/// re-solves the soft policy on the current reward, computes the per-setting
/// matching gradient and penalty gradient, combines them per setting_mode,
/// backpropagates through the feature network and applies RMSProp to the
/// network parameters and the head.
FmirlResult train_ci_fmirl(const TabularMdp& mdp, const std::vector<SettingDataset>& settings,
                           const TrainConfig& cfg, RewardModel model);

/// Trace CSV: iteration, per-setting loss, per-setting ||C_e||^2, total
/// gradient norm.
std::string fmirl_trace_csv(const std::vector<FmirlIteration>& trace);
void write_fmirl_trace_csv(const std::filesystem::path& path, const std::vector<FmirlIteration>& trace);

}  // namespace ciirl
