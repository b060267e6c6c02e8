#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "ciirl/features.hpp"

namespace ciirl {

/// Per-setting training telemetry.
struct PenaltyReport {
  int setting_id = 0;
  double base_loss = 0.0;
  double penalty_value = 0.0;
  double penalty_grad_norm = 0.0;
  double lambda = 0.0;
};

/// Scalar-predictor gradient penalty (dL/dw at w = at_w)^2 for the binary
/// logistic loss with logits scaled by w:
///   L(w) = -mean_E[log sigmoid(w z)] - mean_P[log(1 - sigmoid(w z))].
/// The per-logit penalty derivatives carry the analytic second-order term,
/// so chaining them through a network's backward pass gives the exact
/// parameter gradient of the penalty.
struct LogisticScalarPenalty {
  double value = 0.0;
  double dloss_dw = 0.0;
  std::vector<double> dpenalty_dlogit_expert;
  std::vector<double> dpenalty_dlogit_policy;
};
LogisticScalarPenalty logistic_scalar_penalty(std::span<const double> expert_logits,
                                              std::span<const double> policy_logits, double at_w = 1.0);

/// The exponential-family instance of the scalar-predictor penalty reduces
/// to the squared feature-expectation gap; see ci_penalty in the matching
/// trainer. This helper is the shared final step.
inline double squared_gradient_penalty(double dloss_dw) { return dloss_dw * dloss_dw; }

struct L2Penalty {
  double value = 0.0;
  Eigen::VectorXd grad;
};
/// lambda * ||v||^2 with gradient 2 lambda v.
L2Penalty l2_penalty(const Eigen::VectorXd& values, double lambda);

/// Persistent left/right power-iteration vectors, one pair per layer.
struct PowerIterState {
  std::vector<Eigen::VectorXd> u;
  std::vector<Eigen::VectorXd> v;
};

struct SpectralPenalty {
  double value = 0.0;               // sum over layers of sigma_1^2
  std::vector<double> sigma;        // per-layer top singular value estimate
  std::vector<Eigen::MatrixXd> layer_grads;  // d(value)/dW via 2 sigma u v^T
};
/// Top singular value per layer estimated by `iters` power-iteration steps
/// with warm-started vectors.
SpectralPenalty spectral_norm_penalty(const FeatureNet& net, int iters, PowerIterState& state);

/// One power-iteration step returning the Rayleigh-quotient estimate; used
/// by spectral_norm_penalty and exposed for its monotonicity property.
double power_iteration_step(const Eigen::MatrixXd& W, Eigen::VectorXd& u, Eigen::VectorXd& v);

struct InputGradPenalty {
  double value = 0.0;
  FeatureNet::Grads grads;
  Eigen::VectorXd head_grad;
};
/// mean over inputs of (||grad_x head.phi(x)|| - 1)^2, with exact parameter
/// gradients via forward-over-reverse tangents.
InputGradPenalty input_gradient_penalty(const FeatureNet& net, const Eigen::VectorXd& head,
                                        const std::vector<Eigen::VectorXd>& inputs);

}  // namespace ciirl
