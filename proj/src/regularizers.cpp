#include "ciirl/regularizers.hpp"

#include <cmath>
#include <stdexcept>

namespace ciirl {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

LogisticScalarPenalty logistic_scalar_penalty(std::span<const double> expert_logits,
                                              std::span<const double> policy_logits, double at_w) {
  LogisticScalarPenalty out;
  const double ne = static_cast<double>(expert_logits.size());
  const double np = static_cast<double>(policy_logits.size());

  double g = 0.0;
  for (double z : expert_logits) g += -sigmoid(-at_w * z) * z / ne;
  for (double z : policy_logits) g += sigmoid(at_w * z) * z / np;
  out.dloss_dw = g;
  out.value = g * g;

  // dP/dz = 2 g * d(dL/dw)/dz, with sigma'(x) = sigma(x)(1-sigma(x))
  out.dpenalty_dlogit_expert.reserve(expert_logits.size());
  for (double z : expert_logits) {
    double s = sigmoid(at_w * z);
    double sp = s * (1.0 - s);
    double d2 = -(sigmoid(-at_w * z) - at_w * sp * z) / ne;
    out.dpenalty_dlogit_expert.push_back(2.0 * g * d2);
  }
  out.dpenalty_dlogit_policy.reserve(policy_logits.size());
  for (double z : policy_logits) {
    double s = sigmoid(at_w * z);
    double sp = s * (1.0 - s);
    double d2 = (s + at_w * sp * z) / np;
    out.dpenalty_dlogit_policy.push_back(2.0 * g * d2);
  }
  return out;
}

L2Penalty l2_penalty(const Eigen::VectorXd& values, double lambda) {
  L2Penalty out;
  out.value = lambda * values.squaredNorm();
  out.grad = 2.0 * lambda * values;
  return out;
}

double power_iteration_step(const Eigen::MatrixXd& W, Eigen::VectorXd& u, Eigen::VectorXd& v) {
  v = W.transpose() * u;
  double vn = v.norm();
  if (vn > 0.0) v /= vn;
  u = W * v;
  double un = u.norm();
  if (un > 0.0) u /= un;
  return u.transpose() * W * v;
}

SpectralPenalty spectral_norm_penalty(const FeatureNet& net, int iters, PowerIterState& state) {
  if (iters < 1) throw std::invalid_argument("spectral_norm_penalty: iters must be >= 1");
  const auto& layers = net.layers();
  if (state.u.size() != layers.size()) {
    state.u.clear();
    state.v.clear();
    for (const auto& l : layers) {
      state.u.push_back(Eigen::VectorXd::Ones(l.W.rows()).normalized());
      state.v.push_back(Eigen::VectorXd::Ones(l.W.cols()).normalized());
    }
  }
  SpectralPenalty out;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    double sigma = 0.0;
    for (int k = 0; k < iters; ++k) sigma = power_iteration_step(layers[l].W, state.u[l], state.v[l]);
    out.sigma.push_back(sigma);
    out.value += sigma * sigma;
    out.layer_grads.push_back(2.0 * sigma * state.u[l] * state.v[l].transpose());
  }
  return out;
}

InputGradPenalty input_gradient_penalty(const FeatureNet& net, const Eigen::VectorXd& head,
                                        const std::vector<Eigen::VectorXd>& inputs) {
  if (inputs.empty()) throw std::invalid_argument("input_gradient_penalty: no inputs");
  InputGradPenalty out;
  out.grads = net.zero_grads();
  out.head_grad = Eigen::VectorXd::Zero(head.size());
  const double n = static_cast<double>(inputs.size());
  for (const auto& x : inputs) {
    Eigen::VectorXd g = net.input_gradient(x, head);
    double norm = g.norm();
    out.value += (norm - 1.0) * (norm - 1.0) / n;
    if (norm <= 1e-300) continue;  // subgradient 0 at the kink
    Eigen::VectorXd dir = (2.0 * (norm - 1.0) / (norm * n)) * g;
    net.directional_param_grads(x, dir, head, out.grads, &out.head_grad);
  }
  return out;
}

}  // namespace ciirl
