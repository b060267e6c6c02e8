#include "ciirl/dual.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ciirl/regularizers.hpp"
#include "ciirl/util.hpp"

namespace ciirl {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double log_sigmoid(double z) { return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z)); }

}  // namespace

std::vector<double> Discriminator::sa_logits() {
  std::vector<double> out(static_cast<std::size_t>(net.n_items()) * (state_only ? n_actions : 1));
  if (state_only) {
    for (int s = 0; s < net.n_items(); ++s) {
      double z = head.dot(net.forward(s));
      for (int a = 0; a < n_actions; ++a) out[static_cast<std::size_t>(s) * n_actions + a] = z;
    }
  } else {
    for (int i = 0; i < net.n_items(); ++i) out[i] = head.dot(net.forward(i));
  }
  return out;
}

std::vector<double> Discriminator::state_rewards() {
  auto z = sa_logits();
  const int S = static_cast<int>(z.size()) / n_actions;
  std::vector<double> out(S, 0.0);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < n_actions; ++a) out[s] += z[static_cast<std::size_t>(s) * n_actions + a];
    out[s] /= n_actions;
  }
  return out;
}

Discriminator make_discriminator(const Gridworld& gw, InputEncoding encoding,
                                 const std::vector<int>& hidden_dims, int output_dim, Activation activation,
                                 std::uint64_t seed, bool state_only) {
  Eigen::MatrixXd state_inputs = encoding == InputEncoding::OneHot
                                     ? FeatureNet::one_hot_inputs(gw.mdp.n_states())
                                     : FeatureNet::coord_inputs(gw.spec.width, gw.spec.height);
  Eigen::MatrixXd items =
      state_only ? state_inputs : FeatureNet::state_action_inputs(state_inputs, gw.mdp.n_actions());
  std::vector<int> dims;
  dims.push_back(static_cast<int>(items.cols()));
  for (int h : hidden_dims) dims.push_back(h);
  dims.push_back(output_dim);
  FeatureNet net(dims, activation, std::move(items));
  net.init_uniform_fan_in(seed);
  return Discriminator{std::move(net), Eigen::VectorXd::Ones(output_dim), gw.mdp.n_actions(), state_only};
}

TransitionBatch transitions_of(const SettingDataset& ds) { return transitions_of(ds.trajectories); }

TransitionBatch transitions_of(const std::vector<Trajectory>& trajs) {
  TransitionBatch out;
  for (const auto& traj : trajs)
    for (std::size_t t = 0; t < traj.length(); ++t) out.emplace_back(traj.states[t], traj.actions[t]);
  return out;
}

BceResult bce_loss(Discriminator& disc, const TransitionBatch& expert, const TransitionBatch& policy) {
  if (expert.empty() || policy.empty()) throw std::invalid_argument("bce_loss: empty batch");
  BceResult out;
  out.loss_grads = disc.net.zero_grads();
  out.head_loss_grads = Eigen::VectorXd::Zero(disc.head.size());
  const double ne = static_cast<double>(expert.size());
  const double np = static_cast<double>(policy.size());

  for (const auto& [s, a] : expert) {
    int item = disc.item(s, a);
    Eigen::VectorXd phi = disc.net.forward(item);
    double z = disc.head.dot(phi);
    out.objective += log_sigmoid(z) / ne;
    double dz = -(1.0 - sigmoid(z)) / ne;  // d(loss)/dz
    disc.net.backward(item, dz * disc.head, out.loss_grads);
    out.head_loss_grads += dz * phi;
  }
  for (const auto& [s, a] : policy) {
    int item = disc.item(s, a);
    Eigen::VectorXd phi = disc.net.forward(item);
    double z = disc.head.dot(phi);
    out.objective += log_sigmoid(-z) / np;  // log(1 - g)
    double dz = sigmoid(z) / np;
    disc.net.backward(item, dz * disc.head, out.loss_grads);
    out.head_loss_grads += dz * phi;
  }
  out.loss = -out.objective;
  // at the optimal classifier: objective = KL(p||m) + KL(q||m) - log 4,
  // i.e. twice the (halved-sum) JS divergence minus log 4
  out.js_estimate = std::clamp(0.5 * (out.objective + 2.0 * std::log(2.0)), 0.0, std::log(2.0));
  return out;
}

CiBceResult ci_bce_penalty(Discriminator& disc, const TransitionBatch& expert, const TransitionBatch& policy) {
  if (expert.empty() && policy.empty()) throw std::invalid_argument("ci_bce_penalty: empty batches");
  CiBceResult out;
  out.grads = disc.net.zero_grads();
  out.head_grads = Eigen::VectorXd::Zero(disc.head.size());

  std::vector<double> ez, pz;
  ez.reserve(expert.size());
  pz.reserve(policy.size());
  for (const auto& [s, a] : expert) ez.push_back(disc.logit(s, a));
  for (const auto& [s, a] : policy) pz.push_back(disc.logit(s, a));
  LogisticScalarPenalty pen = logistic_scalar_penalty(ez, pz, 1.0);
  out.penalty = pen.value;
  out.dloss_dw = pen.dloss_dw;

  for (std::size_t i = 0; i < expert.size(); ++i) {
    int item = disc.item(expert[i].first, expert[i].second);
    Eigen::VectorXd phi = disc.net.forward(item);
    double dz = pen.dpenalty_dlogit_expert[i];
    disc.net.backward(item, dz * disc.head, out.grads);
    out.head_grads += dz * phi;
  }
  for (std::size_t i = 0; i < policy.size(); ++i) {
    int item = disc.item(policy[i].first, policy[i].second);
    Eigen::VectorXd phi = disc.net.forward(item);
    double dz = pen.dpenalty_dlogit_policy[i];
    disc.net.backward(item, dz * disc.head, out.grads);
    out.head_grads += dz * phi;
  }
  return out;
}

std::vector<double> SamplerEstimate::weights() const {
  std::vector<double> out(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) out[i] = std::exp(log_q[i] - log_p[i]);
  return out;
}

SamplerEstimate sample_from_model(const TabularMdp& mdp, RewardModel& model, int n, std::uint64_t seed) {
  std::vector<double> reward = model.state_rewards();
  SoftPolicy policy = soft_value_iteration(mdp, reward);
  double log_z = policy.log_partition(mdp);
  auto rolled = rollout(mdp, policy, reward, n, seed);
  SamplerEstimate out;
  out.samples = std::move(rolled.trajectories);
  out.log_q.reserve(out.samples.size());
  out.log_p.reserve(out.samples.size());
  for (const auto& traj : out.samples) {
    out.log_q.push_back(trajectory_log_prob(mdp, policy, traj));
    double score = 0.0;
    for (int s : traj.states) score += reward[s];
    out.log_p.push_back(trajectory_log_dynamics(mdp, traj) + score - log_z);
  }
  return out;
}

DualGradient dual_gradient_is(const TabularMdp& mdp, RewardModel& model, const SettingDataset& expert,
                              const SamplerEstimate& sampler, bool self_normalized) {
  if (sampler.samples.empty()) throw std::invalid_argument("dual_gradient_is: no samples");
  for (double lq : sampler.log_q)
    if (!std::isfinite(lq)) throw std::invalid_argument("dual_gradient_is: non-finite sampler density");

  Eigen::MatrixXd phi = model.features_all();
  auto counts = empirical_visit_counts(expert, mdp.n_states());
  Eigen::VectorXd empirical = phi.transpose() * Eigen::Map<const Eigen::VectorXd>(counts.data(), counts.size());

  auto w = sampler.weights();
  Eigen::VectorXd weighted_counts = Eigen::VectorXd::Zero(mdp.n_states());
  double w_sum = 0.0, w_sq = 0.0;
  for (std::size_t i = 0; i < sampler.samples.size(); ++i) {
    double omega = sampler.enumeration ? std::exp(sampler.log_q[i]) * w[i] : w[i];
    for (int s : sampler.samples[i].states) weighted_counts[s] += omega;
    w_sum += w[i];
    w_sq += w[i] * w[i];
  }
  double denom;
  if (sampler.enumeration) {
    denom = 1.0;
  } else if (self_normalized) {
    denom = w_sum;
  } else {
    denom = static_cast<double>(sampler.samples.size());
  }
  Eigen::VectorXd model_term = phi.transpose() * weighted_counts / denom;

  DualGradient out;
  out.gradient = empirical - model_term;
  out.effective_sample_size =
      sampler.enumeration ? static_cast<double>(sampler.samples.size()) : (w_sq > 0.0 ? w_sum * w_sum / w_sq : 0.0);
  out.degenerate = out.effective_sample_size < 5.0;
  return out;
}

AirlResult train_ci_airl_toy(const TabularMdp& mdp, std::span<const double> truth,
                             const std::vector<SettingDataset>& settings, const TrainConfig& cfg,
                             const AirlConfig& acfg, Discriminator disc) {
  cfg.validate();
  if (settings.empty()) throw std::invalid_argument("train_ci_airl_toy: need at least one setting");
  if (acfg.buffer_size < 1) throw std::invalid_argument("train_ci_airl_toy: buffer_size must be >= 1");

  std::vector<TransitionBatch> expert_batches;
  expert_batches.reserve(settings.size());
  for (const auto& ds : settings) {
    if (ds.trajectories.empty()) throw std::invalid_argument("train_ci_airl_toy: empty setting dataset");
    expert_batches.push_back(transitions_of(ds));
  }

  const int n_theta = disc.net.param_count();
  const int d = static_cast<int>(disc.head.size());
  Eigen::VectorXd params(n_theta + d);
  params << disc.net.flatten_params(), disc.head;
  RmsProp opt(n_theta + d, cfg.lr, cfg.rmsprop_decay, cfg.rmsprop_eps);
  Rng lip_rng(Rng::derive_seed(cfg.seed, 0x11f));

  if (!(acfg.agent_temperature > 0.0))
    throw std::invalid_argument("train_ci_airl_toy: agent_temperature must be positive");
  AirlResult result{std::move(disc), {}, {}, false};
  Discriminator& D = result.disc;

  auto solve_agent = [&](const std::vector<double>& z) {
    std::vector<double> scaled = z;
    for (double& v : scaled) v /= acfg.agent_temperature;
    return soft_value_iteration_sa(mdp, scaled);
  };
  std::vector<double> logits = D.sa_logits();
  result.agent = solve_agent(logits);

  for (int iter = 0; iter < cfg.iters; ++iter) {
    auto buffer = rollout(mdp, result.agent, truth, acfg.buffer_size, Rng::derive_seed(cfg.seed, 1000 + iter));
    TransitionBatch policy_batch = transitions_of(buffer.trajectories);

    for (std::size_t e = 0; e < settings.size(); ++e) {
      BceResult bce = bce_loss(D, expert_batches[e], policy_batch);
      CiBceResult ci = ci_bce_penalty(D, expert_batches[e], policy_batch);

      Eigen::VectorXd grads(n_theta + d);
      FeatureNet::Grads theta_grads = bce.loss_grads;
      Eigen::VectorXd head_grads = bce.head_loss_grads;
      if (cfg.lambda_ci > 0.0) {
        for (std::size_t l = 0; l < theta_grads.layers.size(); ++l) {
          theta_grads.layers[l].W += cfg.lambda_ci * ci.grads.layers[l].W;
          theta_grads.layers[l].b += cfg.lambda_ci * ci.grads.layers[l].b;
        }
        head_grads += cfg.lambda_ci * ci.head_grads;
      }
      if (cfg.lambda_lip > 0.0) {
        std::vector<Eigen::VectorXd> interp;
        for (int k = 0; k < acfg.lip_interpolations; ++k) {
          const auto& [es, ea] = expert_batches[e][lip_rng.uniform_int(static_cast<int>(expert_batches[e].size()))];
          const auto& [ps, pa] = policy_batch[lip_rng.uniform_int(static_cast<int>(policy_batch.size()))];
          double alpha = lip_rng.uniform();
          interp.push_back(alpha * D.net.item_inputs().row(D.item(es, ea)).transpose() +
                           (1.0 - alpha) * D.net.item_inputs().row(D.item(ps, pa)).transpose());
        }
        InputGradPenalty lip = input_gradient_penalty(D.net, D.head, interp);
        for (std::size_t l = 0; l < theta_grads.layers.size(); ++l) {
          theta_grads.layers[l].W += cfg.lambda_lip * lip.grads.layers[l].W;
          theta_grads.layers[l].b += cfg.lambda_lip * lip.grads.layers[l].b;
        }
        head_grads += cfg.lambda_lip * lip.head_grad;
      }
      grads << theta_grads.flatten(), head_grads;
      opt.step(params, grads);
      D.net.set_params(params.head(n_theta));
      D.head = params.tail(d);

      // one agent update per discriminator update
      logits = D.sa_logits();
      result.agent = solve_agent(logits);

      bool saturated = true;
      for (const auto& [s, a] : expert_batches[e])
        saturated = saturated && std::abs(logits[static_cast<std::size_t>(s) * mdp.n_actions() + a]) >
                                     acfg.saturation_logit;
      for (const auto& [s, a] : policy_batch)
        saturated = saturated && std::abs(logits[static_cast<std::size_t>(s) * mdp.n_actions() + a]) >
                                     acfg.saturation_logit;
      result.saturation_warning = result.saturation_warning || saturated;

      result.trace.push_back(AirlTraceRow{iter, settings[e].setting_id, bce.loss, ci.penalty, bce.js_estimate,
                                          buffer.mean_return, saturated});
    }
  }
  return result;
}

std::string airl_trace_csv(const std::vector<AirlTraceRow>& trace) {
  std::ostringstream out;
  out << "iteration,setting_id,bce_loss,ci_penalty,js_estimate,gt_return,saturated\n";
  for (const auto& r : trace) {
    out << r.iteration << "," << r.setting_id << "," << format_double(r.bce) << "," << format_double(r.ci) << ","
        << format_double(r.js) << "," << format_double(r.gt_return) << "," << (r.saturated ? 1 : 0) << "\n";
  }
  return out.str();
}

void write_airl_trace_csv(const std::filesystem::path& path, const std::vector<AirlTraceRow>& trace) {
  atomic_write_file(path, airl_trace_csv(trace));
}

}  // namespace ciirl
