#include "ciirl/maxent.hpp"

#include <cmath>
#include <sstream>

#include "ciirl/util.hpp"

namespace ciirl {

ModelExpectation expected_svf(const TabularMdp& mdp, const SoftPolicy& policy) {
  if (policy.horizon != mdp.horizon() || policy.n_states != mdp.n_states())
    throw std::invalid_argument("expected_svf: policy does not match mdp");
  const int S = mdp.n_states(), A = mdp.n_actions(), T = mdp.horizon();
  ModelExpectation me;
  me.svf = Eigen::MatrixXd::Zero(T, S);
  for (int s = 0; s < S; ++s) me.svf(0, s) = mdp.initial_dist()[s];
  for (int t = 0; t + 1 < T; ++t) {
    for (int s = 0; s < S; ++s) {
      double mass = me.svf(t, s);
      if (mass == 0.0) continue;
      for (int a = 0; a < A; ++a) {
        double m = mass * policy.prob(t, s, a);
        if (m == 0.0) continue;
        for (const auto& succ : mdp.successors(s, a)) me.svf(t + 1, succ.state) += m * succ.prob;
      }
    }
  }
  me.state_marginal = me.svf.colwise().sum().transpose();
  return me;
}

ModelExpectation model_expectation(const TabularMdp& mdp, const SoftPolicy& policy,
                                   const Eigen::MatrixXd& features) {
  ModelExpectation me = expected_svf(mdp, policy);
  if (features.rows() != mdp.n_states()) throw std::invalid_argument("model_expectation: bad feature table");
  me.feature_expectation = features.transpose() * me.state_marginal;
  me.log_partition = policy.log_partition(mdp);
  return me;
}

SettingMode setting_mode_from_string(const std::string& s) {
  if (s == "sum-over-settings") return SettingMode::SumOverSettings;
  if (s == "round-robin") return SettingMode::RoundRobin;
  throw std::invalid_argument("unknown setting_mode: " + s);
}

std::string to_string(SettingMode m) {
  return m == SettingMode::SumOverSettings ? "sum-over-settings" : "round-robin";
}

void TrainConfig::validate() const {
  if (lambda_ci < 0.0 || lambda_l2 < 0.0 || lambda_lip < 0.0)
    throw std::invalid_argument("TrainConfig: penalty coefficients must be >= 0");
  if (!(lr > 0.0)) throw std::invalid_argument("TrainConfig: lr must be positive");
  if (iters < 1) throw std::invalid_argument("TrainConfig: iters must be >= 1");
  if (spectral_iters < 1) throw std::invalid_argument("TrainConfig: spectral_iters must be >= 1");
}

namespace {

/// Mean over the dataset of log mu0(s_1) + sum_t log p(s_{t+1}|s_t,a_t).
double mean_log_dynamics(const TabularMdp& mdp, const SettingDataset& ds) {
  double total = 0.0;
  for (const auto& traj : ds.trajectories) total += trajectory_log_dynamics(mdp, traj);
  return total / static_cast<double>(ds.trajectories.size());
}

}  // namespace

double mle_loss(const TabularMdp& mdp, RewardModel& model, const SettingDataset& ds) {
  if (ds.trajectories.empty()) throw std::invalid_argument("mle_loss: empty dataset");
  Eigen::MatrixXd phi = model.features_all();
  Eigen::VectorXd reward = phi * model.head;
  SoftPolicy policy = soft_value_iteration(mdp, {reward.data(), static_cast<std::size_t>(reward.size())});
  auto counts = empirical_visit_counts(ds, mdp.n_states());
  Eigen::Map<const Eigen::VectorXd> rho_e(counts.data(), counts.size());
  double score = model.head.dot(phi.transpose() * rho_e);
  return mean_log_dynamics(mdp, ds) + score - policy.log_partition(mdp);
}

Eigen::VectorXd mle_gradient_psi(const TabularMdp& mdp, RewardModel& model, const SettingDataset& ds) {
  if (ds.trajectories.empty()) throw std::invalid_argument("mle_gradient_psi: empty dataset");
  Eigen::MatrixXd phi = model.features_all();
  Eigen::VectorXd reward = phi * model.head;
  SoftPolicy policy = soft_value_iteration(mdp, {reward.data(), static_cast<std::size_t>(reward.size())});
  ModelExpectation me = model_expectation(mdp, policy, phi);
  auto counts = empirical_visit_counts(ds, mdp.n_states());
  Eigen::Map<const Eigen::VectorXd> rho_e(counts.data(), counts.size());
  return phi.transpose() * rho_e - me.feature_expectation;
}

double ci_penalty(const Eigen::VectorXd& c) { return c.squaredNorm(); }

Eigen::VectorXd svf_response(const TabularMdp& mdp, const SoftPolicy& policy, const Eigen::MatrixXd& svf,
                             const Eigen::VectorXd& direction) {
  const int S = mdp.n_states(), A = mdp.n_actions(), T = mdp.horizon();
  // backward tangent pass through the soft backup
  Eigen::MatrixXd dv = Eigen::MatrixXd::Zero(T + 1, S);
  std::vector<double> dq(static_cast<std::size_t>(T) * S * A, 0.0);
  for (int t = T - 1; t >= 0; --t) {
    for (int s = 0; s < S; ++s) {
      double dvsum = 0.0;
      for (int a = 0; a < A; ++a) {
        double ev = 0.0;
        for (const auto& succ : mdp.successors(s, a)) ev += succ.prob * dv(t + 1, succ.state);
        double d = direction[s] + ev;
        dq[(static_cast<std::size_t>(t) * S + s) * A + a] = d;
        dvsum += policy.prob(t, s, a) * d;
      }
      dv(t, s) = dvsum;
    }
  }
  // forward tangent pass through the svf recursion
  Eigen::VectorXd delta_rho = Eigen::VectorXd::Zero(S);
  Eigen::VectorXd dcur = Eigen::VectorXd::Zero(S), dnext(S);
  for (int t = 0; t + 1 < T; ++t) {
    dnext.setZero();
    for (int s = 0; s < S; ++s) {
      double mass = svf(t, s);
      double dmass = dcur[s];
      if (mass == 0.0 && dmass == 0.0) continue;
      for (int a = 0; a < A; ++a) {
        double pi = policy.prob(t, s, a);
        double dpi = pi * (dq[(static_cast<std::size_t>(t) * S + s) * A + a] - dv(t, s));
        double flow = dmass * pi + mass * dpi;
        if (flow == 0.0) continue;
        for (const auto& succ : mdp.successors(s, a)) dnext[succ.state] += flow * succ.prob;
      }
    }
    delta_rho += dcur;
    std::swap(dcur, dnext);
  }
  delta_rho += dcur;
  return delta_rho;
}

Eigen::MatrixXd ci_penalty_feature_grad(const TabularMdp& mdp, const SoftPolicy& policy,
                                        const ModelExpectation& me, const Eigen::MatrixXd& features,
                                        const Eigen::VectorXd& head, const Eigen::VectorXd& c,
                                        const Eigen::VectorXd& empirical_counts) {
  const int S = mdp.n_states();
  const int d = static_cast<int>(features.cols());
  Eigen::VectorXd delta_rho = empirical_counts - me.state_marginal;
  // response direction u(x) = phi(x) . (psi^2 ∘ C)
  Eigen::VectorXd weighted_c = head.array().square() * c.array();
  Eigen::VectorXd u = features * weighted_c;
  Eigen::VectorXd ju = svf_response(mdp, policy, me.svf, u);

  Eigen::MatrixXd upstream(S, d);
  for (int s = 0; s < S; ++s)
    for (int j = 0; j < d; ++j)
      upstream(s, j) = 2.0 * head[j] * head[j] * c[j] * delta_rho[s] - 2.0 * head[j] * ju[s];
  return upstream;
}

namespace {

struct SettingStats {
  Eigen::VectorXd visit_counts;  // rho_E, length S
  double log_dynamics = 0.0;     // parameter-independent loss constant
};

}  // namespace

FmirlResult train_ci_fmirl(const TabularMdp& mdp, const std::vector<SettingDataset>& settings,
                           const TrainConfig& cfg, RewardModel model) {
  cfg.validate();
  if (settings.empty()) throw std::invalid_argument("train_ci_fmirl: need at least one setting");
  for (const auto& ds : settings)
    if (ds.trajectories.empty()) throw std::invalid_argument("train_ci_fmirl: empty setting dataset");

  const int S = mdp.n_states();
  const int d = model.feature_dim();

  std::vector<SettingStats> stats;
  stats.reserve(settings.size());
  for (const auto& ds : settings) {
    SettingStats st;
    auto counts = empirical_visit_counts(ds, S);
    st.visit_counts = Eigen::Map<const Eigen::VectorXd>(counts.data(), counts.size());
    st.log_dynamics = 0.0;
    for (const auto& traj : ds.trajectories) st.log_dynamics += trajectory_log_dynamics(mdp, traj);
    st.log_dynamics /= static_cast<double>(ds.trajectories.size());
    stats.push_back(std::move(st));
  }

  const int n_theta = model.net.param_count();
  Eigen::VectorXd params(n_theta + d);
  params << model.net.flatten_params(), model.head;
  RmsProp opt(n_theta + d, cfg.lr, cfg.rmsprop_decay, cfg.rmsprop_eps);
  PowerIterState power_state;

  FmirlResult result{std::move(model), {}, false};
  auto& net = result.model.net;
  auto& head = result.model.head;

  for (int iter = 0; iter < cfg.iters; ++iter) {
    net.set_params(params.head(n_theta));
    head = params.tail(d);

    Eigen::MatrixXd phi = net.forward_all();
    Eigen::VectorXd reward = phi * head;
    if (!reward.allFinite()) throw TrainingDivergedError(result.trace);
    SoftPolicy policy = soft_value_iteration(mdp, {reward.data(), static_cast<std::size_t>(reward.size())});
    ModelExpectation me = model_expectation(mdp, policy, phi);

    Eigen::MatrixXd upstream = Eigen::MatrixXd::Zero(S, d);
    Eigen::VectorXd head_grad = Eigen::VectorXd::Zero(d);

    FmirlIteration row;
    row.iteration = iter;
    bool finite = true;

    for (std::size_t e = 0; e < settings.size(); ++e) {
      const auto& st = stats[e];
      Eigen::VectorXd fe = phi.transpose() * st.visit_counts;
      Eigen::VectorXd c = fe - me.feature_expectation;
      double loss = st.log_dynamics + head.dot(fe) - me.log_partition;
      Eigen::VectorXd c_eff = head.array() * c.array();
      double penalty = ci_penalty(c_eff);

      // the trace reports every setting; only active settings contribute
      // gradient (all of them in sum mode, one per iteration in round-robin)
      bool active = cfg.setting_mode == SettingMode::SumOverSettings ||
                    e == static_cast<std::size_t>(iter) % settings.size();
      double penalty_grad_norm = 0.0;
      if (active) {
        Eigen::VectorXd delta_rho = st.visit_counts - me.state_marginal;
        // base matching loss is maximized: descend on its negation
        upstream.noalias() -= delta_rho * head.transpose();
        head_grad -= c;
        if (cfg.lambda_ci > 0.0) {
          Eigen::MatrixXd pg = ci_penalty_feature_grad(mdp, policy, me, phi, head, c, st.visit_counts);
          penalty_grad_norm = pg.norm();
          upstream += cfg.lambda_ci * pg;
        }
      }

      row.settings.push_back(PenaltyReport{settings[e].setting_id, loss, penalty, penalty_grad_norm,
                                           cfg.lambda_ci});
      if (!std::isfinite(loss) || !std::isfinite(penalty)) finite = false;
    }

    if (cfg.lambda_l2 > 0.0) {
      // L2 on the feature outputs phi(s)
      upstream += 2.0 * cfg.lambda_l2 * phi;
    }

    FeatureNet::Grads grads = net.zero_grads();
    for (int s = 0; s < S; ++s) {
      Eigen::VectorXd row_up = upstream.row(s).transpose();
      if (row_up.isZero(0.0)) continue;
      net.backward(s, row_up, grads);
    }
    if (cfg.lambda_lip > 0.0) {
      SpectralPenalty sp = spectral_norm_penalty(net, cfg.spectral_iters, power_state);
      for (std::size_t l = 0; l < grads.layers.size(); ++l) grads.layers[l].W += cfg.lambda_lip * sp.layer_grads[l];
    }

    Eigen::VectorXd flat_grads(n_theta + d);
    flat_grads << grads.flatten(), head_grad;
    row.grad_norm = flat_grads.norm();
    if (!std::isfinite(row.grad_norm)) finite = false;

    result.trace.push_back(row);
    if (!finite) throw TrainingDivergedError(result.trace);

    if (row.grad_norm < cfg.grad_tol) {
      result.early_stopped = true;
      break;
    }
    opt.step(params, flat_grads);
  }

  net.set_params(params.head(n_theta));
  head = params.tail(d);
  return result;
}

std::string fmirl_trace_csv(const std::vector<FmirlIteration>& trace) {
  std::ostringstream out;
  out << "iteration";
  if (!trace.empty()) {
    for (const auto& r : trace.front().settings) out << ",loss_e" << r.setting_id;
    for (const auto& r : trace.front().settings) out << ",ci_penalty_e" << r.setting_id;
  }
  out << ",grad_norm\n";
  for (const auto& row : trace) {
    out << row.iteration;
    for (const auto& r : row.settings) out << "," << format_double(r.base_loss);
    for (const auto& r : row.settings) out << "," << format_double(r.penalty_value);
    out << "," << format_double(row.grad_norm) << "\n";
  }
  return out.str();
}

void write_fmirl_trace_csv(const std::filesystem::path& path, const std::vector<FmirlIteration>& trace) {
  atomic_write_file(path, fmirl_trace_csv(trace));
}

}  // namespace ciirl
