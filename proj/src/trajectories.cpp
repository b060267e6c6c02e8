#include "ciirl/trajectories.hpp"

#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "ciirl/solver.hpp"
#include "ciirl/util.hpp"

namespace ciirl {

void Trajectory::validate(const TabularMdp& mdp) const {
  if (states.size() != actions.size()) throw std::invalid_argument("trajectory: states/actions length mismatch");
  if (states.empty()) throw std::invalid_argument("trajectory: empty");
  for (std::size_t t = 0; t < states.size(); ++t) {
    if (states[t] < 0 || states[t] >= mdp.n_states()) throw std::invalid_argument("trajectory: state out of range");
    if (actions[t] < 0 || actions[t] >= mdp.n_actions()) throw std::invalid_argument("trajectory: action out of range");
    if (t + 1 < states.size() && !(mdp.transition(states[t], actions[t], states[t + 1]) > 0.0))
      throw std::invalid_argument("trajectory: zero-probability transition");
  }
}

std::vector<double> trajectory_features(const Trajectory& traj, const FeatureFn& feat, int feature_dim,
                                        double discount) {
  std::vector<double> out(feature_dim, 0.0);
  double w = 1.0;
  for (int s : traj.states) {
    std::vector<double> phi = feat(s);
    if (phi.size() != static_cast<std::size_t>(feature_dim))
      throw std::invalid_argument("trajectory_features: feature evaluator returned wrong dimension");
    for (int j = 0; j < feature_dim; ++j) out[j] += w * phi[j];
    w *= discount;
  }
  return out;
}

std::vector<double> empirical_feature_expectation(const SettingDataset& ds, const FeatureFn& feat, int feature_dim) {
  if (ds.trajectories.empty()) throw std::invalid_argument("empirical_feature_expectation: empty dataset");
  std::vector<double> out(feature_dim, 0.0);
  for (const auto& traj : ds.trajectories) {
    auto f = trajectory_features(traj, feat, feature_dim);
    for (int j = 0; j < feature_dim; ++j) out[j] += f[j];
  }
  for (double& v : out) v /= static_cast<double>(ds.trajectories.size());
  return out;
}

std::vector<double> empirical_visit_counts(const SettingDataset& ds, int n_states) {
  if (ds.trajectories.empty()) throw std::invalid_argument("empirical_visit_counts: empty dataset");
  std::vector<double> counts(n_states, 0.0);
  for (const auto& traj : ds.trajectories)
    for (int s : traj.states) counts[s] += 1.0;
  for (double& v : counts) v /= static_cast<double>(ds.trajectories.size());
  return counts;
}

std::vector<SettingDataset> gen_expert_settings(const Gridworld& gw,
                                                const std::vector<PreferenceIntervention>& interventions,
                                                double temperature, std::uint64_t seed) {
  if (interventions.empty()) throw std::invalid_argument("gen_expert_settings: empty intervention list");
  if (!(temperature > 0.0)) throw std::invalid_argument("gen_expert_settings: temperature must be positive");
  const TabularMdp& mdp = gw.mdp;
  std::span<const double> truth(gw.true_reward);

  std::vector<SettingDataset> out;
  out.reserve(interventions.size());
  for (std::size_t e = 0; e < interventions.size(); ++e) {
    const auto& iv = interventions[e];
    if (iv.n_trajectories < 1) throw std::invalid_argument("gen_expert_settings: n_trajectories must be >= 1");
    std::vector<double> reward(truth.begin(), truth.end());
    for (const auto& c : iv.bonus_cells) {
      if (c.x < 0 || c.x >= gw.spec.width || c.y < 0 || c.y >= gw.spec.height)
        throw std::invalid_argument("gen_expert_settings: bonus cell outside grid");
      reward[gw.state_of(c)] += iv.bonus_magnitude;
    }
    for (double& r : reward) r /= temperature;
    SoftPolicy expert = soft_value_iteration(mdp, reward);
    auto rolled = rollout(mdp, expert, truth, iv.n_trajectories, Rng::derive_seed(seed, e));
    SettingDataset ds;
    ds.setting_id = static_cast<int>(e);
    ds.trajectories = std::move(rolled.trajectories);
    for (auto& traj : ds.trajectories) traj.setting_id = ds.setting_id;
    std::ostringstream prov;
    prov << "bonus_magnitude=" << format_double(iv.bonus_magnitude) << " n_trajectories=" << iv.n_trajectories
         << " temperature=" << format_double(temperature) << " bonus_cells=";
    for (const auto& c : iv.bonus_cells) prov << "(" << c.x << "," << c.y << ")";
    ds.provenance = prov.str();
    out.push_back(std::move(ds));
  }
  return out;
}

std::string serialize_dataset(const SettingDataset& ds, int width, int height, int n_actions) {
  std::ostringstream out;
  out << "ci-irl-dataset v1 setting=" << ds.setting_id << " width=" << width << " height=" << height
      << " n_actions=" << n_actions << "\n";
  out << "# provenance: " << ds.provenance << "\n";
  for (const auto& traj : ds.trajectories) {
    out << traj.setting_id;
    for (std::size_t t = 0; t < traj.length(); ++t) out << ";" << traj.states[t] << "," << traj.actions[t];
    out << "\n";
  }
  return out.str();
}

namespace {

int parse_int(std::string_view sv, const char* what) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), value);
  if (ec != std::errc() || ptr != sv.data() + sv.size())
    throw std::invalid_argument(std::string("dataset parse: bad integer in ") + what);
  return value;
}

int header_field(const std::string& header, const std::string& key) {
  auto pos = header.find(key + "=");
  if (pos == std::string::npos) throw std::invalid_argument("dataset parse: missing header field " + key);
  pos += key.size() + 1;
  auto end = header.find(' ', pos);
  if (end == std::string::npos) end = header.size();
  return parse_int(std::string_view(header).substr(pos, end - pos), key.c_str());
}

}  // namespace

SettingDataset parse_dataset(const std::string& text, const TabularMdp* validate_against) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("ci-irl-dataset v1", 0) != 0)
    throw std::invalid_argument("dataset parse: bad or missing header");
  SettingDataset ds;
  ds.setting_id = header_field(line, "setting");
  const int width = header_field(line, "width");
  const int height = header_field(line, "height");
  const int n_actions = header_field(line, "n_actions");
  const int n_states = width * height;

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string prov_key = "# provenance: ";
      if (line.rfind(prov_key, 0) == 0) ds.provenance = line.substr(prov_key.size());
      continue;
    }
    Trajectory traj;
    std::size_t pos = 0;
    auto next_token = [&](char sep) -> std::string_view {
      auto end = line.find(sep, pos);
      std::string_view tok = std::string_view(line).substr(pos, end == std::string::npos ? end : end - pos);
      pos = (end == std::string::npos) ? line.size() : end + 1;
      return tok;
    };
    traj.setting_id = parse_int(next_token(';'), "setting_id");
    if (traj.setting_id != ds.setting_id)
      throw std::invalid_argument("dataset parse: record setting_id differs from header");
    while (pos < line.size()) {
      auto pair = next_token(';');
      auto comma = pair.find(',');
      if (comma == std::string_view::npos) throw std::invalid_argument("dataset parse: malformed state,action pair");
      int s = parse_int(pair.substr(0, comma), "state");
      int a = parse_int(pair.substr(comma + 1), "action");
      if (s < 0 || s >= n_states) throw std::invalid_argument("dataset parse: state out of range");
      if (a < 0 || a >= n_actions) throw std::invalid_argument("dataset parse: action out of range");
      traj.states.push_back(s);
      traj.actions.push_back(a);
    }
    if (traj.states.empty()) throw std::invalid_argument("dataset parse: empty trajectory record");
    ds.trajectories.push_back(std::move(traj));
  }
  if (ds.trajectories.empty()) throw std::invalid_argument("dataset parse: no trajectories");
  if (validate_against != nullptr)
    for (const auto& traj : ds.trajectories) traj.validate(*validate_against);
  return ds;
}

void save_dataset(const std::filesystem::path& path, const SettingDataset& ds, int width, int height, int n_actions) {
  atomic_write_file(path, serialize_dataset(ds, width, height, n_actions));
}

SettingDataset load_dataset(const std::filesystem::path& path, const TabularMdp* validate_against) {
  return parse_dataset(read_file(path), validate_against);
}

}  // namespace ciirl
