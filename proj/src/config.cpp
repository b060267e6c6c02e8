#include "ciirl/config.hpp"

#include <set>

#include "json.hpp"

#include "ciirl/util.hpp"

namespace ciirl {

using json = nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError("config: " + where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (allowed.find(key) == allowed.end())
      throw ConfigError("config: unknown field \"" + key + "\" in " + where);
  }
}

GridCell parse_cell(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("config: " + where + " cells must be [x, y] pairs");
  return GridCell{j[0].get<int>(), j[1].get<int>()};
}

std::vector<GridCell> parse_cells(const json& j, const std::string& where) {
  std::vector<GridCell> out;
  for (const auto& c : j) out.push_back(parse_cell(c, where));
  return out;
}

json cells_json(const std::vector<GridCell>& cells) {
  json out = json::array();
  for (const auto& c : cells) out.push_back({c.x, c.y});
  return out;
}

template <typename T>
void maybe(const json& j, const char* key, T& target) {
  if (j.contains(key)) target = j.at(key).get<T>();
}

}  // namespace

void ExperimentConfig::validate() const {
  if (pipeline != "fmirl" && pipeline != "airl-toy")
    throw ConfigError("config: pipeline must be \"fmirl\" or \"airl-toy\"");
  gridworld.validate();
  train.validate();
  if (experts.interventions.empty()) throw ConfigError("config: experts.interventions must be non-empty");
  if (!(experts.temperature > 0.0)) throw ConfigError("config: experts.temperature must be positive");
  if (horizon < 1) throw ConfigError("config: horizon must be >= 1");
  if (!(discount > 0.0 && discount < 1.0)) throw ConfigError("config: discount must be in (0,1)");
  if (eval.n_rollouts < 1) throw ConfigError("config: eval.n_rollouts must be >= 1");
}

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& ex) {
    throw ConfigError(std::string("config: invalid JSON: ") + ex.what());
  }
  check_keys(j,
             {"version", "pipeline", "seed", "gridworld", "discount", "horizon", "features", "experts", "train",
              "airl", "perturbations", "eval", "output_dir"},
             "top level");
  if (!j.contains("version")) throw ConfigError("config: missing required field \"version\"");

  ExperimentConfig cfg;
  cfg.version = j.at("version").get<int>();
  if (cfg.version != 1) throw ConfigError("config: unsupported version");
  maybe(j, "pipeline", cfg.pipeline);
  maybe(j, "seed", cfg.seed);
  maybe(j, "discount", cfg.discount);
  maybe(j, "horizon", cfg.horizon);
  if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();

  if (j.contains("gridworld")) {
    const auto& g = j.at("gridworld");
    check_keys(g, {"width", "height", "slip_prob", "goal_reward", "step_reward", "obstacles", "start_cells",
                   "goal_cells"},
               "gridworld");
    maybe(g, "width", cfg.gridworld.width);
    maybe(g, "height", cfg.gridworld.height);
    maybe(g, "slip_prob", cfg.gridworld.slip_prob);
    maybe(g, "goal_reward", cfg.gridworld.goal_reward);
    maybe(g, "step_reward", cfg.gridworld.step_reward);
    if (g.contains("obstacles")) cfg.gridworld.obstacles = parse_cells(g.at("obstacles"), "gridworld.obstacles");
    if (g.contains("start_cells"))
      cfg.gridworld.start_cells = parse_cells(g.at("start_cells"), "gridworld.start_cells");
    if (g.contains("goal_cells")) cfg.gridworld.goal_cells = parse_cells(g.at("goal_cells"), "gridworld.goal_cells");
  }

  if (j.contains("features")) {
    const auto& f = j.at("features");
    check_keys(f, {"input_encoding", "hidden_dims", "output_dim", "activation"}, "features");
    if (f.contains("input_encoding")) cfg.features.encoding = encoding_from_string(f.at("input_encoding"));
    maybe(f, "hidden_dims", cfg.features.hidden_dims);
    maybe(f, "output_dim", cfg.features.output_dim);
    if (f.contains("activation")) cfg.features.activation = activation_from_string(f.at("activation"));
  }

  if (j.contains("experts")) {
    const auto& e = j.at("experts");
    check_keys(e, {"temperature", "interventions"}, "experts");
    maybe(e, "temperature", cfg.experts.temperature);
    if (e.contains("interventions")) {
      for (const auto& iv : e.at("interventions")) {
        check_keys(iv, {"bonus_cells", "bonus_magnitude", "n_trajectories"}, "experts.interventions[]");
        PreferenceIntervention p;
        if (iv.contains("bonus_cells")) p.bonus_cells = parse_cells(iv.at("bonus_cells"), "bonus_cells");
        maybe(iv, "bonus_magnitude", p.bonus_magnitude);
        maybe(iv, "n_trajectories", p.n_trajectories);
        cfg.experts.interventions.push_back(std::move(p));
      }
    }
  }

  if (j.contains("train")) {
    const auto& t = j.at("train");
    check_keys(t,
               {"lambda_ci", "lambda_l2", "lambda_lip", "lr", "iters", "setting_mode", "rmsprop_decay",
                "rmsprop_eps", "grad_tol", "spectral_iters"},
               "train");
    maybe(t, "lambda_ci", cfg.train.lambda_ci);
    maybe(t, "lambda_l2", cfg.train.lambda_l2);
    maybe(t, "lambda_lip", cfg.train.lambda_lip);
    maybe(t, "lr", cfg.train.lr);
    maybe(t, "iters", cfg.train.iters);
    if (t.contains("setting_mode")) cfg.train.setting_mode = setting_mode_from_string(t.at("setting_mode"));
    maybe(t, "rmsprop_decay", cfg.train.rmsprop_decay);
    maybe(t, "rmsprop_eps", cfg.train.rmsprop_eps);
    maybe(t, "grad_tol", cfg.train.grad_tol);
    maybe(t, "spectral_iters", cfg.train.spectral_iters);
  }

  if (j.contains("airl")) {
    const auto& a = j.at("airl");
    check_keys(a, {"buffer_size", "eval_rollouts", "state_only", "lip_interpolations", "agent_temperature"}, "airl");
    maybe(a, "buffer_size", cfg.airl.buffer_size);
    maybe(a, "eval_rollouts", cfg.airl.eval_rollouts);
    maybe(a, "state_only", cfg.airl.state_only);
    maybe(a, "lip_interpolations", cfg.airl.lip_interpolations);
    maybe(a, "agent_temperature", cfg.airl.agent_temperature);
  }

  if (j.contains("perturbations")) {
    for (const auto& p : j.at("perturbations")) {
      check_keys(p, {"kind", "cells", "slip_prob", "initial_dist"}, "perturbations[]");
      Perturbation pert;
      std::string kind = p.at("kind").get<std::string>();
      if (kind == "add-obstacles") {
        pert.kind = Perturbation::Kind::AddObstacles;
        pert.cells = parse_cells(p.at("cells"), "perturbations.cells");
      } else if (kind == "change-slip") {
        pert.kind = Perturbation::Kind::ChangeSlip;
        pert.slip_prob = p.at("slip_prob").get<double>();
      } else if (kind == "shift-initial") {
        pert.kind = Perturbation::Kind::ShiftInitial;
        pert.initial_dist = p.at("initial_dist").get<std::vector<double>>();
      } else {
        throw ConfigError("config: unknown perturbation kind \"" + kind + "\"");
      }
      cfg.perturbations.push_back(std::move(pert));
    }
  }

  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    check_keys(e, {"n_rollouts", "n_seeds", "standardize", "discounted_return"}, "eval");
    maybe(e, "n_rollouts", cfg.eval.n_rollouts);
    maybe(e, "n_seeds", cfg.eval.n_seeds);
    maybe(e, "standardize", cfg.eval.standardize);
    maybe(e, "discounted_return", cfg.eval.discounted_return);
  }

  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) { return parse_config(read_file(path)); }

std::string config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["version"] = cfg.version;
  j["pipeline"] = cfg.pipeline;
  j["seed"] = cfg.seed;
  j["discount"] = cfg.discount;
  j["horizon"] = cfg.horizon;
  j["output_dir"] = cfg.output_dir.string();
  j["gridworld"] = {{"width", cfg.gridworld.width},
                    {"height", cfg.gridworld.height},
                    {"slip_prob", cfg.gridworld.slip_prob},
                    {"goal_reward", cfg.gridworld.goal_reward},
                    {"step_reward", cfg.gridworld.step_reward},
                    {"obstacles", cells_json(cfg.gridworld.obstacles)},
                    {"start_cells", cells_json(cfg.gridworld.start_cells)},
                    {"goal_cells", cells_json(cfg.gridworld.goal_cells)}};
  j["features"] = {{"input_encoding", to_string(cfg.features.encoding)},
                   {"hidden_dims", cfg.features.hidden_dims},
                   {"output_dim", cfg.features.output_dim},
                   {"activation", to_string(cfg.features.activation)}};
  json ivs = json::array();
  for (const auto& iv : cfg.experts.interventions)
    ivs.push_back({{"bonus_cells", cells_json(iv.bonus_cells)},
                   {"bonus_magnitude", iv.bonus_magnitude},
                   {"n_trajectories", iv.n_trajectories}});
  j["experts"] = {{"temperature", cfg.experts.temperature}, {"interventions", std::move(ivs)}};
  j["train"] = {{"lambda_ci", cfg.train.lambda_ci},
                {"lambda_l2", cfg.train.lambda_l2},
                {"lambda_lip", cfg.train.lambda_lip},
                {"lr", cfg.train.lr},
                {"iters", cfg.train.iters},
                {"setting_mode", to_string(cfg.train.setting_mode)},
                {"rmsprop_decay", cfg.train.rmsprop_decay},
                {"rmsprop_eps", cfg.train.rmsprop_eps},
                {"grad_tol", cfg.train.grad_tol},
                {"spectral_iters", cfg.train.spectral_iters}};
  j["airl"] = {{"buffer_size", cfg.airl.buffer_size},
               {"eval_rollouts", cfg.airl.eval_rollouts},
               {"state_only", cfg.airl.state_only},
               {"lip_interpolations", cfg.airl.lip_interpolations},
               {"agent_temperature", cfg.airl.agent_temperature}};
  json perts = json::array();
  for (const auto& p : cfg.perturbations) {
    json pj;
    switch (p.kind) {
      case Perturbation::Kind::AddObstacles:
        pj = {{"kind", "add-obstacles"}, {"cells", cells_json(p.cells)}};
        break;
      case Perturbation::Kind::ChangeSlip:
        pj = {{"kind", "change-slip"}, {"slip_prob", p.slip_prob}};
        break;
      case Perturbation::Kind::ShiftInitial:
        pj = {{"kind", "shift-initial"}, {"initial_dist", p.initial_dist}};
        break;
    }
    perts.push_back(std::move(pj));
  }
  j["perturbations"] = std::move(perts);
  j["eval"] = {{"n_rollouts", cfg.eval.n_rollouts},
               {"n_seeds", cfg.eval.n_seeds},
               {"standardize", cfg.eval.standardize},
               {"discounted_return", cfg.eval.discounted_return}};
  return j.dump(1);
}

ExperimentConfig default_experiment_config(bool caption_sizes) {
  ExperimentConfig cfg;
  cfg.gridworld.width = 16;
  cfg.gridworld.height = 16;
  cfg.gridworld.slip_prob = 0.1;
  cfg.gridworld.goal_reward = 1.0;
  cfg.gridworld.step_reward = 0.0;
  cfg.gridworld.start_cells = {{0, 0}};
  cfg.gridworld.goal_cells = {{15, 15}};
  cfg.horizon = 48;
  cfg.discount = 0.95;

  const int w = cfg.gridworld.width, h = cfg.gridworld.height;
  // three shortest start-to-goal corridors the expert groups prefer
  PreferenceIntervention low_road;  // bottom row, then right column
  for (int x = 1; x < w; ++x) low_road.bonus_cells.push_back({x, 0});
  for (int y = 1; y < h - 1; ++y) low_road.bonus_cells.push_back({w - 1, y});
  PreferenceIntervention high_road;  // left column, then top row
  for (int y = 1; y < h; ++y) high_road.bonus_cells.push_back({0, y});
  for (int x = 1; x < w - 1; ++x) high_road.bonus_cells.push_back({x, h - 1});
  PreferenceIntervention stair_road;  // diagonal staircase
  for (int k = 1; k < w; ++k) {
    stair_road.bonus_cells.push_back({k, k - 1});
    if (!(k == w - 1)) stair_road.bonus_cells.push_back({k, k});
  }
  low_road.bonus_magnitude = high_road.bonus_magnitude = stair_road.bonus_magnitude = 0.1;
  low_road.n_trajectories = caption_sizes ? 400 : 40;
  high_road.n_trajectories = caption_sizes ? 25 : 10;
  stair_road.n_trajectories = caption_sizes ? 3 : 1;
  cfg.experts.interventions = {low_road, high_road, stair_road};
  cfg.experts.temperature = 0.05;

  // obstacle wall blocking the majority corridor
  Perturbation wall;
  wall.kind = Perturbation::Kind::AddObstacles;
  for (int y = 0; y <= 7; ++y) wall.cells.push_back({8, y});
  cfg.perturbations = {wall};

  cfg.train.iters = 300;
  cfg.train.lr = 1e-3;
  cfg.features.encoding = InputEncoding::Coords;
  cfg.features.hidden_dims = {1};
  cfg.features.output_dim = 4;
  return cfg;
}

}  // namespace ciirl
