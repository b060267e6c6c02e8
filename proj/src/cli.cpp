#include "ciirl/cli.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"

#include "ciirl/dual.hpp"
#include "ciirl/solver.hpp"
#include "ciirl/util.hpp"

namespace ciirl {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string render_pgm(std::span<const double> values, int width, int height) {
  if (values.size() != static_cast<std::size_t>(width) * height)
    throw std::invalid_argument("render_pgm: value count does not match grid");
  double lo = *std::min_element(values.begin(), values.end());
  double hi = *std::max_element(values.begin(), values.end());
  std::ostringstream out;
  out << "P2\n" << width << " " << height << "\n255\n";
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      int v = hi > lo ? static_cast<int>(std::lround((values[y * width + x] - lo) / (hi - lo) * 255.0)) : 128;
      out << v << (x + 1 == width ? "" : " ");
    }
    out << "\n";
  }
  return out.str();
}

std::string render_csv(std::span<const double> values, int width, int height) {
  if (values.size() != static_cast<std::size_t>(width) * height)
    throw std::invalid_argument("render_csv: value count does not match grid");
  std::ostringstream out;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) out << format_double(values[y * width + x]) << (x + 1 == width ? "" : ",");
    out << "\n";
  }
  return out.str();
}

std::vector<double> parse_render_csv(const std::string& text, int* width, int* height) {
  std::vector<double> values;
  std::istringstream in(text);
  std::string line;
  int w = -1, h = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    int count = 0;
    while (std::getline(row, cell, ',')) {
      values.push_back(std::strtod(cell.c_str(), nullptr));
      ++count;
    }
    if (w < 0) w = count;
    if (count != w) throw std::invalid_argument("render csv: ragged rows");
    ++h;
  }
  if (width != nullptr) *width = w;
  if (height != nullptr) *height = h;
  return values;
}

ExperimentConfig resolve_config(const CliOptions& opts, bool allow_default) {
  ExperimentConfig cfg;
  if (opts.config_path.has_value()) {
    cfg = load_config(*opts.config_path);
  } else if (allow_default) {
    cfg = default_experiment_config();
  } else {
    throw ConfigError("missing --config");
  }
  if (opts.seed.has_value()) cfg.seed = *opts.seed;
  if (opts.out_dir.has_value()) cfg.output_dir = *opts.out_dir;
  return cfg;
}

std::string method_label(const TrainConfig& cfg) {
  std::ostringstream label;
  if (cfg.lambda_ci > 0.0) {
    label << "ci-" << format_double(cfg.lambda_ci);
  } else if (cfg.lambda_l2 > 0.0) {
    label << "erm-l2";
  } else if (cfg.lambda_lip > 0.0) {
    label << "erm-lip";
  } else {
    label << "erm";
  }
  return label.str();
}

namespace {

fs::path dataset_path(const ExperimentConfig& cfg, int setting) {
  return cfg.output_dir / "datasets" / ("setting_" + std::to_string(setting) + ".txt");
}

std::vector<SettingDataset> obtain_datasets(const ExperimentConfig& cfg, const Gridworld& gw) {
  std::vector<SettingDataset> datasets;
  bool all_present = true;
  for (std::size_t e = 0; e < cfg.experts.interventions.size(); ++e)
    all_present = all_present && fs::exists(dataset_path(cfg, static_cast<int>(e)));
  if (all_present) {
    for (std::size_t e = 0; e < cfg.experts.interventions.size(); ++e)
      datasets.push_back(load_dataset(dataset_path(cfg, static_cast<int>(e)), &gw.mdp));
    log_debug("loaded datasets from " + (cfg.output_dir / "datasets").string());
  } else {
    datasets = gen_expert_settings(gw, cfg.experts.interventions, cfg.experts.temperature, cfg.seed);
  }
  return datasets;
}

RewardModel build_model(const ExperimentConfig& cfg, const Gridworld& gw, std::uint64_t seed) {
  return make_reward_model(gw, cfg.features.encoding, cfg.features.hidden_dims, cfg.features.output_dim,
                           cfg.features.activation, seed);
}

void render_to(const ExperimentConfig& cfg, const std::string& label, std::span<const double> reward) {
  fs::path dir = cfg.output_dir / "renders";
  atomic_write_file(dir / (label + ".pgm"), render_pgm(reward, cfg.gridworld.width, cfg.gridworld.height));
  atomic_write_file(dir / (label + ".csv"), render_csv(reward, cfg.gridworld.width, cfg.gridworld.height));
}

struct TrainedArtifacts {
  std::string label;
  std::vector<double> state_rewards;
};

TrainedArtifacts train_and_save(const ExperimentConfig& cfg, const Gridworld& gw,
                                const std::vector<SettingDataset>& datasets, const TrainConfig& tc,
                                const std::string& label) {
  TrainedArtifacts out;
  out.label = label;
  fs::path ckpt = cfg.output_dir / "checkpoints" / (label + ".json");
  fs::path trace = cfg.output_dir / "traces" / (label + "_trace.csv");
  if (cfg.pipeline == "airl-toy") {
    Discriminator disc = make_discriminator(gw, cfg.features.encoding, cfg.features.hidden_dims,
                                            cfg.features.output_dim, cfg.features.activation,
                                            Rng::derive_seed(tc.seed, 0xd15c), cfg.airl.state_only);
    AirlConfig acfg;
    acfg.buffer_size = cfg.airl.buffer_size;
    acfg.eval_rollouts = cfg.airl.eval_rollouts;
    acfg.state_only = cfg.airl.state_only;
    acfg.lip_interpolations = cfg.airl.lip_interpolations;
    acfg.agent_temperature = cfg.airl.agent_temperature;
    AirlResult res = train_ci_airl_toy(gw.mdp, gw.true_reward, datasets, tc, acfg, std::move(disc));
    if (res.saturation_warning) log_info("warning: discriminator saturated during training (" + label + ")");
    write_airl_trace_csv(trace, res.trace);
    save_checkpoint(ckpt, res.disc.net, res.disc.head, "discriminator", to_string(cfg.features.encoding),
                    cfg.gridworld.width, cfg.gridworld.height);
    out.state_rewards = res.disc.state_rewards();
  } else {
    RewardModel model = build_model(cfg, gw, Rng::derive_seed(tc.seed, 0xfea7));
    try {
      FmirlResult res = train_ci_fmirl(gw.mdp, datasets, tc, std::move(model));
      write_fmirl_trace_csv(trace, res.trace);
      save_checkpoint(ckpt, res.model.net, res.model.head, "reward", to_string(cfg.features.encoding),
                      cfg.gridworld.width, cfg.gridworld.height);
      out.state_rewards = res.model.state_rewards();
    } catch (const TrainingDivergedError& ex) {
      write_fmirl_trace_csv(trace, ex.trace);  // preserve the trace on divergence
      throw;
    }
  }
  return out;
}

}  // namespace

int cmd_gen_experts(const ExperimentConfig& cfg) {
  Gridworld gw = build_gridworld(cfg.gridworld, cfg.discount, cfg.horizon);
  auto datasets = gen_expert_settings(gw, cfg.experts.interventions, cfg.experts.temperature, cfg.seed);

  json manifest;
  manifest["format"] = "ci-irl-manifest";
  manifest["version"] = 1;
  manifest["master_seed"] = cfg.seed;
  json files = json::array();
  for (std::size_t e = 0; e < datasets.size(); ++e) {
    fs::path path = dataset_path(cfg, static_cast<int>(e));
    std::string payload =
        serialize_dataset(datasets[e], cfg.gridworld.width, cfg.gridworld.height, gw.mdp.n_actions());
    atomic_write_file(path, payload);
    const auto& iv = cfg.experts.interventions[e];
    json cells = json::array();
    for (const auto& c : iv.bonus_cells) cells.push_back({c.x, c.y});
    files.push_back({{"file", path.filename().string()},
                     {"crc32", crc32_hex(payload)},
                     {"setting", datasets[e].setting_id},
                     {"seed", Rng::derive_seed(cfg.seed, e)},
                     {"n_trajectories", iv.n_trajectories},
                     {"bonus_magnitude", iv.bonus_magnitude},
                     {"temperature", cfg.experts.temperature},
                     {"bonus_cells", std::move(cells)}});
    log_info("wrote " + path.string() + " (" + std::to_string(datasets[e].trajectories.size()) + " trajectories)");
  }
  manifest["settings"] = std::move(files);
  atomic_write_file(cfg.output_dir / "manifest.json", manifest.dump(1));
  return 0;
}

int cmd_train(const ExperimentConfig& cfg, std::optional<std::string> label) {
  Gridworld gw = build_gridworld(cfg.gridworld, cfg.discount, cfg.horizon);
  auto datasets = obtain_datasets(cfg, gw);
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  std::string name = label.value_or(method_label(tc));
  train_and_save(cfg, gw, datasets, tc, name);
  log_info("trained " + name + "; checkpoint + trace written under " + cfg.output_dir.string());
  return 0;
}

std::vector<double> checkpoint_state_rewards(const std::filesystem::path& path) {
  Checkpoint ck = load_checkpoint(path);
  const int n_states = ck.width * ck.height;
  if (ck.kind == "discriminator") {
    const int items = ck.net.n_items();
    if (items == n_states) {  // state-only discriminator
      std::vector<double> out(n_states);
      for (int s = 0; s < n_states; ++s) out[s] = ck.head.dot(ck.net.forward(s));
      return out;
    }
    const int n_actions = items / n_states;
    std::vector<double> out(n_states, 0.0);
    for (int s = 0; s < n_states; ++s) {
      for (int a = 0; a < n_actions; ++a) out[s] += ck.head.dot(ck.net.forward(s * n_actions + a));
      out[s] /= n_actions;
    }
    return out;
  }
  std::vector<double> out(n_states);
  for (int s = 0; s < n_states; ++s) out[s] = ck.head.dot(ck.net.forward(s));
  return out;
}

int cmd_render(const std::filesystem::path& checkpoint, const ExperimentConfig& cfg) {
  if (!fs::exists(checkpoint)) throw std::runtime_error("checkpoint not found: " + checkpoint.string());
  std::vector<double> reward = checkpoint_state_rewards(checkpoint);
  std::string label = checkpoint.stem().string();
  render_to(cfg, label, reward);
  log_info("rendered " + label + " under " + (cfg.output_dir / "renders").string());
  return 0;
}

int cmd_eval(const ExperimentConfig& cfg, const std::vector<std::pair<std::string, fs::path>>& checkpoints,
             int jobs) {
  (void)jobs;
  if (cfg.perturbations.empty()) throw ConfigError("eval: empty perturbation list");
  if (checkpoints.empty()) throw ConfigError("eval: no checkpoints given");
  Gridworld gw = build_gridworld(cfg.gridworld, cfg.discount, cfg.horizon);

  std::vector<std::pair<std::string, std::vector<double>>> rewards;
  for (const auto& [label, path] : checkpoints) {
    if (!fs::exists(path)) throw std::runtime_error("checkpoint not found for \"" + label + "\": " + path.string());
    rewards.emplace_back(label, checkpoint_state_rewards(path));
  }
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < cfg.eval.n_seeds; ++i) seeds.push_back(Rng::derive_seed(cfg.seed, 9000 + i));
  SweepTable table = evaluate_rewards(rewards, gw, gw.true_reward, cfg.perturbations, seeds, cfg.eval.n_rollouts,
                                      cfg.eval.standardize);
  write_results_csv(cfg.output_dir / "results.csv", table);
  log_info("wrote " + (cfg.output_dir / "results.csv").string());
  return 0;
}

int cmd_repro_fig2(const ExperimentConfig& cfg, int jobs) {
  (void)jobs;
  atomic_write_file(cfg.output_dir / "config.json", config_to_json(cfg));
  cmd_gen_experts(cfg);

  Gridworld gw = build_gridworld(cfg.gridworld, cfg.discount, cfg.horizon);
  auto datasets = obtain_datasets(cfg, gw);

  struct Variant {
    std::string label;
    double lambda_ci;
    double lambda_l2;
  };
  const std::vector<Variant> variants = {
      {"erm", 0.0, 0.0}, {"erm-l2", 0.0, 1e-3}, {"ci-0.01", 0.01, 0.0}, {"ci-0.05", 0.05, 0.0}};
  for (const auto& v : variants) {
    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    tc.lambda_ci = v.lambda_ci;
    tc.lambda_l2 = v.lambda_l2;
    tc.lambda_lip = 0.0;
    TrainedArtifacts art = train_and_save(cfg, gw, datasets, tc, v.label);
    render_to(cfg, v.label, art.state_rewards);
    log_info("finished variant " + v.label);
  }
  // ground truth panel for reference
  render_to(cfg, "truth", gw.true_reward);
  return 0;
}

}  // namespace ciirl
