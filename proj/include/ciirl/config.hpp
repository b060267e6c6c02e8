#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ciirl/features.hpp"
#include "ciirl/maxent.hpp"
#include "ciirl/mdp.hpp"
#include "ciirl/trajectories.hpp"

namespace ciirl {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FeatureConfig {
  InputEncoding encoding = InputEncoding::Coords;
  std::vector<int> hidden_dims = {1};
  int output_dim = 4;
  Activation activation = Activation::Tanh;
};

struct ExpertConfig {
  double temperature = 0.05;
  std::vector<PreferenceIntervention> interventions;
};

struct AirlSection {
  int buffer_size = 32;
  int eval_rollouts = 32;
  bool state_only = false;
  int lip_interpolations = 16;
  double agent_temperature = 0.2;
};

struct EvalConfig {
  int n_rollouts = 10;
  int n_seeds = 5;
  bool standardize = true;
  bool discounted_return = false;
};

/// Full experiment description. Parsed from strict JSON: unknown fields are
/// rejected, a `version` field is required.
struct ExperimentConfig {
  int version = 1;
  std::string pipeline = "fmirl";  // fmirl | airl-toy
  std::uint64_t seed = 1;
  GridworldSpec gridworld;
  double discount = 0.95;
  int horizon = 48;
  FeatureConfig features;
  ExpertConfig experts;
  TrainConfig train;
  AirlSection airl;
  std::vector<Perturbation> perturbations;
  EvalConfig eval;
  std::filesystem::path output_dir = "out";

  void validate() const;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& cfg);

/// The bundled three-corridor imbalanced-experts experiment (40/10/1 group
/// sizes on a 16x16 grid). `caption_sizes` switches the group sizes to the
/// alternative 400/25/3 preset.
ExperimentConfig default_experiment_config(bool caption_sizes = false);

}  // namespace ciirl
