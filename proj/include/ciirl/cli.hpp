#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ciirl/config.hpp"
#include "ciirl/eval.hpp"

namespace ciirl {

/// Min-max normalization of a reward grid to 0..255 (constant input maps to
/// mid-gray 128), emitted as a plain-text PGM (P2). Image row k is grid row
/// y = k in row-major state order.
std::string render_pgm(std::span<const double> values, int width, int height);
/// The same grid as a CSV matrix of raw values, row-major.
std::string render_csv(std::span<const double> values, int width, int height);
std::vector<double> parse_render_csv(const std::string& text, int* width, int* height);

struct CliOptions {
  std::optional<std::filesystem::path> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out_dir;
  int jobs = 1;
};

ExperimentConfig resolve_config(const CliOptions& opts, bool allow_default = false);

/// Writes one dataset file per setting plus a provenance manifest with
/// seeds, intervention parameters and file checksums.
int cmd_gen_experts(const ExperimentConfig& cfg);

/// Trains the configured pipeline; writes a reward checkpoint and the
/// per-iteration trace CSV. Datasets are loaded from the output directory
/// when a previous gen-experts pass left them there, otherwise they are
/// regenerated from the config seed. `label` overrides the method label
/// derived from the penalty coefficients (lambda_ci = 0 is "erm").
int cmd_train(const ExperimentConfig& cfg, std::optional<std::string> label = std::nullopt);

int cmd_render(const std::filesystem::path& checkpoint, const ExperimentConfig& cfg);

/// Transfer evaluation of trained checkpoints over the configured
/// perturbations; writes the results CSV.
int cmd_eval(const ExperimentConfig& cfg, const std::vector<std::pair<std::string, std::filesystem::path>>& checkpoints,
             int jobs = 1);

/// One-shot pipeline: generate experts, train the erm / erm-l2 / ci-0.01 /
/// ci-0.05 variants, render every recovered reward.
int cmd_repro_fig2(const ExperimentConfig& cfg, int jobs = 1);

std::string method_label(const TrainConfig& cfg);

/// Recovered state reward of a checkpoint (reward models directly,
/// discriminators via their mean logit per state).
std::vector<double> checkpoint_state_rewards(const std::filesystem::path& path);

}  // namespace ciirl
