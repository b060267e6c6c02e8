#include <CLI11.hpp>
#include <iostream>

#include "ciirl/cli.hpp"
#include "ciirl/util.hpp"

using namespace ciirl;

int main(int argc, char** argv) {
  CLI::App app{"Causally-invariant inverse reinforcement learning on tabular gridworlds"};
  app.require_subcommand(1);

  CliOptions opts;
  std::string config_arg, out_arg;
  std::uint64_t seed_arg = 0;
  bool seed_set = false;

  auto add_common = [&](CLI::App* cmd, bool config_required) {
    auto* c = cmd->add_option("--config", config_arg, "experiment config JSON");
    if (config_required) c->required();
    cmd->add_option("--seed", seed_arg, "override the config master seed")->each([&](const std::string&) {
      seed_set = true;
    });
    cmd->add_option("--out", out_arg, "override the config output directory");
    cmd->add_option("--jobs", opts.jobs, "parallel workers for sweep cells")->check(CLI::PositiveNumber);
  };

  auto* gen = app.add_subcommand("gen-experts", "generate expert trajectory datasets");
  add_common(gen, true);

  auto* train = app.add_subcommand("train", "train a reward on the configured pipeline");
  std::string train_label;
  add_common(train, true);
  train->add_option("--label", train_label, "method label for output files");

  auto* render = app.add_subcommand("render", "render a recovered reward as PGM + CSV");
  std::string checkpoint_arg;
  add_common(render, true);
  render->add_option("--checkpoint", checkpoint_arg, "reward checkpoint path")->required();

  auto* eval = app.add_subcommand("eval", "transfer-evaluate checkpoints under perturbations");
  std::vector<std::string> checkpoint_args;
  add_common(eval, true);
  eval->add_option("--checkpoint", checkpoint_args, "label=path (repeatable)")->required();

  auto* repro = app.add_subcommand("repro-fig2", "one-shot pipeline over the erm/erm-l2/ci variants");
  add_common(repro, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (!config_arg.empty()) opts.config_path = config_arg;
    if (seed_set) opts.seed = seed_arg;
    if (!out_arg.empty()) opts.out_dir = out_arg;

    if (gen->parsed()) return cmd_gen_experts(resolve_config(opts));
    if (train->parsed())
      return cmd_train(resolve_config(opts),
                       train_label.empty() ? std::nullopt : std::optional<std::string>(train_label));
    if (render->parsed()) return cmd_render(checkpoint_arg, resolve_config(opts));
    if (eval->parsed()) {
      std::vector<std::pair<std::string, std::filesystem::path>> checkpoints;
      for (const auto& arg : checkpoint_args) {
        auto eq = arg.find('=');
        if (eq == std::string::npos) {
          std::filesystem::path p(arg);
          checkpoints.emplace_back(p.stem().string(), p);
        } else {
          checkpoints.emplace_back(arg.substr(0, eq), arg.substr(eq + 1));
        }
      }
      return cmd_eval(resolve_config(opts), checkpoints, opts.jobs);
    }
    if (repro->parsed()) return cmd_repro_fig2(resolve_config(opts, /*allow_default=*/true), opts.jobs);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 1;
}
