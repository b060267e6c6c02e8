#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ciirl/maxent.hpp"
#include "ciirl/mdp.hpp"

namespace ciirl {

/// One transfer run: a recovered reward retrained under a dynamics
/// perturbation and scored with the ground truth.
struct TransferResult {
  std::string method_label;
  double lambda_used = 0.0;
  std::string perturbation;
  std::uint64_t seed = 0;
  double ground_truth_return = 0.0;  // mean over rollouts
  double return_std = 0.0;           // over rollouts
  int n_rollouts = 0;
  bool ok = true;
  std::string error;
};

/// Zero mean, unit variance over states; an all-constant reward maps to all
/// zeros.
std::vector<double> standardize_reward(std::span<const double> reward);

/// Applies the perturbation, extracts the greedy policy for the recovered
/// reward by hard value iteration in the perturbed MDP, and scores
/// n_rollouts episodes with the ground-truth reward.
TransferResult transfer_eval(std::span<const double> recovered, const Gridworld& base,
                             std::span<const double> truth, const Perturbation& pert, int n_rollouts,
                             std::uint64_t seed, bool standardize = true, double return_discount = 1.0);

struct SweepMethod {
  std::string label;
  TrainConfig cfg;
};

/// Trains one method at one seed and returns the recovered state reward.
using TrainerFn = std::function<std::vector<double>(const TrainConfig& cfg, std::uint64_t seed)>;

struct SweepAggregate {
  std::string method_label;
  double lambda_used = 0.0;
  std::string perturbation;
  double return_mean = 0.0;
  double return_std = 0.0;  // sample std over seeds
  int n_seeds = 0;
  int n_rollouts = 0;
};

struct SweepTable {
  std::vector<TransferResult> rows;
  std::vector<SweepAggregate> aggregates;
};

/// Cartesian product methods x seeds x perturbations, executed
/// deterministically (identical triples reproduce identical rows bit for
/// bit). A failing cell is recorded and the sweep continues. jobs > 1
/// parallelizes (method, seed) training cells; aggregation order is fixed.
SweepTable sweep(const TrainerFn& trainer, const std::vector<SweepMethod>& methods, const Gridworld& base,
                 std::span<const double> truth, const std::vector<Perturbation>& perts,
                 const std::vector<std::uint64_t>& seeds, int n_rollouts, bool standardize = true, int jobs = 1);

/// Evaluates fixed recovered rewards (e.g. loaded checkpoints) over
/// perturbations and rollout seeds without retraining.
SweepTable evaluate_rewards(const std::vector<std::pair<std::string, std::vector<double>>>& labeled_rewards,
                            const Gridworld& base, std::span<const double> truth,
                            const std::vector<Perturbation>& perts, const std::vector<std::uint64_t>& seeds,
                            int n_rollouts, bool standardize = true);

/// Fixed column order: method, lambda, perturbation, seed, return_mean,
/// return_std, n_rollouts. Aggregate rows carry seed = "all".
std::string results_csv(const SweepTable& table);
void write_results_csv(const std::filesystem::path& path, const SweepTable& table);

}  // namespace ciirl
