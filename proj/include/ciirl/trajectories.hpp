#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ciirl/mdp.hpp"

namespace ciirl {

/// One demonstration: parallel state/action index sequences of equal length.
struct Trajectory {
  std::vector<int> states;
  std::vector<int> actions;
  int setting_id = 0;

  std::size_t length() const { return states.size(); }
  friend bool operator==(const Trajectory&, const Trajectory&) = default;

  /// Checks index ranges and positive transition probability of every
  /// consecutive (s, a, s') under the generating MDP.
  void validate(const TabularMdp& mdp) const;
};

/// Trajectories from one intervention setting, grouped per expert source.
struct SettingDataset {
  int setting_id = 0;
  std::vector<Trajectory> trajectories;
  std::string provenance;
};

/// Expert preference intervention: a reward bonus painted on a set of cells.
struct PreferenceIntervention {
  std::vector<GridCell> bonus_cells;
  double bonus_magnitude = 0.0;
  int n_trajectories = 1;
};

/// Per-state feature evaluator; must be defined on all states.
using FeatureFn = std::function<std::vector<double>(int state)>;

/// Sum of per-state features along the trajectory. discount=1 is the
/// plain undiscounted sum; the discounted variant exists for the transfer
/// evaluator only.
std::vector<double> trajectory_features(const Trajectory& traj, const FeatureFn& feat, int feature_dim,
                                        double discount = 1.0);

std::vector<double> empirical_feature_expectation(const SettingDataset& ds, const FeatureFn& feat, int feature_dim);

/// Mean visit counts per state (sum over timesteps, averaged over the
/// dataset); the one-hot-feature special case of the expectation above.
std::vector<double> empirical_visit_counts(const SettingDataset& ds, int n_states);

/// Solves soft value iteration on (truth + bonus) / temperature per
/// intervention and samples n_trajectories rollouts. Setting e uses the
/// derived seed (seed, e), so settings are independent streams.
std::vector<SettingDataset> gen_expert_settings(const Gridworld& gw,
                                                const std::vector<PreferenceIntervention>& interventions,
                                                double temperature, std::uint64_t seed);

/// Newline-delimited records, one trajectory per line as
/// `setting_id;s1,a1;s2,a2;...`, preceded by a versioned header.
std::string serialize_dataset(const SettingDataset& ds, int width, int height, int n_actions);
SettingDataset parse_dataset(const std::string& text, const TabularMdp* validate_against = nullptr);

void save_dataset(const std::filesystem::path& path, const SettingDataset& ds, int width, int height, int n_actions);
SettingDataset load_dataset(const std::filesystem::path& path, const TabularMdp* validate_against = nullptr);

}  // namespace ciirl
