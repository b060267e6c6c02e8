#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ciirl {

struct InvalidSpecError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct InvalidPerturbationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct GridCell {
  int x = 0;
  int y = 0;
  friend bool operator==(const GridCell&, const GridCell&) = default;
};

/// Movement action indices, fixed for file-format stability.
enum GridAction : int { kUp = 0, kDown = 1, kLeft = 2, kRight = 3, kStay = 4 };
inline constexpr int kGridActions = 5;

struct GridworldSpec {
  int width = 16;
  int height = 16;
  std::vector<GridCell> obstacles;
  std::vector<GridCell> start_cells;  // initial distribution is uniform over these
  std::vector<GridCell> goal_cells;   // absorbing
  double slip_prob = 0.0;
  double goal_reward = 1.0;
  double step_reward = 0.0;

  /// Throws InvalidSpecError on out-of-bounds or overlapping cell sets.
  void validate() const;
  int state_of(const GridCell& c) const { return c.y * width + c.x; }
  GridCell cell_of(int s) const { return {s % width, s / width}; }
};

/// Finite MDP with a dense transition tensor plus per-(s,a) successor lists
/// for the solver hot loops. Immutable after construction.
class TabularMdp {
 public:
  struct Successor {
    int state;
    double prob;
  };

  TabularMdp(int n_states, int n_actions, std::vector<double> transition,
             std::vector<double> initial_dist, double discount, int horizon);

  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  double discount() const { return discount_; }
  int horizon() const { return horizon_; }
  double transition(int s, int a, int s2) const {
    return transition_[(static_cast<std::size_t>(s) * n_actions_ + a) * n_states_ + s2];
  }
  std::span<const double> transition_row(int s, int a) const {
    return {&transition_[(static_cast<std::size_t>(s) * n_actions_ + a) * n_states_], static_cast<std::size_t>(n_states_)};
  }
  std::span<const Successor> successors(int s, int a) const {
    return successors_[static_cast<std::size_t>(s) * n_actions_ + a];
  }
  std::span<const double> initial_dist() const { return initial_dist_; }
  const std::vector<double>& transition_tensor() const { return transition_; }

  /// True when every action self-loops with probability 1.
  bool is_absorbing(int s) const { return absorbing_[s]; }

  TabularMdp with_initial_dist(std::vector<double> initial_dist) const;
  TabularMdp with_transition(std::vector<double> transition) const;

 private:
  int n_states_;
  int n_actions_;
  std::vector<double> transition_;    // (s, a, s') flattened
  std::vector<double> initial_dist_;  // mu0
  double discount_;
  int horizon_;
  std::vector<std::vector<Successor>> successors_;
  std::vector<char> absorbing_;
};

struct Perturbation {
  enum class Kind { AddObstacles, ChangeSlip, ShiftInitial };
  Kind kind = Kind::AddObstacles;
  std::vector<GridCell> cells;       // AddObstacles payload
  double slip_prob = 0.0;            // ChangeSlip payload
  std::vector<double> initial_dist;  // ShiftInitial payload

  std::string describe() const;
};

/// A gridworld MDP together with its generating spec and the ground-truth
/// state reward (goal_reward on goals, step_reward elsewhere).
struct Gridworld {
  GridworldSpec spec;
  TabularMdp mdp;
  std::vector<double> true_reward;

  int state_of(const GridCell& c) const { return spec.state_of(c); }
  bool is_goal(int s) const;
  /// BFS shortest-path distance to the nearest goal through free cells;
  /// unreachable cells get width*height.
  std::vector<int> goal_distances() const;
};

/// Row-major state indexing (y*width + x). Actions: up, down, left, right,
/// stay. With probability slip_prob the move is replaced by a uniformly
/// random one of the four directions; moves into obstacles or off-grid are
/// self-transitions; goal cells are absorbing.
Gridworld build_gridworld(const GridworldSpec& spec, double discount = 0.95, int horizon = 48);

/// Returns a new gridworld; the input is unchanged. AddObstacles is applied
/// directly to the transition tensor (mass into each blocked cell moves to
/// the self-transition); ChangeSlip rebuilds from the edited spec;
/// ShiftInitial replaces the initial distribution.
Gridworld apply_perturbation(const Gridworld& gw, const Perturbation& p);

}  // namespace ciirl
