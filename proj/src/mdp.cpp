#include "ciirl/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>

namespace ciirl {

namespace {

constexpr double kRowTol = 1e-12;

void check_cells(const GridworldSpec& spec, const std::vector<GridCell>& cells, const char* what) {
  for (const auto& c : cells) {
    if (c.x < 0 || c.x >= spec.width || c.y < 0 || c.y >= spec.height) {
      std::ostringstream ss;
      ss << what << " cell (" << c.x << "," << c.y << ") outside " << spec.width << "x" << spec.height << " grid";
      throw InvalidSpecError(ss.str());
    }
  }
}

bool contains(const std::vector<GridCell>& cells, const GridCell& c) {
  return std::find(cells.begin(), cells.end(), c) != cells.end();
}

}  // namespace

void GridworldSpec::validate() const {
  if (width <= 0 || height <= 0) throw InvalidSpecError("grid dimensions must be positive");
  if (slip_prob < 0.0 || slip_prob >= 1.0) throw InvalidSpecError("slip_prob must be in [0,1)");
  if (start_cells.empty()) throw InvalidSpecError("at least one start cell required");
  check_cells(*this, obstacles, "obstacle");
  check_cells(*this, start_cells, "start");
  check_cells(*this, goal_cells, "goal");
  for (const auto& c : start_cells) {
    if (contains(obstacles, c)) throw InvalidSpecError("start cell overlaps obstacle");
    if (contains(goal_cells, c)) throw InvalidSpecError("start cell overlaps goal");
  }
  for (const auto& c : goal_cells)
    if (contains(obstacles, c)) throw InvalidSpecError("goal cell overlaps obstacle");
}

TabularMdp::TabularMdp(int n_states, int n_actions, std::vector<double> transition,
                       std::vector<double> initial_dist, double discount, int horizon)
    : n_states_(n_states),
      n_actions_(n_actions),
      transition_(std::move(transition)),
      initial_dist_(std::move(initial_dist)),
      discount_(discount),
      horizon_(horizon) {
  if (n_states_ <= 0 || n_actions_ <= 0) throw std::invalid_argument("empty state or action set");
  if (transition_.size() != static_cast<std::size_t>(n_states_) * n_actions_ * n_states_)
    throw std::invalid_argument("transition tensor has wrong size");
  if (initial_dist_.size() != static_cast<std::size_t>(n_states_))
    throw std::invalid_argument("initial distribution has wrong size");
  if (!(discount_ > 0.0 && discount_ < 1.0)) throw std::invalid_argument("discount must be in (0,1)");
  if (horizon_ < 1) throw std::invalid_argument("horizon must be >= 1");

  double mu_sum = 0.0;
  for (double p : initial_dist_) {
    if (p < 0.0 || !std::isfinite(p)) throw std::invalid_argument("initial distribution has bad entry");
    mu_sum += p;
  }
  if (std::abs(mu_sum - 1.0) > kRowTol) throw std::invalid_argument("initial distribution does not sum to 1");

  successors_.resize(static_cast<std::size_t>(n_states_) * n_actions_);
  absorbing_.assign(n_states_, 1);
  for (int s = 0; s < n_states_; ++s) {
    for (int a = 0; a < n_actions_; ++a) {
      auto row = transition_row(s, a);
      double sum = 0.0;
      auto& succ = successors_[static_cast<std::size_t>(s) * n_actions_ + a];
      for (int s2 = 0; s2 < n_states_; ++s2) {
        double p = row[s2];
        if (p < 0.0 || !std::isfinite(p)) throw std::invalid_argument("transition tensor has bad entry");
        sum += p;
        if (p > 0.0) succ.push_back({s2, p});
      }
      if (std::abs(sum - 1.0) > kRowTol) {
        std::ostringstream ss;
        ss << "transition row (s=" << s << ", a=" << a << ") sums to " << sum;
        throw std::invalid_argument(ss.str());
      }
      if (!(succ.size() == 1 && succ[0].state == s)) absorbing_[s] = 0;
    }
  }
}

TabularMdp TabularMdp::with_initial_dist(std::vector<double> initial_dist) const {
  return TabularMdp(n_states_, n_actions_, transition_, std::move(initial_dist), discount_, horizon_);
}

TabularMdp TabularMdp::with_transition(std::vector<double> transition) const {
  return TabularMdp(n_states_, n_actions_, std::move(transition), initial_dist_, discount_, horizon_);
}

std::string Perturbation::describe() const {
  std::ostringstream ss;
  switch (kind) {
    case Kind::AddObstacles: {
      ss << "add-obstacles:";
      for (const auto& c : cells) ss << " (" << c.x << "," << c.y << ")";
      break;
    }
    case Kind::ChangeSlip:
      ss << "change-slip: " << slip_prob;
      break;
    case Kind::ShiftInitial:
      ss << "shift-initial";
      break;
  }
  return ss.str();
}

bool Gridworld::is_goal(int s) const { return contains(spec.goal_cells, spec.cell_of(s)); }

std::vector<int> Gridworld::goal_distances() const {
  const int n = spec.width * spec.height;
  std::vector<int> dist(n, n);
  std::queue<int> frontier;
  for (const auto& g : spec.goal_cells) {
    dist[spec.state_of(g)] = 0;
    frontier.push(spec.state_of(g));
  }
  const int dx[] = {0, 0, -1, 1};
  const int dy[] = {1, -1, 0, 0};
  while (!frontier.empty()) {
    int s = frontier.front();
    frontier.pop();
    GridCell c = spec.cell_of(s);
    for (int k = 0; k < 4; ++k) {
      GridCell nb{c.x + dx[k], c.y + dy[k]};
      if (nb.x < 0 || nb.x >= spec.width || nb.y < 0 || nb.y >= spec.height) continue;
      if (contains(spec.obstacles, nb)) continue;
      int t = spec.state_of(nb);
      if (dist[t] > dist[s] + 1) {
        dist[t] = dist[s] + 1;
        frontier.push(t);
      }
    }
  }
  return dist;
}

Gridworld build_gridworld(const GridworldSpec& spec, double discount, int horizon) {
  spec.validate();
  const int n = spec.width * spec.height;
  std::vector<double> transition(static_cast<std::size_t>(n) * kGridActions * n, 0.0);

  // destination of a single (possibly blocked) move
  auto resolve = [&](int s, int action) -> int {
    GridCell c = spec.cell_of(s);
    switch (action) {
      case kUp: c.y += 1; break;
      case kDown: c.y -= 1; break;
      case kLeft: c.x -= 1; break;
      case kRight: c.x += 1; break;
      case kStay: break;
    }
    if (c.x < 0 || c.x >= spec.width || c.y < 0 || c.y >= spec.height) return s;
    if (contains(spec.obstacles, c)) return s;
    return spec.state_of(c);
  };

  for (int s = 0; s < n; ++s) {
    bool goal = contains(spec.goal_cells, spec.cell_of(s));
    for (int a = 0; a < kGridActions; ++a) {
      double* row = &transition[(static_cast<std::size_t>(s) * kGridActions + a) * n];
      if (goal) {
        row[s] = 1.0;
        continue;
      }
      row[resolve(s, a)] += 1.0 - spec.slip_prob;
      for (int dir = 0; dir < 4; ++dir) row[resolve(s, dir)] += spec.slip_prob / 4.0;
    }
  }

  std::vector<double> mu0(n, 0.0);
  for (const auto& c : spec.start_cells) mu0[spec.state_of(c)] += 1.0 / static_cast<double>(spec.start_cells.size());

  std::vector<double> reward(n, spec.step_reward);
  for (const auto& c : spec.goal_cells) reward[spec.state_of(c)] = spec.goal_reward;

  return Gridworld{spec, TabularMdp(n, kGridActions, std::move(transition), std::move(mu0), discount, horizon),
                   std::move(reward)};
}

Gridworld apply_perturbation(const Gridworld& gw, const Perturbation& p) {
  const auto& mdp = gw.mdp;
  const int n = mdp.n_states();
  switch (p.kind) {
    case Perturbation::Kind::AddObstacles: {
      check_cells(gw.spec, p.cells, "obstacle");
      auto transition = mdp.transition_tensor();
      GridworldSpec spec = gw.spec;
      for (const auto& c : p.cells) {
        int blocked = gw.spec.state_of(c);
        if (mdp.is_absorbing(blocked)) throw InvalidPerturbationError("obstacle placed on absorbing goal cell");
        if (mdp.initial_dist()[blocked] > 0.0)
          throw InvalidPerturbationError("obstacle placed on initial-state support");
        for (int s = 0; s < n; ++s) {
          if (s == blocked) continue;
          for (int a = 0; a < mdp.n_actions(); ++a) {
            std::size_t base = (static_cast<std::size_t>(s) * mdp.n_actions() + a) * n;
            transition[base + s] += transition[base + blocked];
            transition[base + blocked] = 0.0;
          }
        }
        if (!contains(spec.obstacles, c)) spec.obstacles.push_back(c);
      }
      Gridworld out{std::move(spec), mdp.with_transition(std::move(transition)), gw.true_reward};
      return out;
    }
    case Perturbation::Kind::ChangeSlip: {
      if (p.slip_prob < 0.0 || p.slip_prob >= 1.0) throw InvalidPerturbationError("slip_prob must be in [0,1)");
      GridworldSpec spec = gw.spec;
      spec.slip_prob = p.slip_prob;
      return build_gridworld(spec, mdp.discount(), mdp.horizon());
    }
    case Perturbation::Kind::ShiftInitial: {
      if (p.initial_dist.size() != static_cast<std::size_t>(n))
        throw InvalidPerturbationError("initial distribution has wrong length");
      double sum = 0.0;
      for (double v : p.initial_dist) {
        if (v < 0.0 || !std::isfinite(v)) throw InvalidPerturbationError("initial distribution has bad entry");
        sum += v;
      }
      if (std::abs(sum - 1.0) > kRowTol) throw InvalidPerturbationError("initial distribution does not sum to 1");
      return Gridworld{gw.spec, mdp.with_initial_dist(p.initial_dist), gw.true_reward};
    }
  }
  throw std::logic_error("unreachable");
}

}  // namespace ciirl
