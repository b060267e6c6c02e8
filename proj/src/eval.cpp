#include "ciirl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <mutex>
#include <sstream>

#include "ciirl/solver.hpp"
#include "ciirl/util.hpp"

namespace ciirl {

std::vector<double> standardize_reward(std::span<const double> reward) {
  std::vector<double> out(reward.begin(), reward.end());
  double m = mean(reward);
  double var = 0.0;
  for (double r : reward) var += (r - m) * (r - m);
  var /= static_cast<double>(reward.size());
  double sd = std::sqrt(var);
  for (double& r : out) r = sd > 0.0 ? (r - m) / sd : 0.0;
  return out;
}

TransferResult transfer_eval(std::span<const double> recovered, const Gridworld& base,
                             std::span<const double> truth, const Perturbation& pert, int n_rollouts,
                             std::uint64_t seed, bool standardize, double return_discount) {
  if (n_rollouts < 1) throw std::invalid_argument("transfer_eval: n_rollouts must be >= 1");
  for (double r : recovered)
    if (!std::isfinite(r)) throw std::invalid_argument("transfer_eval: non-finite recovered reward");

  Gridworld perturbed = apply_perturbation(base, pert);
  std::vector<double> reward =
      standardize ? standardize_reward(recovered) : std::vector<double>(recovered.begin(), recovered.end());
  HardPolicy policy = value_iteration(perturbed.mdp, reward, 1e-9);
  auto rolled = rollout(perturbed.mdp, policy, truth, n_rollouts, seed, return_discount);

  std::vector<double> returns;
  returns.reserve(rolled.trajectories.size());
  for (const auto& traj : rolled.trajectories) {
    double ret = 0.0, w = 1.0;
    for (int s : traj.states) {
      ret += w * truth[s];
      w *= return_discount;
    }
    returns.push_back(ret);
  }

  TransferResult out;
  out.perturbation = pert.describe();
  out.seed = seed;
  out.ground_truth_return = rolled.mean_return;
  out.return_std = sample_stddev(returns);
  out.n_rollouts = n_rollouts;
  return out;
}

namespace {

void aggregate_table(SweepTable& table, const std::vector<SweepMethod>& methods,
                     const std::vector<Perturbation>& perts, int n_rollouts) {
  for (const auto& method : methods) {
    for (const auto& pert : perts) {
      std::vector<double> returns;
      for (const auto& row : table.rows)
        if (row.ok && row.method_label == method.label && row.perturbation == pert.describe())
          returns.push_back(row.ground_truth_return);
      if (returns.empty()) continue;
      SweepAggregate agg;
      agg.method_label = method.label;
      agg.lambda_used = method.cfg.lambda_ci > 0.0 ? method.cfg.lambda_ci : method.cfg.lambda_l2;
      agg.perturbation = pert.describe();
      agg.return_mean = mean(returns);
      agg.return_std = sample_stddev(returns);
      agg.n_seeds = static_cast<int>(returns.size());
      agg.n_rollouts = n_rollouts;
      table.aggregates.push_back(std::move(agg));
    }
  }
}

}  // namespace

SweepTable sweep(const TrainerFn& trainer, const std::vector<SweepMethod>& methods, const Gridworld& base,
                 std::span<const double> truth, const std::vector<Perturbation>& perts,
                 const std::vector<std::uint64_t>& seeds, int n_rollouts, bool standardize, int jobs) {
  if (perts.empty()) throw std::invalid_argument("sweep: empty perturbation list");
  if (seeds.empty()) throw std::invalid_argument("sweep: empty seed list");

  struct Cell {
    std::size_t method;
    std::uint64_t seed;
    std::vector<TransferResult> rows;
  };
  std::vector<Cell> cells;
  for (std::size_t m = 0; m < methods.size(); ++m)
    for (std::uint64_t seed : seeds) cells.push_back(Cell{m, seed, {}});

  auto run_cell = [&](Cell& cell) {
    const auto& method = methods[cell.method];
    double lambda = method.cfg.lambda_ci > 0.0 ? method.cfg.lambda_ci : method.cfg.lambda_l2;
    std::vector<double> recovered;
    std::string train_error;
    try {
      TrainConfig cfg = method.cfg;
      cfg.seed = cell.seed;
      recovered = trainer(cfg, cell.seed);
    } catch (const std::exception& ex) {
      train_error = ex.what();
    }
    for (std::size_t p = 0; p < perts.size(); ++p) {
      TransferResult row;
      row.method_label = method.label;
      row.lambda_used = lambda;
      row.seed = cell.seed;
      row.perturbation = perts[p].describe();
      row.n_rollouts = n_rollouts;
      if (!train_error.empty()) {
        row.ok = false;
        row.error = "train: " + train_error;
      } else {
        try {
          TransferResult t = transfer_eval(recovered, base, truth, perts[p], n_rollouts,
                                           Rng::derive_seed(cell.seed, 7000 + p), standardize);
          row.ground_truth_return = t.ground_truth_return;
          row.return_std = t.return_std;
        } catch (const std::exception& ex) {
          row.ok = false;
          row.error = ex.what();
        }
      }
      cell.rows.push_back(std::move(row));
    }
  };

  if (jobs <= 1) {
    for (auto& cell : cells) run_cell(cell);
  } else {
    std::size_t next = 0;
    std::mutex mu;
    auto worker = [&]() {
      for (;;) {
        std::size_t i;
        {
          std::lock_guard<std::mutex> lock(mu);
          if (next >= cells.size()) return;
          i = next++;
        }
        run_cell(cells[i]);
      }
    };
    std::vector<std::future<void>> futs;
    for (int j = 0; j < jobs; ++j) futs.push_back(std::async(std::launch::async, worker));
    for (auto& f : futs) f.get();
  }

  SweepTable table;
  for (auto& cell : cells)
    for (auto& row : cell.rows) table.rows.push_back(std::move(row));
  aggregate_table(table, methods, perts, n_rollouts);
  return table;
}

SweepTable evaluate_rewards(const std::vector<std::pair<std::string, std::vector<double>>>& labeled_rewards,
                            const Gridworld& base, std::span<const double> truth,
                            const std::vector<Perturbation>& perts, const std::vector<std::uint64_t>& seeds,
                            int n_rollouts, bool standardize) {
  if (perts.empty()) throw std::invalid_argument("evaluate_rewards: empty perturbation list");
  SweepTable table;
  std::vector<SweepMethod> pseudo_methods;
  for (const auto& [label, reward] : labeled_rewards) {
    pseudo_methods.push_back(SweepMethod{label, TrainConfig{}});
    for (std::uint64_t seed : seeds) {
      for (std::size_t p = 0; p < perts.size(); ++p) {
        TransferResult row;
        row.method_label = label;
        row.seed = seed;
        row.perturbation = perts[p].describe();
        row.n_rollouts = n_rollouts;
        try {
          TransferResult t =
              transfer_eval(reward, base, truth, perts[p], n_rollouts, Rng::derive_seed(seed, 7000 + p), standardize);
          row.ground_truth_return = t.ground_truth_return;
          row.return_std = t.return_std;
        } catch (const std::exception& ex) {
          row.ok = false;
          row.error = ex.what();
        }
        table.rows.push_back(std::move(row));
      }
    }
  }
  aggregate_table(table, pseudo_methods, perts, n_rollouts);
  return table;
}

std::string results_csv(const SweepTable& table) {
  std::ostringstream out;
  out << "method,lambda,perturbation,seed,return_mean,return_std,n_rollouts\n";
  auto quote = [](const std::string& s) {
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += "\"\"";
      q += c;
    }
    return q + "\"";
  };
  for (const auto& r : table.rows) {
    out << r.method_label << "," << format_double(r.lambda_used) << "," << quote(r.perturbation) << "," << r.seed
        << ",";
    if (r.ok) {
      out << format_double(r.ground_truth_return) << "," << format_double(r.return_std);
    } else {
      out << "error," << quote(r.error);
    }
    out << "," << r.n_rollouts << "\n";
  }
  for (const auto& a : table.aggregates) {
    out << a.method_label << "," << format_double(a.lambda_used) << "," << quote(a.perturbation) << ",all,"
        << format_double(a.return_mean) << "," << format_double(a.return_std) << "," << a.n_rollouts << "\n";
  }
  return out.str();
}

void write_results_csv(const std::filesystem::path& path, const SweepTable& table) {
  atomic_write_file(path, results_csv(table));
}

}  // namespace ciirl
