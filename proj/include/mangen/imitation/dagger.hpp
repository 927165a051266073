#pragma once

#include <functional>

#include "mangen/harness/metrics.hpp"
#include "mangen/imitation/rollout.hpp"
#include "mangen/imitation/train.hpp"

namespace mangen::imitation {

struct TrimPoint {
  double vt = 750.0;       // ft/s
  double altitude = 15000.0;  // ft

  bool operator==(const TrimPoint&) const = default;
};

/// Regular grid over [vt_lo, vt_hi] x [alt_lo, alt_hi], velocity-major.
inline std::vector<TrimPoint> trim_grid(double vt_lo, double vt_hi, double vt_step, double alt_lo, double alt_hi,
                                        double alt_step) {
  require(vt_step > 0.0 && alt_step > 0.0 && vt_hi >= vt_lo && alt_hi >= alt_lo, ErrorKind::InvalidArgument,
          "bad trim grid bounds");
  std::vector<TrimPoint> g;
  for (double v = vt_lo; v <= vt_hi + 1e-9; v += vt_step)
    for (double h = alt_lo; h <= alt_hi + 1e-9; h += alt_step) g.push_back({v, h});
  return g;
}

/// 8 velocities (600-950) x 7 altitudes (10,000-13,000) = 56 points.
inline std::vector<TrimPoint> default_trim_grid() { return trim_grid(600, 950, 50, 10000, 13000, 500); }

/// Everything a rollout needs besides the policy.
struct Scenario {
  flight::AircraftParams params;
  expert::Maneuver maneuver = expert::Maneuver::SplitS;
  std::size_t samples = 705;
  double dt = 0.02;
  expert::ProfileShape shape;
  RolloutOptions rollout;

  expert::ReferenceProfile profile(const flight::AircraftState& trim_state = {}) const {
    return expert::reference_profile(maneuver, trim_state, samples, dt, shape);
  }
};

inline Rollout learner_rollout(const nn::NetworkWeights& w, const NormStats& stats, const Scenario& sc, TrimPoint tp,
                               std::optional<double> c_g = std::nullopt, bool stop_outside_stable = false) {
  RolloutOptions o = sc.rollout;
  o.bootstrap = static_cast<std::size_t>(w.spec.window);
  o.confidence_gain = c_g;
  o.stop_outside_stable = stop_outside_stable;
  return rollout_policy(NetworkPolicy{w, stats}, tp.vt, tp.altitude, sc.profile(), sc.params, stats, o);
}

struct GainSearchResult {
  double c_g = 0.0;
  std::vector<double> lambda_sums;  // aligned with the grid
};

/// Picks the grid value maximizing the total lambda over mixed rollouts at
/// every trim point; rollouts stop when they leave the stable set. Ties go
/// to the smallest gain.
template <typename Policy>
GainSearchResult confidence_gain_search(const Policy& policy, const NormStats& stats, const Scenario& sc,
                                        const std::vector<TrimPoint>& trims, const std::vector<double>& grid,
                                        std::size_t bootstrap) {
  require(!grid.empty(), ErrorKind::InvalidArgument, "confidence-gain grid is empty");
  require(!trims.empty(), ErrorKind::InvalidArgument, "no trim points");
  GainSearchResult res;
  res.lambda_sums.assign(grid.size(), 0.0);
  bool any_stable = false;
  double best = -1.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    RolloutOptions o = sc.rollout;
    o.bootstrap = bootstrap;
    o.confidence_gain = grid[i];
    o.stop_outside_stable = true;
    for (const auto& tp : trims) {
      const Rollout r = rollout_policy(policy, tp.vt, tp.altitude, sc.profile(), sc.params, stats, o);
      res.lambda_sums[i] += r.lambda_sum();
      any_stable = any_stable || (!r.left_stable && !r.demo.diverged);
    }
    const bool better = res.lambda_sums[i] > best || (res.lambda_sums[i] == best && grid[i] < res.c_g);
    if (better) {
      best = res.lambda_sums[i];
      res.c_g = grid[i];
    }
  }
  require(any_stable, ErrorKind::AllCandidatesUnstable, "every confidence gain left the stable set everywhere");
  return res;
}

inline GainSearchResult confidence_gain_search(const nn::NetworkWeights& w, const NormStats& stats, const Scenario& sc,
                                               const std::vector<TrimPoint>& trims, const std::vector<double>& grid) {
  return confidence_gain_search(NetworkPolicy{w, stats}, stats, sc, trims, grid, static_cast<std::size_t>(w.spec.window));
}

struct DaggerConfig {
  double eps_pqr = 0.05;  // rad/s
  std::vector<double> grid{0.05, 0.1, 0.2, 0.3, 0.5, 0.8};
  int max_iterations = 5;
  std::vector<TrimPoint> trims = default_trim_grid();
  TrainConfig retrain;
  int stride = 1;
  std::uint64_t split_seed = 0;
  /// Retrain from fresh weights each iteration instead of continuing.
  bool reset_weights = false;
  /// Where the pure learner is scored each iteration.
  TrimPoint eval_trim{750.0, 15000.0};

  void validate() const {
    require(eps_pqr > 0.0, ErrorKind::InvalidArgument, "eps_pqr must be positive");
    require(!grid.empty(), ErrorKind::InvalidArgument, "confidence-gain grid is empty");
    for (double g : grid) require(g > 0.0 && g <= 1.0, ErrorKind::InvalidArgument, "confidence gains must lie in (0, 1]");
    require(max_iterations >= 1 && stride >= 1, ErrorKind::InvalidArgument, "iterations and stride must be >= 1");
    require(!trims.empty(), ErrorKind::InvalidArgument, "no rollout trim points");
    retrain.validate();
  }
};

struct DaggerIteration {
  int iteration = 0;
  double c_g = 0.0;
  double e_pqr = 0.0;          // mixed rollouts
  double lambda_sum = 0.0;     // over the mixed rollouts
  std::size_t dataset_rows = 0;  // before aggregation of this iteration
  harness::PqrMse learner;     // pure learner at eval_trim, before retraining
  bool learner_diverged = false;
};

struct DaggerResult {
  nn::NetworkWeights weights;
  Dataset dataset;
  std::vector<DaggerIteration> log;
  bool converged = false;
  bool budget_exhausted = false;
};

/// Receives each record with the weights it scores.
using IterationCallback = std::function<void(const DaggerIteration&, const nn::NetworkWeights&)>;

/// Confidence-DAgger. Each iteration scores the current learner, picks c_g,
/// runs mixed rollouts over every trim point, stops when their e_pqr drops
/// below eps_pqr, and otherwise aggregates the rollouts (expert labels
/// everywhere) and retrains.
inline DaggerResult c_dagger(const nn::NetworkWeights& init, Dataset dataset, const Scenario& sc, const DaggerConfig& cfg,
                             const IterationCallback& on_iteration = {}) {
  cfg.validate();
  DaggerResult res;
  res.weights = init;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    DaggerIteration rec;
    rec.iteration = it;
    rec.dataset_rows = static_cast<std::size_t>(dataset.rows());
    const Rollout eval = learner_rollout(res.weights, dataset.stats, sc, cfg.eval_trim);
    rec.learner = harness::pqr_mse(eval.demo);
    rec.learner_diverged = eval.demo.diverged;

    rec.c_g = confidence_gain_search(res.weights, dataset.stats, sc, cfg.trims, cfg.grid).c_g;
    std::vector<expert::Demonstration> rollouts;
    for (const auto& tp : cfg.trims) {
      Rollout r = learner_rollout(res.weights, dataset.stats, sc, tp, rec.c_g);
      rec.lambda_sum += r.lambda_sum();
      rollouts.push_back(std::move(r.demo));
    }
    rec.e_pqr = e_pqr(rollouts);
    res.log.push_back(rec);
    if (on_iteration) on_iteration(rec, res.weights);
    if (rec.e_pqr < cfg.eps_pqr) {
      res.converged = true;
      break;
    }
    std::vector<expert::Demonstration> usable;
    for (auto& d : rollouts)
      if (static_cast<int>(d.size()) > init.spec.window) usable.push_back(std::move(d));
    append(dataset, usable, sc.rollout.gravity);
    const WindowedDataset windows = make_windows(dataset, init.spec.window, cfg.stride, cfg.split_seed);
    TrainConfig tc = cfg.retrain;
    tc.seed = cfg.retrain.seed + static_cast<std::uint64_t>(it) + 1;
    const nn::NetworkWeights start = cfg.reset_weights ? nn::NetworkWeights::initialize(init.spec, tc.seed) : res.weights;
    res.weights = train(start, dataset, windows, tc).weights;
  }
  if (!res.converged) {
    // Score the last retrained learner so the log covers every trained policy.
    DaggerIteration rec;
    rec.iteration = cfg.max_iterations;
    rec.dataset_rows = static_cast<std::size_t>(dataset.rows());
    const Rollout eval = learner_rollout(res.weights, dataset.stats, sc, cfg.eval_trim);
    rec.learner = harness::pqr_mse(eval.demo);
    rec.learner_diverged = eval.demo.diverged;
    rec.e_pqr = std::numeric_limits<double>::quiet_NaN();
    rec.c_g = std::numeric_limits<double>::quiet_NaN();
    res.log.push_back(rec);
    if (on_iteration) on_iteration(rec, res.weights);
    res.budget_exhausted = true;
  }
  res.dataset = std::move(dataset);
  return res;
}

}  // namespace mangen::imitation
