#pragma once

#include <algorithm>
#include <optional>

#include "mangen/expert/run.hpp"
#include "mangen/imitation/dataset.hpp"
#include "mangen/nn/composite.hpp"

namespace mangen::imitation {

using expert::Rates;

/// (|P_d - P|, |Q_d - Q|, |R_d - R|) in rad/s.
inline Rates deltas(const flight::AircraftState& x, const Rates& ref) {
  return {std::abs(ref[0] - x.p), std::abs(ref[1] - x.q), std::abs(ref[2] - x.r)};
}

constexpr double kThresholdFloor = 0.05;  // rad/s

/// 1 when every delta is strictly below c_g * max(|X_d|, floor), else 0.
inline int switching_lambda(const Rates& d, const Rates& ref, double c_g, double floor = kThresholdFloor) {
  for (int k = 0; k < 3; ++k)
    if (!(d[k] < c_g * std::max(std::abs(ref[k]), floor))) return 0;
  return 1;
}

/// Physical-validity set that confidence-gain rollouts must stay inside.
struct StableSet {
  double alpha_min = -10.0 * kDegToRad;
  double alpha_max = 45.0 * kDegToRad;
  double beta_max = 30.0 * kDegToRad;
  double vt_min = 200.0;
  double vt_max = 1500.0;
  double altitude_min = 500.0;
  double rate_max = 10.0;

  bool contains(const flight::AircraftState& x) const {
    return x.finite() && x.alpha >= alpha_min && x.alpha <= alpha_max && std::abs(x.beta) <= beta_max &&
           x.vt >= vt_min && x.vt <= vt_max && x.altitude() > altitude_min && std::abs(x.p) <= rate_max &&
           std::abs(x.q) <= rate_max && std::abs(x.r) <= rate_max;
  }
};

/// What a policy sees at step `step`: the live state and reference, plus the
/// normalized feature history of samples [0, step).
struct RolloutContext {
  std::size_t step = 0;
  const flight::AircraftState& state;
  const Rates& reference;
  const Rates& reference_dot;
  Eigen::Ref<const Matrix> history;  // F x step
};

/// The composite network acting on the last W normalized samples.
struct NetworkPolicy {
  const nn::NetworkWeights& weights;
  const NormStats& stats;

  int window() const { return weights.spec.window; }

  flight::ControlInput act(const RolloutContext& ctx) const {
    const int w = window();
    require(ctx.history.cols() >= w, ErrorKind::ShapeMismatch, "history shorter than the policy window");
    nn::SequenceBatch x;
    x.steps.reserve(static_cast<std::size_t>(w));
    for (Eigen::Index t = ctx.history.cols() - w; t < ctx.history.cols(); ++t) x.steps.emplace_back(ctx.history.col(t));
    return stats.denormalize_action(nn::predict(weights, x).col(0));
  }
};

/// The expert itself behind the policy interface.
struct ExpertAsPolicy {
  expert::ExpertPolicy expert;

  flight::ControlInput act(const RolloutContext& ctx) const {
    return expert.act(ctx.state, ctx.reference, ctx.reference_dot);
  }
};

struct RolloutOptions {
  /// Expert-executed steps that fill the history before the policy acts.
  std::size_t bootstrap = 50;
  /// When set, each policy step executes the lambda-mixture of policy and expert.
  std::optional<double> confidence_gain;
  double threshold_floor = kThresholdFloor;
  /// Stop at the first sample outside `stable` (confidence-gain evaluation).
  bool stop_outside_stable = false;
  StableSet stable;
  expert::NdiGains gains;
  double gravity = 32.17;
};

struct Rollout {
  expert::Demonstration demo;  // command = executed action, label = expert action
  std::vector<int> lambda;     // one entry per policy step (steps >= bootstrap)
  bool left_stable = false;

  double lambda_sum() const {
    double s = 0.0;
    for (int l : lambda) s += l;
    return s;
  }
};

/// Closed-loop rollout of `policy` from trim. The expert is always queried
/// (bootstrap, mixing and labels). Divergence truncates the rollout and sets
/// `demo.diverged` instead of throwing.
template <typename Policy>
Rollout rollout_policy(const Policy& policy, double vt, double altitude, const expert::ReferenceProfile& profile,
                       const flight::AircraftParams& params, const NormStats& stats, const RolloutOptions& opts = {}) {
  const flight::TrimResult tr = flight::trim(vt, altitude, params);
  const expert::ExpertPolicy exp = expert::ExpertPolicy::at_trim(tr, params, opts.gains);

  Rollout out;
  auto& demo = out.demo;
  demo.dt = profile.dt;
  demo.trim_vt = vt;
  demo.trim_alt = altitude;
  demo.params_id = params.name;
  demo.maneuver = profile.maneuver;
  demo.planned_length = profile.size();
  demo.samples.reserve(profile.size());

  Matrix history(kFeatureCount, static_cast<Eigen::Index>(profile.size()));
  flight::AircraftState x = tr.state;
  flight::SurfaceState s = tr.control;
  try {
    for (std::size_t k = 0; k < profile.size(); ++k) {
      if (opts.stop_outside_stable && !opts.stable.contains(x)) {
        out.left_stable = true;
        break;
      }
      const Rates& ref = profile.samples[k];
      const Rates& ref_dot = profile.derivatives[k];
      const flight::ControlInput label = exp.act(x, ref, ref_dot);
      flight::ControlInput u = label;
      double lambda = 0.0;
      if (k >= opts.bootstrap) {
        const RolloutContext ctx{k, x, ref, ref_dot, history.leftCols(static_cast<Eigen::Index>(k))};
        const flight::ControlInput learner = policy.act(ctx);
        int l = 1;
        if (opts.confidence_gain) l = switching_lambda(deltas(x, ref), ref, *opts.confidence_gain, opts.threshold_floor);
        if (l == 1) u = learner;
        lambda = l;
        out.lambda.push_back(l);
      }
      u = flight::ControlLimits::clamp(u);
      demo.samples.push_back({profile.dt * static_cast<double>(k), x, s, u, label, ref, lambda});
      history.col(static_cast<Eigen::Index>(k)) = stats.normalize(feature_row(demo.samples.back(), opts.gravity));
      if (k + 1 < profile.size()) std::tie(x, s) = flight::step(x, u, s, params, profile.dt);
    }
  } catch (const Error&) {
    demo.diverged = true;
  }
  return out;
}

/// Per-step tracking error (dP + dQ + dR) / 3 of a rollout.
inline std::vector<double> step_errors(const expert::Demonstration& d) {
  std::vector<double> e;
  e.reserve(d.size());
  for (const auto& s : d.samples) {
    const Rates dl = deltas(s.state, s.reference);
    e.push_back((dl[0] + dl[1] + dl[2]) / 3.0);
  }
  return e;
}

/// Mean per-step tracking error over rollouts. Truncated rollouts are padded
/// to their planned length with their largest observed step error.
inline double e_pqr(const std::vector<expert::Demonstration>& rollouts) {
  require(!rollouts.empty(), ErrorKind::InvalidArgument, "e_pqr needs at least one rollout");
  double total = 0.0;
  for (const auto& d : rollouts) {
    const std::vector<double> e = step_errors(d);
    const std::size_t planned = std::max(d.planned_length, e.size());
    require(planned > 0, ErrorKind::LengthMismatch, "empty rollout");
    const double worst = e.empty() ? 0.0 : *std::max_element(e.begin(), e.end());
    double sum = 0.0;
    for (double v : e) sum += v;
    sum += worst * static_cast<double>(planned - e.size());
    total += sum / static_cast<double>(planned);
  }
  return total / static_cast<double>(rollouts.size());
}

}  // namespace mangen::imitation
