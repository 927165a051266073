#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "mangen/expert/demonstration.hpp"
#include "mangen/nn/spec.hpp"

namespace mangen::imitation {

using nn::Matrix;
using nn::Vector;

constexpr int kFeatureCount = 18;
constexpr int kActionCount = 4;
/// Column of the first executed-command feature; the four commands follow in ControlInput order.
constexpr int kCommandFeature = 13;

inline const std::array<std::string, kFeatureCount>& feature_names() {
  static const std::array<std::string, kFeatureCount> names{
      "vt_fts", "alpha_rad", "beta_rad", "phi_rad",  "theta_rad",     "psi_rad",      "p_rads",       "q_rads",     "r_rads",
      "pn_ft",  "pe_ft",     "pd_ft",    "an_g",     "throttle_frac", "elevator_deg", "aileron_deg", "rudder_deg", "t_s"};
  return names;
}

/// Raw (unnormalized) training vector of one sample.
inline Vector feature_row(const expert::DemoSample& s, double gravity) {
  Vector f(kFeatureCount);
  const auto& x = s.state;
  f << x.vt, x.alpha, x.beta, x.phi, x.theta, x.psi, x.p, x.q, x.r, x.pn, x.pe, x.pd,
      expert::normal_acceleration(x, gravity), s.command.throttle, s.command.elevator, s.command.aileron, s.command.rudder,
      s.time;
  return f;
}

/// Per-feature min/max; features whose range collapses are flagged constant and map to 0.
struct NormStats {
  Vector min;
  Vector max;
  std::vector<bool> constant;

  static constexpr double kMinRange = 1e-12;

  static NormStats fit(const Matrix& raw) {
    NormStats s;
    s.min = raw.rowwise().minCoeff();
    s.max = raw.rowwise().maxCoeff();
    s.constant.resize(static_cast<std::size_t>(raw.rows()));
    for (Eigen::Index i = 0; i < raw.rows(); ++i) s.constant[i] = !(s.max[i] - s.min[i] > kMinRange);
    return s;
  }

  Eigen::Index size() const { return min.size(); }

  double normalize(Eigen::Index i, double v) const { return constant[i] ? 0.0 : (v - min[i]) / (max[i] - min[i]); }
  double denormalize(Eigen::Index i, double v) const { return constant[i] ? min[i] : min[i] + v * (max[i] - min[i]); }

  /// Affine map only; values outside the fitted range land outside [0, 1].
  Matrix scale(const Matrix& raw) const {
    Matrix out(raw.rows(), raw.cols());
    for (Eigen::Index c = 0; c < raw.cols(); ++c)
      for (Eigen::Index i = 0; i < raw.rows(); ++i) out(i, c) = normalize(i, raw(i, c));
    return out;
  }

  /// Network input: the affine map clipped to [0, 1]. Off-distribution states
  /// (learner rollouts, other airframes) would otherwise reach the encoder as
  /// large values on features the expert barely excites (r, pe).
  Matrix normalize(const Matrix& raw) const { return scale(raw).cwiseMax(0.0).cwiseMin(1.0); }

  /// Normalized action target from a control input, via the command-feature stats.
  Vector normalize_action(const flight::ControlInput& u) const {
    const auto a = u.to_array();
    Vector v(kActionCount);
    for (int k = 0; k < kActionCount; ++k) v[k] = std::clamp(normalize(kCommandFeature + k, a[k]), 0.0, 1.0);
    return v;
  }

  flight::ControlInput denormalize_action(const Vector& v) const {
    std::array<double, 4> a{};
    for (int k = 0; k < kActionCount; ++k) a[k] = denormalize(kCommandFeature + k, v[k]);
    return flight::ControlLimits::clamp(flight::ControlInput::from_array(a));
  }

  bool operator==(const NormStats&) const = default;
};

/// One contiguous demonstration inside the dataset columns.
struct Segment {
  Eigen::Index start = 0;
  Eigen::Index length = 0;
  std::string id;
};

/// Normalized samples, one column per sample (F x N), with per-sample action
/// targets (4 x N). Windows never cross segment boundaries.
struct Dataset {
  Matrix features;
  Matrix targets;
  NormStats stats;
  std::vector<Segment> segments;
  double dt = 0.0;

  Eigen::Index rows() const { return features.cols(); }
};

inline std::string demo_id(const expert::Demonstration& d) {
  return expert::to_string(d.maneuver) + "@" + std::to_string(static_cast<long long>(std::lround(d.trim_vt))) + "fts/" +
         std::to_string(static_cast<long long>(std::lround(d.trim_alt))) + "ft/" + d.params_id;
}

namespace detail {

inline void check_dt(const std::vector<expert::Demonstration>& demos, double dt) {
  for (const auto& d : demos)
    require(std::abs(d.dt - dt) <= 1e-12 * std::max(1.0, dt), ErrorKind::InconsistentDt,
            "demonstration dt " + std::to_string(d.dt) + " differs from " + std::to_string(dt));
}

inline Matrix raw_features(const expert::Demonstration& d, double gravity) {
  Matrix raw(kFeatureCount, static_cast<Eigen::Index>(d.size()));
  for (std::size_t k = 0; k < d.size(); ++k) raw.col(static_cast<Eigen::Index>(k)) = feature_row(d.samples[k], gravity);
  return raw;
}

}  // namespace detail

/// Appends demonstrations normalized with the dataset's existing stats.
/// Targets are the expert label of each sample.
inline void append(Dataset& ds, const std::vector<expert::Demonstration>& demos, double gravity = 32.17) {
  detail::check_dt(demos, ds.dt);
  Eigen::Index total = ds.rows();
  for (const auto& d : demos) total += static_cast<Eigen::Index>(d.size());
  ds.features.conservativeResize(kFeatureCount, total);
  ds.targets.conservativeResize(kActionCount, total);
  for (const auto& d : demos) {
    const Eigen::Index start = ds.segments.empty() ? 0 : ds.segments.back().start + ds.segments.back().length;
    const Eigen::Index n = static_cast<Eigen::Index>(d.size());
    ds.features.middleCols(start, n) = ds.stats.normalize(detail::raw_features(d, gravity));
    for (Eigen::Index k = 0; k < n; ++k) ds.targets.col(start + k) = ds.stats.normalize_action(d.samples[k].label);
    ds.segments.push_back({start, n, demo_id(d)});
  }
}

/// Concatenates demonstrations, fits [0,1] min/max stats and applies them.
inline Dataset build_dataset(const std::vector<expert::Demonstration>& demos, double gravity = 32.17) {
  require(!demos.empty(), ErrorKind::EmptyDemos, "no demonstrations");
  Dataset ds;
  ds.dt = demos.front().dt;
  detail::check_dt(demos, ds.dt);
  std::vector<Matrix> raws;
  Eigen::Index total = 0;
  for (const auto& d : demos) {
    raws.push_back(detail::raw_features(d, gravity));
    total += raws.back().cols();
  }
  require(total > 0, ErrorKind::EmptyDemos, "demonstrations hold no samples");
  Matrix all(kFeatureCount, total);
  for (Eigen::Index c = 0; const auto& r : raws) {
    all.middleCols(c, r.cols()) = r;
    c += r.cols();
  }
  ds.stats = NormStats::fit(all);
  append(ds, demos, gravity);
  return ds;
}

/// Window start columns (global) grouped by split.
struct WindowedDataset {
  int window = 50;
  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> validation;
  std::vector<Eigen::Index> test;

  std::size_t size() const { return train.size() + validation.size() + test.size(); }
};

struct SplitFractions {
  double train = 0.70;
  double validation = 0.25;
};

/// All windows of `window` samples inside each segment with a following
/// target sample, every `stride` samples.
inline std::vector<Eigen::Index> window_starts(const Dataset& ds, int window, int stride = 1) {
  require(window >= 1 && stride >= 1, ErrorKind::InvalidArgument, "window and stride must be >= 1");
  std::vector<Eigen::Index> starts;
  for (const auto& seg : ds.segments) {
    require(seg.length >= window + 1, ErrorKind::DemoTooShort,
            "demonstration " + seg.id + " has " + std::to_string(seg.length) + " samples, needs " + std::to_string(window + 1));
    for (Eigen::Index k = 0; k + window < seg.length; k += stride) starts.push_back(seg.start + k);
  }
  return starts;
}

/// Seeded shuffle, then 70/25/5 (rounded) split.
inline WindowedDataset make_windows(const Dataset& ds, int window = 50, int stride = 1, std::uint64_t seed = 0,
                                    SplitFractions split = {}) {
  std::vector<Eigen::Index> all = window_starts(ds, window, stride);
  std::mt19937_64 rng(seed);
  for (std::size_t i = all.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(nn::uniform01(rng) * static_cast<double>(i));
    std::swap(all[i - 1], all[std::min(j, i - 1)]);
  }
  const auto n = static_cast<double>(all.size());
  const std::size_t n_train = static_cast<std::size_t>(std::llround(split.train * n));
  const std::size_t n_val = std::min(all.size() - n_train, static_cast<std::size_t>(std::llround(split.validation * n)));
  WindowedDataset w;
  w.window = window;
  w.train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_train));
  w.validation.assign(all.begin() + static_cast<std::ptrdiff_t>(n_train),
                      all.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  w.test.assign(all.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), all.end());
  return w;
}

/// Targets for windows starting at `starts`: the action at the sample after each window.
inline Matrix window_targets(const Dataset& ds, const std::vector<Eigen::Index>& starts, int window) {
  Matrix t(kActionCount, static_cast<Eigen::Index>(starts.size()));
  for (std::size_t j = 0; j < starts.size(); ++j) t.col(static_cast<Eigen::Index>(j)) = ds.targets.col(starts[j] + window);
  return t;
}

}  // namespace mangen::imitation
