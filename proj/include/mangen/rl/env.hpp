#pragma once

#include <algorithm>
#include <array>

#include "mangen/expert/profile.hpp"
#include "mangen/flight/types.hpp"
#include "mangen/nn/spec.hpp"

namespace mangen::rl {

constexpr int kObsSize = 15;
constexpr int kActionSize = 4;

/// Observation order: vt, alpha, beta, phi, theta, psi, p, q, r, pn, pe, pd, dP, dQ, dR.
/// With `signed_deltas` the last three entries are X_d - X instead of |X_d - X|.
struct ObsBounds {
  std::array<double, kObsSize> min;
  std::array<double, kObsSize> max;
  bool signed_deltas = false;

  static ObsBounds defaults(bool signed_deltas = false) {
    constexpr double d = kDegToRad;
    const double lo = signed_deltas ? -0.5 : 0.0;
    return {{200.0, -10 * d, -30 * d, -kPi, -kPi / 2, -2 * kPi, -3.0, -2.0, -1.0, -20000.0, -20000.0, -25000.0, lo, lo, lo},
            {1500.0, 45 * d, 30 * d, kPi, kPi / 2, 2 * kPi, 3.0, 2.0, 1.0, 20000.0, 20000.0, -1000.0, 0.5, 0.5, 0.5},
            signed_deltas};
  }

  void validate() const {
    for (int i = 0; i < kObsSize; ++i)
      require(max[i] > min[i], ErrorKind::InvalidArgument, "observation bound max must exceed min");
  }
};

/// Affine map of (state, current deltas) onto [-1, 1], clipped.
inline nn::Vector observe(const flight::AircraftState& x, const expert::Rates& ref, const ObsBounds& b) {
  auto delta = [&](double e) { return b.signed_deltas ? e : std::abs(e); };
  const std::array<double, kObsSize> raw{x.vt, x.alpha, x.beta, x.phi, x.theta, x.psi, x.p, x.q, x.r, x.pn, x.pe, x.pd,
                                         delta(ref[0] - x.p), delta(ref[1] - x.q), delta(ref[2] - x.r)};
  nn::Vector o(kObsSize);
  for (int i = 0; i < kObsSize; ++i) o[i] = std::clamp(2.0 * (raw[i] - b.min[i]) / (b.max[i] - b.min[i]) - 1.0, -1.0, 1.0);
  return o;
}

/// a_tl + c_rl * a_rl, with a_rl in [-1, 1] scaled to half the actuator span, then clipped.
inline flight::ControlInput compose(const flight::ControlInput& a_tl, const nn::Vector& a_rl, double c_rl) {
  require(c_rl > 0.0 && c_rl <= 1.0, ErrorKind::InvalidArgument, "C_RL must lie in (0, 1]");
  require(a_rl.size() == kActionSize, ErrorKind::ShapeMismatch, "RL action must have 4 channels");
  auto a = a_tl.to_array();
  for (int k = 0; k < kActionSize; ++k) a[k] += c_rl * a_rl[k] * 0.5 * flight::ControlLimits::span(k);
  return flight::ControlLimits::clamp(flight::ControlInput::from_array(a));
}

/// dt * (1 - (dP + dQ + dR)).
inline double reward(double dt, const expert::Rates& d) {
  require(dt > 0.0, ErrorKind::InvalidArgument, "dt must be positive");
  return dt * (1.0 - (d[0] + d[1] + d[2]));
}

inline bool should_terminate(const expert::Rates& d, double delta_term) {
  return std::max({d[0], d[1], d[2]}) > delta_term;
}

}  // namespace mangen::rl
