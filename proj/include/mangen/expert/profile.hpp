#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "mangen/core.hpp"
#include "mangen/flight/types.hpp"

namespace mangen::expert {

enum class Maneuver { SplitS, Chandelle };

inline std::string to_string(Maneuver m) { return m == Maneuver::SplitS ? "split-s" : "chandelle"; }

inline Maneuver parse_maneuver(const std::string& name) {
  if (name == "split-s" || name == "splits" || name == "SplitS") return Maneuver::SplitS;
  if (name == "chandelle" || name == "Chandelle") return Maneuver::Chandelle;
  fail(ErrorKind::UnknownManeuver, "unknown maneuver '" + name + "'");
}

using Rates = std::array<double, 3>;  // P, Q, R in rad/s

/// Trapezoidal pulse with raised-cosine ramps; C1-smooth.
struct Pulse {
  double start = 0.0;     // s
  double ramp = 1.0;      // s, duration of each ramp
  double plateau = 0.0;   // s
  double amplitude = 0.0; // rad/s

  /// Pulse with the plateau sized so the time integral equals `angle`.
  static Pulse with_integral(double start, double ramp, double amplitude, double angle) {
    return {start, ramp, std::max(0.0, angle / amplitude - ramp), amplitude};
  }

  double end() const { return start + 2.0 * ramp + plateau; }
  double integral() const { return amplitude * (ramp + plateau); }

  double value(double t) const {
    const double t1 = start + ramp, t2 = t1 + plateau, t3 = t2 + ramp;
    if (t <= start || t >= t3) return 0.0;
    if (t < t1) return amplitude * 0.5 * (1.0 - std::cos(kPi * (t - start) / ramp));
    if (t <= t2) return amplitude;
    return amplitude * 0.5 * (1.0 + std::cos(kPi * (t - t2) / ramp));
  }

  double derivative(double t) const {
    const double t1 = start + ramp, t2 = t1 + plateau, t3 = t2 + ramp;
    if (t <= start || t >= t3 || (t >= t1 && t <= t2)) return 0.0;
    if (t < t1) return amplitude * 0.5 * kPi / ramp * std::sin(kPi * (t - start) / ramp);
    return -amplitude * 0.5 * kPi / ramp * std::sin(kPi * (t - t2) / ramp);
  }
};

/// Free shape constants of the synthetic maneuvers.
struct ProfileShape {
  // Split-S: roll to inverted, then pull through half a loop. The roll stops
  // just short of pi so the pull-through misses the pitch singularity.
  double splits_roll_start = 1.2;
  double splits_roll_ramp = 0.8;
  double splits_roll_rate = 2.0;
  double splits_roll_angle = kPi - 0.03;
  double splits_pull_start = 3.7;
  double splits_pull_ramp = 1.0;
  double splits_pull_rate = 0.36;
  double splits_pull_angle = kPi;

  // Chandelle: roll in, climbing turn, roll out at the apex.
  double chandelle_roll_in_start = 1.5;
  double chandelle_roll_ramp = 0.6;
  double chandelle_roll_rate = 0.8;
  double chandelle_bank_angle = 1.2;
  double chandelle_turn_start = 1.2;
  double chandelle_turn_ramp = 1.0;
  double chandelle_turn_plateau = 7.5;
  double chandelle_pitch_rate = 0.28;
  double chandelle_yaw_rate = 0.06;
  double chandelle_roll_out_start = 10.5;
};

struct ReferenceProfile {
  double dt = 0.02;
  Maneuver maneuver = Maneuver::SplitS;
  std::vector<Rates> samples;
  std::vector<Rates> derivatives;  // time derivative of each sample, rad/s^2

  std::size_t size() const { return samples.size(); }
  double duration() const { return dt * static_cast<double>(samples.size() > 0 ? samples.size() - 1 : 0); }
};

namespace detail {

struct ChannelPulses {
  std::vector<Pulse> p, q, r;
};

inline ChannelPulses pulses_for(Maneuver kind, const ProfileShape& s) {
  ChannelPulses c;
  if (kind == Maneuver::SplitS) {
    c.p.push_back(Pulse::with_integral(s.splits_roll_start, s.splits_roll_ramp, s.splits_roll_rate, s.splits_roll_angle));
    c.q.push_back(Pulse::with_integral(s.splits_pull_start, s.splits_pull_ramp, s.splits_pull_rate, s.splits_pull_angle));
  } else {
    c.p.push_back(Pulse::with_integral(s.chandelle_roll_in_start, s.chandelle_roll_ramp, s.chandelle_roll_rate,
                                       s.chandelle_bank_angle));
    c.p.push_back(Pulse::with_integral(s.chandelle_roll_out_start, s.chandelle_roll_ramp, -s.chandelle_roll_rate,
                                       -s.chandelle_bank_angle));
    c.q.push_back(Pulse{s.chandelle_turn_start, s.chandelle_turn_ramp, s.chandelle_turn_plateau, s.chandelle_pitch_rate});
    c.r.push_back(Pulse{s.chandelle_turn_start, s.chandelle_turn_ramp, s.chandelle_turn_plateau, s.chandelle_yaw_rate});
  }
  return c;
}

inline double sum_value(const std::vector<Pulse>& ps, double t) {
  double v = 0.0;
  for (const auto& p : ps) v += p.value(t);
  return v;
}

inline double sum_derivative(const std::vector<Pulse>& ps, double t) {
  double v = 0.0;
  for (const auto& p : ps) v += p.derivative(t);
  return v;
}

}  // namespace detail

/// Roll-segment bounds of a Split-S profile, for inspection.
inline Pulse splits_roll_segment(const ProfileShape& shape = {}) {
  return detail::pulses_for(Maneuver::SplitS, shape).p.front();
}

inline Pulse splits_pull_segment(const ProfileShape& shape = {}) {
  return detail::pulses_for(Maneuver::SplitS, shape).q.front();
}

/// Body-rate reference for a maneuver started from `trim_state`. Shapes are
/// defined in absolute time so profiles of different lengths agree on their
/// common prefix; trailing samples are zero.
inline ReferenceProfile reference_profile(Maneuver kind, const flight::AircraftState& trim_state, std::size_t n_samples,
                                          double dt, const ProfileShape& shape = {}) {
  (void)trim_state;  // the synthetic shapes are trim-independent
  require(n_samples >= 100, ErrorKind::InvalidArgument, "profile needs at least 100 samples");
  require(dt > 0.0, ErrorKind::InvalidArgument, "dt must be positive");
  const auto pulses = detail::pulses_for(kind, shape);
  ReferenceProfile prof;
  prof.dt = dt;
  prof.maneuver = kind;
  prof.samples.resize(n_samples);
  prof.derivatives.resize(n_samples);
  for (std::size_t k = 0; k < n_samples; ++k) {
    const double t = dt * static_cast<double>(k);
    prof.samples[k] = {detail::sum_value(pulses.p, t), detail::sum_value(pulses.q, t), detail::sum_value(pulses.r, t)};
    prof.derivatives[k] = {detail::sum_derivative(pulses.p, t), detail::sum_derivative(pulses.q, t),
                           detail::sum_derivative(pulses.r, t)};
  }
  return prof;
}

}  // namespace mangen::expert
