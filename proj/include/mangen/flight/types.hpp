#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "mangen/core.hpp"

namespace mangen::flight {

/// Rigid-body state in wind-angle form plus engine power lag.
/// Angles in rad, rates in rad/s, distances in ft (pd positive down).
struct AircraftState {
  double vt = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double phi = 0.0;
  double theta = 0.0;
  double psi = 0.0;
  double p = 0.0;
  double q = 0.0;
  double r = 0.0;
  double pn = 0.0;
  double pe = 0.0;
  double pd = 0.0;
  double pow = 0.0;

  static constexpr std::size_t kSize = 13;
  using Vector = std::array<double, kSize>;

  Vector to_array() const { return {vt, alpha, beta, phi, theta, psi, p, q, r, pn, pe, pd, pow}; }

  static AircraftState from_array(const Vector& v) {
    return {v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9], v[10], v[11], v[12]};
  }

  double altitude() const { return -pd; }

  bool finite() const {
    for (double x : to_array())
      if (!std::isfinite(x)) return false;
    return true;
  }

  bool operator==(const AircraftState&) const = default;
};

/// Four control channels. Throttle as a fraction, surfaces in degrees.
struct ControlInput {
  double throttle = 0.0;
  double elevator = 0.0;
  double aileron = 0.0;
  double rudder = 0.0;

  static constexpr std::size_t kSize = 4;

  std::array<double, kSize> to_array() const { return {throttle, elevator, aileron, rudder}; }
  static ControlInput from_array(const std::array<double, kSize>& a) { return {a[0], a[1], a[2], a[3]}; }

  bool operator==(const ControlInput&) const = default;
};

/// Actual actuator positions after lag and rate limiting; same channels as ControlInput.
using SurfaceState = ControlInput;

/// Magnitude limits of each control channel.
struct ControlLimits {
  static constexpr std::array<double, 4> kMin = {0.0, -25.0, -21.5, -30.0};
  static constexpr std::array<double, 4> kMax = {1.0, 25.0, 21.5, 30.0};

  static double span(std::size_t channel) { return kMax[channel] - kMin[channel]; }

  static ControlInput clamp(const ControlInput& u) {
    auto a = u.to_array();
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::clamp(a[i], kMin[i], kMax[i]);
    return ControlInput::from_array(a);
  }

  static bool within(const ControlInput& u) {
    auto a = u.to_array();
    for (std::size_t i = 0; i < a.size(); ++i)
      if (!(a[i] >= kMin[i] && a[i] <= kMax[i])) return false;
    return true;
  }
};

/// Physical constants of the airframe, engine and actuators.
/// Defaults describe an F-16-class fighter.
struct AircraftParams {
  std::string name = "f16-baseline";

  double mass = 636.94;  // slug
  double ixx = 9496.0;   // slug ft^2
  double iyy = 55814.0;
  double izz = 63100.0;
  double ixz = 982.0;

  double wing_area = 300.0;  // ft^2
  double span = 30.0;        // ft
  double chord = 11.32;      // ft
  double xcg = 0.30;         // fraction of mean chord
  double xcg_ref = 0.35;

  double aero_scale = 1.0;
  bool aerodynamics_enabled = true;

  double thrust_max_sl = 25000.0;  // lbf, full throttle at sea level, Mach 0
  double thrust_density_exponent = 0.8;
  double thrust_mach_gain = 0.3;
  double engine_tau = 0.5;  // s

  double tau_surface = 0.0495;  // s
  double tau_throttle = 1.0;    // s
  double rate_elevator = 60.0;  // deg/s
  double rate_aileron = 60.0;
  double rate_rudder = 60.0;
  double rate_throttle = 1.0;  // 1/s

  double gravity = 32.17;  // ft/s^2

  std::array<double, 4> rate_limits() const { return {rate_throttle, rate_elevator, rate_aileron, rate_rudder}; }
  std::array<double, 4> time_constants() const { return {tau_throttle, tau_surface, tau_surface, tau_surface}; }

  void validate() const {
    require(mass > 0.0, ErrorKind::InvalidArgument, "mass must be positive");
    // Positive definiteness of the symmetric inertia tensor with Ixy = Iyz = 0.
    require(ixx > 0.0 && iyy > 0.0 && izz > 0.0 && ixx * izz - ixz * ixz > 0.0, ErrorKind::InvalidArgument,
            "inertia matrix must be positive definite");
    require(wing_area > 0.0 && span > 0.0 && chord > 0.0, ErrorKind::InvalidArgument, "geometry must be positive");
    require(gravity > 0.0, ErrorKind::InvalidArgument, "gravity must be positive");
    require(tau_surface >= 0.0 && tau_throttle >= 0.0 && engine_tau > 0.0, ErrorKind::InvalidArgument,
            "time constants must be non-negative");
    for (double r : rate_limits()) require(r > 0.0, ErrorKind::InvalidArgument, "rate limits must be positive");
  }

  bool operator==(const AircraftParams&) const = default;
};

/// Multiplicative factors turning a source airframe into a target variant.
struct PerturbationSpec {
  double mass = 1.0;
  double inertia = 1.0;
  double aero = 1.0;
  double actuator = 1.0;  // scales actuator rate limits

  void validate() const {
    require(mass > 0.0 && inertia > 0.0 && aero > 0.0 && actuator > 0.0, ErrorKind::InvalidArgument,
            "perturbation factors must be positive");
  }
};

inline AircraftParams perturb(const AircraftParams& params, const PerturbationSpec& spec) {
  spec.validate();
  AircraftParams out = params;
  out.mass *= spec.mass;
  out.ixx *= spec.inertia;
  out.iyy *= spec.inertia;
  out.izz *= spec.inertia;
  out.ixz *= spec.inertia;
  out.aero_scale *= spec.aero;
  out.rate_elevator *= spec.actuator;
  out.rate_aileron *= spec.actuator;
  out.rate_rudder *= spec.actuator;
  out.rate_throttle *= spec.actuator;
  return out;
}

}  // namespace mangen::flight
