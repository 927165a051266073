#pragma once

#include <algorithm>
#include <cmath>
#include <utility>

#include "mangen/flight/aero.hpp"
#include "mangen/flight/types.hpp"

namespace mangen::flight {

struct Atmosphere {
  double density = 0.0;  // slug/ft^3
  double mach = 0.0;
  double qbar = 0.0;  // lbf/ft^2
};

/// Standard troposphere, valid below 35,000 ft.
inline Atmosphere atmosphere(double vt, double altitude) {
  constexpr double rho0 = 2.377e-3;
  const double h = std::clamp(altitude, 0.0, 35000.0);
  const double tfac = 1.0 - 0.703e-5 * h;
  const double temperature = 519.0 * tfac;  // deg R
  Atmosphere atm;
  atm.density = rho0 * std::pow(tfac, 4.14);
  atm.mach = vt / std::sqrt(1.4 * 1716.3 * temperature);
  atm.qbar = 0.5 * atm.density * vt * vt;
  return atm;
}

/// Thrust (lbf) from engine power (percent) with density and Mach scaling.
inline double thrust(double power, const Atmosphere& atm, const AircraftParams& params) {
  constexpr double rho0 = 2.377e-3;
  const double sigma = atm.density / rho0;
  const double available =
      params.thrust_max_sl * std::pow(sigma, params.thrust_density_exponent) * (1.0 + params.thrust_mach_gain * atm.mach);
  return available * std::clamp(power, 0.0, 100.0) / 100.0;
}

inline double commanded_power(double throttle) { return 100.0 * std::clamp(throttle, 0.0, 1.0); }

/// Body angular accelerations from total moments, rigid body with Ixz coupling.
struct InertiaTerms {
  double c1, c2, c3, c4, c5, c6, c7, c8, c9;

  explicit InertiaTerms(const AircraftParams& p) {
    const double xi = p.ixx * p.izz - p.ixz * p.ixz;
    c1 = ((p.iyy - p.izz) * p.izz - p.ixz * p.ixz) / xi;
    c2 = (p.ixx - p.iyy + p.izz) * p.ixz / xi;
    c3 = p.izz / xi;
    c4 = p.ixz / xi;
    c5 = (p.izz - p.ixx) / p.iyy;
    c6 = p.ixz / p.iyy;
    c7 = 1.0 / p.iyy;
    c8 = (p.ixx * (p.ixx - p.iyy) + p.ixz * p.ixz) / xi;
    c9 = p.ixx / xi;
  }

  std::array<double, 3> accelerations(double p, double q, double r, double l, double m, double n) const {
    return {(c1 * r + c2 * p) * q + c3 * l + c4 * n,  //
            c5 * p * r - c6 * (p * p - r * r) + c7 * m,
            (c8 * p - c2 * r) * q + c4 * l + c9 * n};
  }
};

/// Aerodynamic moments (lbf ft) about the body axes.
inline std::array<double, 3> aero_moments(const AircraftState& x, const SurfaceState& s, const AircraftParams& params) {
  const Atmosphere atm = atmosphere(x.vt, x.altitude());
  const AeroCoefficients c = aero_coefficients(x, s, params);
  const double qs = atm.qbar * params.wing_area;
  return {qs * params.span * c.cl, qs * params.chord * c.cm, qs * params.span * c.cn};
}

/// Flat-earth 6-DOF equations of motion.
inline AircraftState state_derivative(const AircraftState& x, const SurfaceState& s, const AircraftParams& params) {
  require(x.vt > 0.0, ErrorKind::EnvelopeViolation, "airspeed must be positive");
  require(std::abs(x.theta) < kPi / 2.0 - 1e-9, ErrorKind::EnvelopeViolation, "pitch attitude at gimbal singularity");
  check_aero_envelope(x.alpha, x.beta);

  const double g = params.gravity;
  const double ca = std::cos(x.alpha), sa = std::sin(x.alpha);
  const double cb = std::cos(x.beta), sb = std::sin(x.beta);
  const double cph = std::cos(x.phi), sph = std::sin(x.phi);
  const double cth = std::cos(x.theta), sth = std::sin(x.theta);
  const double cps = std::cos(x.psi), sps = std::sin(x.psi);

  const double u = x.vt * ca * cb;
  const double v = x.vt * sb;
  const double w = x.vt * sa * cb;

  double fx = 0.0, fy = 0.0, fz = 0.0, l = 0.0, m = 0.0, n = 0.0;
  if (params.aerodynamics_enabled) {
    const Atmosphere atm = atmosphere(x.vt, x.altitude());
    const AeroCoefficients c = aero_coefficients(x, s, params);
    const double qs = atm.qbar * params.wing_area;
    fx = qs * c.cx + thrust(x.pow, atm, params);
    fy = qs * c.cy;
    fz = qs * c.cz;
    l = qs * params.span * c.cl;
    m = qs * params.chord * c.cm;
    n = qs * params.span * c.cn;
  }

  const double udot = x.r * v - x.q * w - g * sth + fx / params.mass;
  const double vdot = x.p * w - x.r * u + g * cth * sph + fy / params.mass;
  const double wdot = x.q * u - x.p * v + g * cth * cph + fz / params.mass;

  AircraftState d;
  d.vt = (u * udot + v * vdot + w * wdot) / x.vt;
  d.beta = (x.vt * vdot - v * d.vt) / (x.vt * x.vt * cb);
  d.alpha = (u * wdot - w * udot) / (u * u + w * w);

  const double qs_r = x.q * sph + x.r * cph;
  d.phi = x.p + (sth / cth) * qs_r;
  d.theta = x.q * cph - x.r * sph;
  d.psi = qs_r / cth;

  const auto acc = InertiaTerms(params).accelerations(x.p, x.q, x.r, l, m, n);
  d.p = acc[0];
  d.q = acc[1];
  d.r = acc[2];

  d.pn = u * cth * cps + v * (sph * sth * cps - cph * sps) + w * (cph * sth * cps + sph * sps);
  d.pe = u * cth * sps + v * (sph * sth * sps + cph * cps) + w * (cph * sth * sps - sph * cps);
  d.pd = -u * sth + v * sph * cth + w * cph * cth;

  d.pow = (commanded_power(s.throttle) - x.pow) / params.engine_tau;
  return d;
}

/// First-order lag toward the (magnitude-clamped) command, then rate and magnitude limits.
inline SurfaceState clamp_and_rate_limit(const ControlInput& command, const SurfaceState& surfaces,
                                         const AircraftParams& params, double dt) {
  require(dt > 0.0, ErrorKind::InvalidArgument, "dt must be positive");
  const auto cmd = ControlLimits::clamp(command).to_array();
  auto pos = surfaces.to_array();
  const auto tau = params.time_constants();
  const auto rate = params.rate_limits();
  for (std::size_t i = 0; i < pos.size(); ++i) {
    const double response = tau[i] > 0.0 ? pos[i] + (cmd[i] - pos[i]) * (1.0 - std::exp(-dt / tau[i])) : cmd[i];
    const double max_change = rate[i] * dt;
    const double next = pos[i] + std::clamp(response - pos[i], -max_change, max_change);
    pos[i] = std::clamp(next, ControlLimits::kMin[i], ControlLimits::kMax[i]);
  }
  return SurfaceState::from_array(pos);
}

constexpr double kMaxBodyRate = 20.0;     // rad/s
constexpr double kMaxAirspeed = 3000.0;   // ft/s
constexpr double kMaxStepDt = 0.05;       // s

inline void check_divergence(const AircraftState& x) {
  if (!x.finite() || std::abs(x.p) > kMaxBodyRate || std::abs(x.q) > kMaxBodyRate || std::abs(x.r) > kMaxBodyRate ||
      x.vt > kMaxAirspeed)
    fail(ErrorKind::NumericalDivergence, "state left sanity bounds (vt=" + std::to_string(x.vt) + ")");
}

/// One classical RK4 step with surfaces held constant over the interval.
inline AircraftState rk4(const AircraftState& x, const SurfaceState& s, const AircraftParams& params, double dt) {
  using V = AircraftState::Vector;
  const auto add = [](const V& a, const V& b, double h) {
    V out;
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + h * b[i];
    return out;
  };
  const V x0 = x.to_array();
  const V k1 = state_derivative(x, s, params).to_array();
  const V k2 = state_derivative(AircraftState::from_array(add(x0, k1, dt / 2)), s, params).to_array();
  const V k3 = state_derivative(AircraftState::from_array(add(x0, k2, dt / 2)), s, params).to_array();
  const V k4 = state_derivative(AircraftState::from_array(add(x0, k3, dt)), s, params).to_array();
  V out;
  for (std::size_t i = 0; i < x0.size(); ++i) out[i] = x0[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return AircraftState::from_array(out);
}

/// Advances actuators, then the airframe, by one fixed step.
inline std::pair<AircraftState, SurfaceState> step(const AircraftState& x, const ControlInput& command,
                                                   const SurfaceState& surfaces, const AircraftParams& params,
                                                   double dt) {
  require(dt > 0.0 && dt <= kMaxStepDt, ErrorKind::InvalidArgument, "dt must lie in (0, 0.05]");
  const SurfaceState next_surfaces = clamp_and_rate_limit(command, surfaces, params, dt);
  const AircraftState next = rk4(x, next_surfaces, params, dt);
  check_divergence(next);
  return {next, next_surfaces};
}

}  // namespace mangen::flight
