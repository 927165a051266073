#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>

#include "mangen/flight/dynamics.hpp"

namespace mangen::flight {

struct TrimResult {
  AircraftState state;
  ControlInput control;
  double residual_norm = 0.0;
  int iterations = 0;
};

struct TrimOptions {
  double alpha_guess = 2.0 * kDegToRad;
  double throttle_guess = 0.3;
  double elevator_guess = 0.0;
  double tolerance = 1e-10;
  int max_iterations = 100;
};

namespace detail {

inline AircraftState level_state(double vt, double altitude, double alpha, double throttle) {
  AircraftState x;
  x.vt = vt;
  x.alpha = alpha;
  x.theta = alpha;
  x.pd = -altitude;
  x.pow = commanded_power(throttle);
  return x;
}

/// Residual vector (Vt', alpha', beta', P', Q', R', theta') of wings-level flight.
inline Eigen::Matrix<double, 7, 1> trim_residual(double vt, double altitude, const Eigen::Vector3d& z,
                                                 const AircraftParams& params) {
  const AircraftState x = level_state(vt, altitude, z[0], z[2]);
  const SurfaceState s{z[2], z[1], 0.0, 0.0};
  const AircraftState d = state_derivative(x, s, params);
  Eigen::Matrix<double, 7, 1> r;
  r << d.vt, d.alpha, d.beta, d.p, d.q, d.r, d.theta;
  return r;
}

}  // namespace detail

/// Dynamic-residual norm used to judge any candidate trim point.
inline double trim_residual_norm(const AircraftState& x, const SurfaceState& s, const AircraftParams& params) {
  const AircraftState d = state_derivative(x, s, params);
  return std::sqrt(d.vt * d.vt + d.alpha * d.alpha + d.beta * d.beta + d.p * d.p + d.q * d.q + d.r * d.r +
                   d.theta * d.theta);
}

/// Straight, level, wings-level trim by damped Gauss-Newton over
/// (alpha, elevator, throttle) with a central-difference Jacobian.
inline TrimResult trim(double vt, double altitude, const AircraftParams& params, const TrimOptions& opts = {}) {
  params.validate();
  require(vt > 0.0 && altitude >= 0.0, ErrorKind::TrimNotFound, "flight condition outside envelope");

  // z = (alpha rad, elevator deg, throttle fraction)
  Eigen::Vector3d z(opts.alpha_guess, opts.elevator_guess, opts.throttle_guess);
  const std::array<double, 3> step_size = {1e-6, 1e-4, 1e-6};

  auto residual = [&](const Eigen::Vector3d& zz) { return detail::trim_residual(vt, altitude, zz, params); };

  Eigen::Matrix<double, 7, 1> r;
  try {
    r = residual(z);
  } catch (const Error& e) {
    fail(ErrorKind::TrimNotFound, std::string("initial guess invalid: ") + e.what());
  }

  int it = 0;
  for (; it < opts.max_iterations && r.norm() > opts.tolerance; ++it) {
    Eigen::Matrix<double, 7, 3> jac;
    for (int j = 0; j < 3; ++j) {
      Eigen::Vector3d zp = z, zm = z;
      zp[j] += step_size[j];
      zm[j] -= step_size[j];
      try {
        jac.col(j) = (residual(zp) - residual(zm)) / (2.0 * step_size[j]);
      } catch (const Error& e) {
        fail(ErrorKind::TrimNotFound, std::string("jacobian evaluation failed: ") + e.what());
      }
    }
    const Eigen::Vector3d dz = jac.colPivHouseholderQr().solve(-r);

    double lambda = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 30; ++ls, lambda *= 0.5) {
      const Eigen::Vector3d trial = z + lambda * dz;
      try {
        const auto rt = residual(trial);
        if (rt.norm() < r.norm()) {
          z = trial;
          r = rt;
          accepted = true;
          break;
        }
      } catch (const Error&) {
        // outside envelope: shrink further
      }
    }
    if (!accepted) break;
  }

  if (!(r.norm() <= opts.tolerance))
    fail(ErrorKind::TrimNotFound, "no convergence at vt=" + std::to_string(vt) + " h=" + std::to_string(altitude) +
                                      " (residual " + std::to_string(r.norm()) + ")");

  TrimResult out;
  out.state = detail::level_state(vt, altitude, z[0], z[2]);
  out.control = ControlInput{z[2], z[1], 0.0, 0.0};
  out.residual_norm = r.norm();
  out.iterations = it;
  if (!ControlLimits::within(out.control))
    fail(ErrorKind::TrimNotFound, "trim control outside actuator limits at vt=" + std::to_string(vt));
  return out;
}

}  // namespace mangen::flight
