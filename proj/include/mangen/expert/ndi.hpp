#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "mangen/expert/profile.hpp"
#include "mangen/flight/dynamics.hpp"

namespace mangen::expert {

/// Rate-loop bandwidths (1/s) and the airspeed-hold throttle gain (1/(ft/s)).
struct NdiGains {
  double kp = 5.0;
  double kq = 5.0;
  double kr = 5.0;
  double k_airspeed = 0.005;
  double max_condition = 1e6;

  void validate() const {
    require(kp > 0.0 && kq > 0.0 && kr > 0.0 && k_airspeed > 0.0, ErrorKind::InvalidArgument,
            "NDI gains must be positive");
  }
};

/// Nonlinear dynamic inversion of the rotational dynamics.
///
/// Desired angular accelerations nu = rates_dot_ref + K (rates_ref - rates)
/// are mapped to the moments that produce them, and the aerodynamic moment
/// model is inverted for (elevator, aileron, rudder) by Newton iteration.
/// Throttle holds airspeed around the trim setting.
inline flight::ControlInput ndi_action(const flight::AircraftState& x, const Rates& rates_ref, const NdiGains& gains,
                                       const flight::AircraftParams& params, double trim_throttle, double airspeed_ref,
                                       const Rates& rates_ref_dot = {0.0, 0.0, 0.0}) {
  const double nu_p = rates_ref_dot[0] + gains.kp * (rates_ref[0] - x.p);
  const double nu_q = rates_ref_dot[1] + gains.kq * (rates_ref[1] - x.q);
  const double nu_r = rates_ref_dot[2] + gains.kr * (rates_ref[2] - x.r);

  // Required moments: I * nu + omega x (I * omega), with Ixy = Iyz = 0.
  const double ixx = params.ixx, iyy = params.iyy, izz = params.izz, ixz = params.ixz;
  const double hx = ixx * x.p - ixz * x.r;
  const double hy = iyy * x.q;
  const double hz = izz * x.r - ixz * x.p;
  Eigen::Vector3d m_req;
  m_req << ixx * nu_p - ixz * nu_r + (x.q * hz - x.r * hy),  //
      iyy * nu_q + (x.r * hx - x.p * hz),                    //
      izz * nu_r - ixz * nu_p + (x.p * hy - x.q * hx);

  auto moments_at = [&](const Eigen::Vector3d& d) {
    const flight::SurfaceState s{0.0, d[0], d[1], d[2]};
    const auto m = flight::aero_moments(x, s, params);
    return Eigen::Vector3d(m[0], m[1], m[2]);
  };

  Eigen::Vector3d delta = Eigen::Vector3d::Zero();
  constexpr double h = 1e-3;  // deg
  for (int it = 0; it < 8; ++it) {
    Eigen::Matrix3d jac;
    for (int j = 0; j < 3; ++j) {
      Eigen::Vector3d dp = delta, dm = delta;
      dp[j] += h;
      dm[j] -= h;
      jac.col(j) = (moments_at(dp) - moments_at(dm)) / (2.0 * h);
    }
    const Eigen::JacobiSVD<Eigen::Matrix3d> svd(jac);
    const auto sv = svd.singularValues();
    if (!(sv[2] > 0.0) || sv[0] / sv[2] > gains.max_condition)
      fail(ErrorKind::InversionSingular, "control-effectiveness matrix ill-conditioned");
    const Eigen::Vector3d step = jac.lu().solve(m_req - moments_at(delta));
    delta += step;
    // Stop once the move is negligible or the solution is far outside the limits anyway.
    if (step.norm() < 1e-9 || delta.cwiseAbs().maxCoeff() > 200.0) break;
  }

  const double throttle = trim_throttle + gains.k_airspeed * (airspeed_ref - x.vt);
  return flight::ControlLimits::clamp({throttle, delta[0], delta[1], delta[2]});
}

}  // namespace mangen::expert
