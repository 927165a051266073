#pragma once

// Global polynomial approximation of F-16 aerodynamics (alpha in [-10, 45] deg,
// |beta| <= 30 deg). Angles and elevator in rad, aileron/rudder normalized by
// their maximum deflection, rates non-dimensionalized by b/2V or c/2V.
// Cross terms coupling beta with aileron/rudder effectiveness are omitted so
// the lateral-directional coefficients stay exactly odd under mirroring.

#include <cmath>

#include "mangen/flight/types.hpp"

namespace mangen::flight {

struct AeroCoefficients {
  double cx = 0.0;
  double cy = 0.0;
  double cz = 0.0;
  double cl = 0.0;
  double cm = 0.0;
  double cn = 0.0;
};

constexpr double kAlphaMinDeg = -10.0;
constexpr double kAlphaMaxDeg = 45.0;
constexpr double kBetaMaxDeg = 30.0;

inline void check_aero_envelope(double alpha, double beta) {
  const double a = alpha * kRadToDeg;
  const double b = beta * kRadToDeg;
  if (!(a >= kAlphaMinDeg && a <= kAlphaMaxDeg) || !(std::abs(b) <= kBetaMaxDeg))
    fail(ErrorKind::EnvelopeViolation,
         "alpha=" + std::to_string(a) + " deg, beta=" + std::to_string(b) + " deg outside model validity");
}

inline AeroCoefficients aero_coefficients(const AircraftState& x, const SurfaceState& s, const AircraftParams& params) {
  check_aero_envelope(x.alpha, x.beta);
  require(x.vt > 0.0, ErrorKind::EnvelopeViolation, "airspeed must be positive");

  const double a = x.alpha;
  const double b = x.beta;
  const double a2 = a * a, a3 = a2 * a, a4 = a3 * a, a5 = a4 * a, a6 = a5 * a, a7 = a6 * a;
  const double el = s.elevator * kDegToRad;
  const double ail = s.aileron / ControlLimits::kMax[2];
  const double rud = s.rudder / ControlLimits::kMax[3];

  const double pb = x.p * params.span / (2.0 * x.vt);
  const double rb = x.r * params.span / (2.0 * x.vt);
  const double qc = x.q * params.chord / (2.0 * x.vt);

  const double cx0 = -1.943367e-2 + 2.136104e-1 * a - 2.903457e-1 * el * el - 3.348641e-3 * el -
                     2.060504e-1 * a * el + 6.988016e-1 * a2 - 9.035381e-1 * a3;
  const double cxq = 4.833383e-1 + 8.644627 * a + 1.131098e1 * a2 - 7.422961e1 * a3 + 6.075776e1 * a4;

  const double cy0 = -1.145916 * b + 6.016057e-2 * ail + 1.642479e-1 * rud;
  const double cyp = -1.006733e-1 + 8.679799e-1 * a + 4.260586 * a2 - 6.923267 * a3;
  const double cyr = 8.071648e-1 + 1.189633e-1 * a + 4.177702 * a2 - 9.162236 * a3;

  const double cz0 = (-1.378278e-1 - 4.211369 * a + 4.775187 * a2 - 1.026225e1 * a3 + 8.399763 * a4) * (1.0 - b * b) -
                     4.354000e-1 * el;
  const double czq = -3.054956e1 - 4.132305e1 * a + 3.292788e2 * a2 - 6.848038e2 * a3 + 4.080244e2 * a4;

  const double cl0 = b * (-1.058583e-1 - 5.776677e-1 * a - 1.672435e-2 * a2 + 1.357256e-1 * a3 + 2.172952e-1 * a4 +
                          3.464156 * a5 - 2.835451 * a6 - 1.098104 * a7);
  const double clp = -4.126806e-1 - 1.189974e-1 * a + 1.247721 * a2 - 7.391132e-1 * a3;
  const double clr = 6.250437e-2 + 6.067723e-1 * a - 1.101964 * a2 + 9.100087 * a3 - 1.192672e1 * a4;
  const double clda = -1.463144e-1 - 4.073901e-2 * a + 4.851209e-1 * a2 - 3.213068e-1 * a3;
  const double cldr = 2.635729e-2 - 2.192910e-2 * a;

  const double cm0 = -2.029370e-2 + 4.660702e-2 * a - 6.012308e-1 * el - 8.062977e-2 * a * el +
                     8.320429e-2 * el * el + 5.018538e-1 * a2 * el + 6.378864e-1 * el * el * el +
                     4.226356e-1 * a * el * el;
  const double cmq = -5.19153 - 3.554716 * a - 3.598636e1 * a2 + 2.247355e2 * a3 - 4.120991e2 * a4 + 2.411750e2 * a5;

  const double cn0 = b * (2.993363e-1 + 6.594004e-2 * a - 2.003125e-1 * a2 - 6.233977e-2 * a3 - 2.107885 * a4 +
                          2.141420 * a5 + 8.476901e-1 * a6);
  const double cnp = 2.677652e-2 - 3.298246e-1 * a + 1.926178e-1 * a2 + 4.013325 * a3 - 4.404302 * a4;
  const double cnr = -3.698756e-1 - 1.167551e-1 * a - 7.641297e-1 * a2;
  const double cnda = -3.348717e-2 + 4.276655e-2 * a + 2.302543e-1 * a2 - 2.512876e-1 * a3;
  const double cndr = -8.115894e-2 - 1.156580e-2 * a + 1.004297e-1 * a2;

  AeroCoefficients c;
  c.cx = cx0 + qc * cxq;
  c.cy = cy0 + pb * cyp + rb * cyr;
  c.cz = cz0 + qc * czq;
  c.cl = cl0 + clda * ail + cldr * rud + pb * clp + rb * clr;
  const double dx = params.xcg_ref - params.xcg;
  c.cm = cm0 + qc * cmq + c.cz * dx;
  c.cn = cn0 + cnda * ail + cndr * rud + pb * cnp + rb * cnr - c.cy * dx * (params.chord / params.span);

  const double k = params.aero_scale;
  c.cx *= k;
  c.cy *= k;
  c.cz *= k;
  c.cl *= k;
  c.cm *= k;
  c.cn *= k;
  return c;
}

}  // namespace mangen::flight
