#pragma once

#include "mangen/expert/demonstration.hpp"
#include "mangen/expert/ndi.hpp"
#include "mangen/flight/trim.hpp"

namespace mangen::expert {

/// NDI expert bound to one airframe and trim point.
struct ExpertPolicy {
  flight::AircraftParams params;
  NdiGains gains;
  double trim_throttle = 0.0;
  double airspeed_ref = 0.0;

  flight::ControlInput act(const flight::AircraftState& x, const Rates& ref, const Rates& ref_dot) const {
    return ndi_action(x, ref, gains, params, trim_throttle, airspeed_ref, ref_dot);
  }

  static ExpertPolicy at_trim(const flight::TrimResult& trim, const flight::AircraftParams& params,
                              const NdiGains& gains = {}) {
    return {params, gains, trim.control.throttle, trim.state.vt};
  }
};

/// Closed-loop NDI rollout over `profile` starting from straight-and-level trim.
inline Demonstration run_expert(double vt, double altitude, const ReferenceProfile& profile,
                                const flight::AircraftParams& params, const NdiGains& gains = {}) {
  gains.validate();
  const flight::TrimResult tr = flight::trim(vt, altitude, params);
  const ExpertPolicy expert = ExpertPolicy::at_trim(tr, params, gains);

  Demonstration demo;
  demo.dt = profile.dt;
  demo.trim_vt = vt;
  demo.trim_alt = altitude;
  demo.params_id = params.name;
  demo.maneuver = profile.maneuver;
  demo.planned_length = profile.size();
  demo.samples.reserve(profile.size());

  flight::AircraftState x = tr.state;
  flight::SurfaceState s = tr.control;
  try {
    for (std::size_t k = 0; k < profile.size(); ++k) {
      const flight::ControlInput u = expert.act(x, profile.samples[k], profile.derivatives[k]);
      demo.samples.push_back({profile.dt * static_cast<double>(k), x, s, u, u, profile.samples[k], 0.0});
      if (k + 1 < profile.size()) std::tie(x, s) = flight::step(x, u, s, params, profile.dt);
    }
  } catch (const Error& e) {
    fail(ErrorKind::ExpertDiverged, std::string("expert rollout failed at vt=") + std::to_string(vt) +
                                        " h=" + std::to_string(altitude) + ": " + e.what());
  }
  return demo;
}

}  // namespace mangen::expert
