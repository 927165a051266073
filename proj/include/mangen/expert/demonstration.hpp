#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mangen/expert/profile.hpp"
#include "mangen/flight/types.hpp"

namespace mangen::expert {

/// One time step of a rollout. `surfaces` are the actuator positions at
/// `time`; `command` is what was executed over [time, time + dt); `label` is
/// the expert's action for the same state (equal to `command` for expert runs).
struct DemoSample {
  double time = 0.0;
  flight::AircraftState state;
  flight::SurfaceState surfaces;
  flight::ControlInput command;
  flight::ControlInput label;
  Rates reference{0.0, 0.0, 0.0};
  double lambda = 0.0;
};

struct Demonstration {
  double dt = 0.02;
  double trim_vt = 0.0;   // ft/s
  double trim_alt = 0.0;  // ft
  std::string params_id;
  Maneuver maneuver = Maneuver::SplitS;
  std::vector<DemoSample> samples;
  /// Set when the rollout stopped early; `samples` then holds the valid prefix.
  bool diverged = false;
  std::size_t planned_length = 0;

  std::size_t size() const { return samples.size(); }
};

/// Normal acceleration feature in g: (Q*Vt - g cos(theta) cos(phi)) / g.
inline double normal_acceleration(const flight::AircraftState& x, double gravity) {
  return (x.q * x.vt - gravity * std::cos(x.theta) * std::cos(x.phi)) / gravity;
}

}  // namespace mangen::expert
