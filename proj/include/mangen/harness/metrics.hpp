#pragma once

#include <algorithm>
#include <array>
#include <string>
#include <vector>

#include "mangen/expert/demonstration.hpp"

namespace mangen::harness {

/// Per-axis tracking MSE (rad^2/s^2); `pqr` is the mean of the three axes.
struct PqrMse {
  double p = 0.0;
  double q = 0.0;
  double r = 0.0;
  double pqr = 0.0;
};

/// Squared rate-tracking errors over the planned length of a trajectory.
/// A truncated trajectory is padded per axis with its largest squared error.
inline PqrMse pqr_mse(const expert::Demonstration& d) {
  const std::size_t planned = std::max(d.planned_length, d.size());
  require(!d.samples.empty() && planned > 0, ErrorKind::LengthMismatch, "trajectory has no samples to score");
  std::array<double, 3> sum{}, worst{};
  for (const auto& s : d.samples) {
    const std::array<double, 3> e{s.reference[0] - s.state.p, s.reference[1] - s.state.q, s.reference[2] - s.state.r};
    for (int k = 0; k < 3; ++k) {
      sum[k] += e[k] * e[k];
      worst[k] = std::max(worst[k], e[k] * e[k]);
    }
  }
  const double missing = static_cast<double>(planned - d.size());
  PqrMse m;
  m.p = (sum[0] + missing * worst[0]) / static_cast<double>(planned);
  m.q = (sum[1] + missing * worst[1]) / static_cast<double>(planned);
  m.r = (sum[2] + missing * worst[2]) / static_cast<double>(planned);
  m.pqr = (m.p + m.q + m.r) / 3.0;
  return m;
}

/// Error of a trajectory against an explicit reference sequence.
inline PqrMse pqr_mse(const expert::Demonstration& d, const std::vector<expert::Rates>& reference) {
  require(d.size() <= reference.size() && !d.samples.empty(), ErrorKind::LengthMismatch,
          "trajectory longer than its reference or empty");
  expert::Demonstration aligned = d;
  aligned.planned_length = reference.size();
  for (std::size_t k = 0; k < aligned.size(); ++k) aligned.samples[k].reference = reference[k];
  return pqr_mse(aligned);
}

}  // namespace mangen::harness
