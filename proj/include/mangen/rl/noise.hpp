#pragma once

#include "mangen/nn/spec.hpp"

namespace mangen::rl {

using nn::Vector;

struct OuConfig {
  double mean = 0.0;
  double sigma = 0.1;
  double theta = 0.15;
  double dt = 1.0;
  /// Steps over which sigma decays linearly to zero (0 = no decay).
  double decay_steps = 1e5;
};

/// Ornstein-Uhlenbeck process, one independent channel per action.
struct OuNoise {
  OuConfig config;
  Vector x;
  long long steps = 0;
  std::mt19937_64 rng;

  OuNoise(const OuConfig& cfg, int channels, std::uint64_t seed)
      : config(cfg), x(Vector::Constant(channels, cfg.mean)), rng(seed) {}

  double sigma_effective() const {
    if (config.decay_steps <= 0.0) return config.sigma;
    return config.sigma * std::max(0.0, 1.0 - static_cast<double>(steps) / config.decay_steps);
  }

  void reset() { x.setConstant(config.mean); }

  /// x <- x + theta (mean - x) dt + sigma_eff sqrt(dt) xi
  const Vector& step() {
    const double s = sigma_effective();
    const double sq = std::sqrt(config.dt);
    for (Eigen::Index i = 0; i < x.size(); ++i)
      x[i] += config.theta * (config.mean - x[i]) * config.dt + s * sq * nn::standard_normal(rng);
    ++steps;
    return x;
  }
};

}  // namespace mangen::rl
