#pragma once

#include <vector>

#include "mangen/nn/spec.hpp"

namespace mangen::nn {

/// Per-parameter trainability; true means frozen.
using FreezeMask = std::vector<bool>;

inline FreezeMask no_freeze(std::size_t n) { return FreezeMask(n, false); }

inline std::size_t frozen_count(const FreezeMask& mask) {
  std::size_t n = 0;
  for (bool b : mask) n += b ? 1 : 0;
  return n;
}

struct AdamState {
  Vector m;
  Vector v;
  long long t = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_size(std::size_t n, double lr) {
    AdamState s;
    s.m = Vector::Zero(static_cast<Eigen::Index>(n));
    s.v = Vector::Zero(static_cast<Eigen::Index>(n));
    s.lr = lr;
    return s;
  }
};

/// One Adam update. Frozen entries (and their moments) are left untouched.
inline void adam_step(Vector& params, const Vector& grads, AdamState& st, const FreezeMask& mask) {
  const Eigen::Index n = params.size();
  require(grads.size() == n && st.m.size() == n && st.v.size() == n && static_cast<Eigen::Index>(mask.size()) == n,
          ErrorKind::LengthMismatch, "adam_step operands differ in length");
  ++st.t;
  const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
  for (Eigen::Index i = 0; i < n; ++i) {
    if (mask[static_cast<std::size_t>(i)]) continue;
    const double g = grads[i];
    st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * g;
    st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * g * g;
    params[i] -= st.lr * (st.m[i] / c1) / (std::sqrt(st.v[i] / c2) + st.epsilon);
  }
}

inline void adam_step(Vector& params, const Vector& grads, AdamState& st) {
  adam_step(params, grads, st, no_freeze(static_cast<std::size_t>(params.size())));
}

}  // namespace mangen::nn
