#pragma once

#include "mangen/nn/lstm.hpp"

namespace mangen::nn {

enum class Activation { Identity, Tanh, Sigmoid, Relu };

struct DenseParams {
  Eigen::Map<const Matrix> w;
  Eigen::Map<const Vector> b;

  DenseParams(const double* base, const LayerSlot& s)
      : w(base + s.offset, s.out, s.in), b(base + s.offset + s.out * s.in, s.out) {}
};

struct DenseGrads {
  Eigen::Map<Matrix> w;
  Eigen::Map<Vector> b;

  DenseGrads(double* base, const LayerSlot& s) : w(base + s.offset, s.out, s.in), b(base + s.offset + s.out * s.in, s.out) {}
};

inline Matrix activate(const Matrix& z, Activation act) {
  switch (act) {
    case Activation::Identity: return z;
    case Activation::Tanh: return z.array().tanh().matrix();
    case Activation::Sigmoid: return sigmoid(z);
    case Activation::Relu: return z.cwiseMax(0.0);
  }
  return z;
}

/// d(act)/dz expressed through the activation output `y` (and `z` for ReLU).
inline Matrix activation_slope(const Matrix& y, Activation act) {
  switch (act) {
    case Activation::Identity: return Matrix::Ones(y.rows(), y.cols());
    case Activation::Tanh: return (1.0 - y.array().square()).matrix();
    case Activation::Sigmoid: return (y.array() * (1.0 - y.array())).matrix();
    case Activation::Relu: return (y.array() > 0.0).cast<double>().matrix();
  }
  return Matrix::Ones(y.rows(), y.cols());
}

/// Outputs of each layer in a dense stack; `outputs[0]` is the stack input.
struct DenseCache {
  std::vector<Matrix> outputs;
};

inline Matrix dense_apply(const DenseParams& p, const Matrix& x, Activation act) {
  Matrix z = p.w * x;
  z.colwise() += p.b;
  return activate(z, act);
}

/// Forward through consecutive dense slots; the last layer uses `out_act`.
inline DenseCache dense_stack_forward(const double* base, const std::vector<const LayerSlot*>& slots, const Matrix& x,
                                      Activation hidden_act, Activation out_act) {
  DenseCache cache;
  cache.outputs.reserve(slots.size() + 1);
  cache.outputs.push_back(x);
  for (std::size_t k = 0; k < slots.size(); ++k) {
    const Activation act = k + 1 == slots.size() ? out_act : hidden_act;
    cache.outputs.push_back(dense_apply(DenseParams(base, *slots[k]), cache.outputs.back(), act));
  }
  return cache;
}

/// Backward through the stack given dL/d(output). Accumulates into `grad_base`
/// (skipped when nullptr) and returns dL/d(input).
inline Matrix dense_stack_backward(const double* base, const std::vector<const LayerSlot*>& slots,
                                   const DenseCache& cache, const Matrix& d_out, Activation hidden_act,
                                   Activation out_act, double* grad_base) {
  Matrix d = d_out;
  for (std::size_t k = slots.size(); k-- > 0;) {
    const Activation act = k + 1 == slots.size() ? out_act : hidden_act;
    const Matrix dz = d.cwiseProduct(activation_slope(cache.outputs[k + 1], act));
    const DenseParams p(base, *slots[k]);
    if (grad_base) {
      DenseGrads g(grad_base, *slots[k]);
      g.w.noalias() += dz * cache.outputs[k].transpose();
      g.b += dz.rowwise().sum();
    }
    d.noalias() = p.w.transpose() * dz;
  }
  return d;
}

}  // namespace mangen::nn
