#pragma once

#include <vector>

#include "mangen/nn/spec.hpp"

namespace mangen::nn {

inline Matrix sigmoid(const Matrix& x) { return (1.0 + (-x.array()).exp()).inverse().matrix(); }

/// Read-only views of one LSTM layer's parameters.
struct LstmParams {
  Eigen::Map<const Matrix> wx;
  Eigen::Map<const Matrix> wh;
  Eigen::Map<const Vector> b;

  LstmParams(const double* base, const LayerSlot& s)
      : wx(base + s.offset, 4 * s.out, s.in),
        wh(base + s.offset + 4 * s.out * s.in, 4 * s.out, s.out),
        b(base + s.offset + 4 * s.out * (s.in + s.out), 4 * s.out) {}

  Eigen::Index hidden() const { return wh.cols(); }
};

/// Writable views of the matching gradient slice.
struct LstmGrads {
  Eigen::Map<Matrix> wx;
  Eigen::Map<Matrix> wh;
  Eigen::Map<Vector> b;

  LstmGrads(double* base, const LayerSlot& s)
      : wx(base + s.offset, 4 * s.out, s.in),
        wh(base + s.offset + 4 * s.out * s.in, 4 * s.out, s.out),
        b(base + s.offset + 4 * s.out * (s.in + s.out), 4 * s.out) {}
};

/// Activations kept for backpropagation through time. Each matrix is H x B.
struct LstmCache {
  std::vector<Matrix> inputs;  // per step, or a single entry when the input is constant
  bool constant_input = false;
  std::vector<Matrix> i, f, o, g, c, tanh_c, h;

  std::size_t steps() const { return h.size(); }
  const Matrix& input(std::size_t t) const { return constant_input ? inputs.front() : inputs[t]; }
};

namespace detail {

inline void lstm_cell(const LstmParams& p, const Matrix& pre_input, LstmCache& cache) {
  const Eigen::Index hsz = p.hidden();
  Matrix pre = pre_input;
  if (!cache.h.empty()) pre.noalias() += p.wh * cache.h.back();
  Matrix i = sigmoid(pre.topRows(hsz));
  Matrix f = sigmoid(pre.middleRows(hsz, hsz));
  Matrix o = sigmoid(pre.middleRows(2 * hsz, hsz));
  Matrix g = pre.bottomRows(hsz).array().tanh().matrix();
  Matrix c = i.cwiseProduct(g);
  if (!cache.c.empty()) c += f.cwiseProduct(cache.c.back());
  Matrix tc = c.array().tanh().matrix();
  Matrix h = o.cwiseProduct(tc);
  cache.i.push_back(std::move(i));
  cache.f.push_back(std::move(f));
  cache.o.push_back(std::move(o));
  cache.g.push_back(std::move(g));
  cache.c.push_back(std::move(c));
  cache.tanh_c.push_back(std::move(tc));
  cache.h.push_back(std::move(h));
}

}  // namespace detail

/// Runs the layer over a sequence of inputs (each in x B), zero initial state.
inline LstmCache lstm_forward(const LstmParams& p, const std::vector<Matrix>& xs) {
  LstmCache cache;
  cache.inputs = xs;
  for (const auto& x : xs) {
    Matrix pre = p.wx * x;
    pre.colwise() += p.b;
    detail::lstm_cell(p, pre, cache);
  }
  return cache;
}

/// Runs the layer for `steps` steps with the same input at every step.
inline LstmCache lstm_forward_constant(const LstmParams& p, const Matrix& x, int steps) {
  LstmCache cache;
  cache.inputs = {x};
  cache.constant_input = true;
  Matrix pre = p.wx * x;
  pre.colwise() += p.b;
  for (int t = 0; t < steps; ++t) detail::lstm_cell(p, pre, cache);
  return cache;
}

/// Backpropagation through time. `dh[t]` is the loss gradient w.r.t. h_t
/// arriving from above (an empty matrix means zero). Parameter gradients are
/// accumulated into `grads`. Input gradients go to `dxs` (per step) or, for a
/// constant input, to `dx_sum`; pass nullptr when they are not needed.
inline void lstm_backward(const LstmParams& p, const LstmCache& cache, const std::vector<Matrix>& dh, LstmGrads& grads,
                          std::vector<Matrix>* dxs, Matrix* dx_sum) {
  const std::size_t steps = cache.steps();
  const Eigen::Index hsz = p.hidden();
  const Eigen::Index batch = cache.h.front().cols();
  Matrix dh_next = Matrix::Zero(hsz, batch);
  Matrix dc_next = Matrix::Zero(hsz, batch);
  Matrix da(4 * hsz, batch);
  Matrix da_sum;
  if (cache.constant_input) da_sum = Matrix::Zero(4 * hsz, batch);
  if (dxs) dxs->assign(steps, Matrix());

  for (std::size_t step = steps; step-- > 0;) {
    Matrix dht = dh_next;
    if (dh.size() > step && dh[step].size() > 0) dht += dh[step];
    const Matrix& o = cache.o[step];
    const Matrix& i = cache.i[step];
    const Matrix& f = cache.f[step];
    const Matrix& g = cache.g[step];
    const Matrix& tc = cache.tanh_c[step];

    Matrix dc = dc_next + dht.cwiseProduct(o).cwiseProduct((1.0 - tc.array().square()).matrix());
    const Matrix d_o = dht.cwiseProduct(tc);
    const Matrix d_i = dc.cwiseProduct(g);
    const Matrix d_g = dc.cwiseProduct(i);

    da.topRows(hsz) = d_i.array() * i.array() * (1.0 - i.array());
    if (step > 0) {
      const Matrix& c_prev = cache.c[step - 1];
      da.middleRows(hsz, hsz) = dc.array() * c_prev.array() * f.array() * (1.0 - f.array());
    } else {
      da.middleRows(hsz, hsz).setZero();
    }
    da.middleRows(2 * hsz, hsz) = d_o.array() * o.array() * (1.0 - o.array());
    da.bottomRows(hsz) = d_g.array() * (1.0 - g.array().square());

    dc_next = dc.cwiseProduct(f);
    grads.b += da.rowwise().sum();
    if (step > 0) grads.wh.noalias() += da * cache.h[step - 1].transpose();
    if (cache.constant_input) {
      da_sum += da;
    } else {
      grads.wx.noalias() += da * cache.inputs[step].transpose();
      if (dxs) (*dxs)[step].noalias() = p.wx.transpose() * da;
    }
    dh_next.noalias() = p.wh.transpose() * da;
  }

  if (cache.constant_input) {
    grads.wx.noalias() += da_sum * cache.inputs.front().transpose();
    if (dx_sum) dx_sum->noalias() = p.wx.transpose() * da_sum;
  }
}

}  // namespace mangen::nn
