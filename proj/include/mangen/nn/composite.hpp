#pragma once

#include <vector>

#include "mangen/nn/dense.hpp"
#include "mangen/nn/lstm.hpp"

namespace mangen::nn {

/// A minibatch of windows laid out step-major: `steps[t]` is F x B.
struct SequenceBatch {
  std::vector<Matrix> steps;

  Eigen::Index batch() const { return steps.empty() ? 0 : steps.front().cols(); }
  Eigen::Index features() const { return steps.empty() ? 0 : steps.front().rows(); }
  std::size_t length() const { return steps.size(); }

  /// Windows starting at `starts` in a feature-major matrix (F x N, one column per sample).
  static SequenceBatch gather(const Matrix& data, const std::vector<Eigen::Index>& starts, int window) {
    SequenceBatch b;
    b.steps.assign(static_cast<std::size_t>(window), Matrix(data.rows(), static_cast<Eigen::Index>(starts.size())));
    for (std::size_t j = 0; j < starts.size(); ++j)
      for (int t = 0; t < window; ++t) b.steps[t].col(static_cast<Eigen::Index>(j)) = data.col(starts[j] + t);
    return b;
  }

  /// From windows given as W x F matrices (rows are time steps).
  static SequenceBatch from_windows(const std::vector<Matrix>& windows) {
    require(!windows.empty(), ErrorKind::ShapeMismatch, "empty batch");
    const Eigen::Index w = windows.front().rows(), f = windows.front().cols();
    SequenceBatch b;
    b.steps.assign(static_cast<std::size_t>(w), Matrix(f, static_cast<Eigen::Index>(windows.size())));
    for (std::size_t j = 0; j < windows.size(); ++j) {
      require(windows[j].rows() == w && windows[j].cols() == f, ErrorKind::ShapeMismatch, "ragged batch");
      for (Eigen::Index t = 0; t < w; ++t) b.steps[t].col(static_cast<Eigen::Index>(j)) = windows[j].row(t).transpose();
    }
    return b;
  }
};

struct CompositeCache {
  std::vector<LstmCache> encoder;
  std::vector<LstmCache> decoder;
  DenseCache head;
};

struct CompositeOutput {
  Matrix prediction;                 // 4 x B, in (0, 1)
  std::vector<Matrix> reconstruction;  // per step, F x B
  CompositeCache cache;
};

namespace detail {

inline std::vector<const LayerSlot*> slots_with_prefix(const Layout& layout, const std::string& prefix) {
  std::vector<const LayerSlot*> out;
  for (const auto& s : layout.slots)
    if (s.name.rfind(prefix, 0) == 0) out.push_back(&s);
  return out;
}

inline void check_batch(const NetworkWeights& w, const SequenceBatch& x) {
  require(static_cast<int>(x.length()) == w.spec.window && x.features() == w.spec.features && x.batch() > 0,
          ErrorKind::ShapeMismatch, "batch shape does not match network spec");
}

inline std::vector<const LayerSlot*> lstm_slots(const Layout& layout, const std::string& prefix) {
  std::vector<const LayerSlot*> out;
  for (const auto* s : slots_with_prefix(layout, prefix))
    if (s->recurrent()) out.push_back(s);
  return out;
}

constexpr Activation kHeadHidden = Activation::Tanh;
constexpr Activation kHeadOut = Activation::Sigmoid;

inline Matrix encode(const NetworkWeights& w, const SequenceBatch& x, std::vector<LstmCache>* caches) {
  const double* base = w.params.data();
  std::vector<Matrix> seq = x.steps;
  for (const auto* slot : lstm_slots(w.layout, "encoder.")) {
    LstmCache c = lstm_forward(LstmParams(base, *slot), seq);
    seq = c.h;
    if (caches) caches->push_back(std::move(c));
  }
  return seq.back();
}

}  // namespace detail

/// Batched forward pass through encoder, decoder and prediction head.
inline CompositeOutput composite_forward(const NetworkWeights& w, const SequenceBatch& x) {
  detail::check_batch(w, x);
  const double* base = w.params.data();
  CompositeOutput out;
  const Matrix latent = detail::encode(w, x, &out.cache.encoder);

  const auto dec_slots = detail::lstm_slots(w.layout, "decoder.");
  for (std::size_t k = 0; k < dec_slots.size(); ++k) {
    const LstmParams p(base, *dec_slots[k]);
    out.cache.decoder.push_back(k == 0 ? lstm_forward_constant(p, latent, w.spec.window)
                                       : lstm_forward(p, out.cache.decoder.back().h));
  }
  const DenseParams readout(base, w.layout.find("decoder.out"));
  for (const auto& h : out.cache.decoder.back().h) out.reconstruction.push_back(dense_apply(readout, h, Activation::Identity));

  out.cache.head = dense_stack_forward(base, detail::slots_with_prefix(w.layout, "head."), latent, detail::kHeadHidden,
                                       detail::kHeadOut);
  out.prediction = out.cache.head.outputs.back();
  return out;
}

/// Prediction only (encoder + head); the decoder is skipped.
inline Matrix predict(const NetworkWeights& w, const SequenceBatch& x) {
  detail::check_batch(w, x);
  const Matrix latent = detail::encode(w, x, nullptr);
  return dense_stack_forward(w.params.data(), detail::slots_with_prefix(w.layout, "head."), latent, detail::kHeadHidden,
                             detail::kHeadOut)
      .outputs.back();
}

struct WindowOutput {
  Vector prediction;
  Matrix reconstruction;  // W x F
};

/// Single-window forward for a W x F window (rows are time steps).
inline WindowOutput forward(const NetworkWeights& w, const Matrix& window) {
  require(window.rows() == w.spec.window && window.cols() == w.spec.features, ErrorKind::ShapeMismatch,
          "window shape does not match network spec");
  const CompositeOutput out = composite_forward(w, SequenceBatch::from_windows({window}));
  WindowOutput r;
  r.prediction = out.prediction.col(0);
  r.reconstruction.resize(window.rows(), window.cols());
  for (Eigen::Index t = 0; t < window.rows(); ++t) r.reconstruction.row(t) = out.reconstruction[t].col(0).transpose();
  return r;
}

/// MSE(prediction, target_action) + lambda_rec * MSE(reconstruction, target_window).
inline double loss(const Vector& prediction, const Matrix& reconstruction, const Vector& target_action,
                   const Matrix& target_window, double lambda_rec) {
  require(prediction.size() == target_action.size() && reconstruction.rows() == target_window.rows() &&
              reconstruction.cols() == target_window.cols() && prediction.size() > 0 && reconstruction.size() > 0,
          ErrorKind::ShapeMismatch, "loss operands differ in shape");
  return (prediction - target_action).squaredNorm() / static_cast<double>(prediction.size()) +
         lambda_rec * (reconstruction - target_window).squaredNorm() / static_cast<double>(reconstruction.size());
}

/// Mean composite loss over a batch.
inline double batch_loss(const CompositeOutput& out, const SequenceBatch& x, const Matrix& targets, double lambda_rec) {
  require(targets.rows() == out.prediction.rows() && targets.cols() == out.prediction.cols(), ErrorKind::ShapeMismatch,
          "target shape mismatch");
  const double b = static_cast<double>(x.batch());
  double rec = 0.0;
  for (std::size_t t = 0; t < x.length(); ++t) rec += (out.reconstruction[t] - x.steps[t]).squaredNorm();
  const double pred = (out.prediction - targets).squaredNorm() / static_cast<double>(out.prediction.rows());
  return (pred + lambda_rec * rec / static_cast<double>(x.length() * x.features())) / b;
}

/// Gradient of the batch-mean composite loss w.r.t. every parameter (BPTT).
inline Vector gradient(const NetworkWeights& w, const SequenceBatch& x, const Matrix& targets, double lambda_rec,
                       double* loss_out = nullptr) {
  const CompositeOutput out = composite_forward(w, x);
  if (loss_out) *loss_out = batch_loss(out, x, targets, lambda_rec);

  const double* base = w.params.data();
  Vector grad = Vector::Zero(w.params.size());
  double* gbase = grad.data();
  const double b = static_cast<double>(x.batch());
  const double rec_scale = 2.0 * lambda_rec / (static_cast<double>(x.length() * x.features()) * b);

  // Prediction head.
  const Matrix d_pred = 2.0 * (out.prediction - targets) / (static_cast<double>(targets.rows()) * b);
  Matrix d_latent = dense_stack_backward(base, detail::slots_with_prefix(w.layout, "head."), out.cache.head, d_pred,
                                         detail::kHeadHidden, detail::kHeadOut, gbase);

  // Reconstruction readout and decoder stack.
  const LayerSlot& readout_slot = w.layout.find("decoder.out");
  const DenseParams readout(base, readout_slot);
  DenseGrads readout_grad(gbase, readout_slot);
  const auto& dec_top = out.cache.decoder.back();
  std::vector<Matrix> dh(x.length());
  for (std::size_t t = 0; t < x.length(); ++t) {
    const Matrix d_rec = rec_scale * (out.reconstruction[t] - x.steps[t]);
    readout_grad.w.noalias() += d_rec * dec_top.h[t].transpose();
    readout_grad.b += d_rec.rowwise().sum();
    dh[t].noalias() = readout.w.transpose() * d_rec;
  }
  const auto dec_slots = detail::lstm_slots(w.layout, "decoder.");
  for (std::size_t k = dec_slots.size(); k-- > 0;) {
    const LstmParams p(base, *dec_slots[k]);
    LstmGrads g(gbase, *dec_slots[k]);
    if (k == 0) {
      Matrix dz;
      lstm_backward(p, out.cache.decoder[k], dh, g, nullptr, &dz);
      d_latent += dz;
    } else {
      std::vector<Matrix> dxs;
      lstm_backward(p, out.cache.decoder[k], dh, g, &dxs, nullptr);
      dh = std::move(dxs);
    }
  }

  // Encoder stack: only the last hidden state feeds the latent.
  const auto enc_slots = detail::lstm_slots(w.layout, "encoder.");
  std::vector<Matrix> dh_enc(x.length());
  dh_enc.back() = d_latent;
  for (std::size_t k = enc_slots.size(); k-- > 0;) {
    const LstmParams p(base, *enc_slots[k]);
    LstmGrads g(gbase, *enc_slots[k]);
    std::vector<Matrix> dxs;
    lstm_backward(p, out.cache.encoder[k], dh_enc, g, k > 0 ? &dxs : nullptr, nullptr);
    if (k > 0) dh_enc = std::move(dxs);
  }
  return grad;
}

/// Outputs of the recurrent layers for a batch; constant while those layers are frozen.
struct RecurrentFeatures {
  Matrix latent;                       // L x B
  std::vector<Matrix> decoder_hidden;  // per step, H x B (top decoder layer)

  /// Columns `idx` of every matrix.
  RecurrentFeatures select(const std::vector<Eigen::Index>& idx) const {
    RecurrentFeatures r;
    r.latent = latent(Eigen::all, idx);
    for (const auto& h : decoder_hidden) r.decoder_hidden.push_back(h(Eigen::all, idx));
    return r;
  }
};

inline RecurrentFeatures recurrent_features(const NetworkWeights& w, const SequenceBatch& x) {
  CompositeOutput out = composite_forward(w, x);
  RecurrentFeatures f;
  f.latent = out.cache.head.outputs.front();
  f.decoder_hidden = std::move(out.cache.decoder.back().h);
  return f;
}

/// Gradient restricted to the dense layers (readout and head), given cached
/// recurrent features. Recurrent-layer entries are zero.
inline Vector dense_gradient(const NetworkWeights& w, const RecurrentFeatures& f, const SequenceBatch& x,
                             const Matrix& targets, double lambda_rec, double* loss_out = nullptr) {
  const double* base = w.params.data();
  Vector grad = Vector::Zero(w.params.size());
  double* gbase = grad.data();
  const double b = static_cast<double>(x.batch());
  const auto head_slots = detail::slots_with_prefix(w.layout, "head.");
  const DenseCache head = dense_stack_forward(base, head_slots, f.latent, detail::kHeadHidden, detail::kHeadOut);
  const Matrix& pred = head.outputs.back();
  const Matrix d_pred = 2.0 * (pred - targets) / (static_cast<double>(targets.rows()) * b);
  dense_stack_backward(base, head_slots, head, d_pred, detail::kHeadHidden, detail::kHeadOut, gbase);

  const LayerSlot& readout_slot = w.layout.find("decoder.out");
  const DenseParams readout(base, readout_slot);
  DenseGrads readout_grad(gbase, readout_slot);
  const double rec_norm = static_cast<double>(x.length() * x.features());
  double rec = 0.0;
  for (std::size_t t = 0; t < x.length(); ++t) {
    const Matrix diff = dense_apply(readout, f.decoder_hidden[t], Activation::Identity) - x.steps[t];
    rec += diff.squaredNorm();
    const Matrix d_rec = (2.0 * lambda_rec / (rec_norm * b)) * diff;
    readout_grad.w.noalias() += d_rec * f.decoder_hidden[t].transpose();
    readout_grad.b += d_rec.rowwise().sum();
  }
  if (loss_out)
    *loss_out = ((pred - targets).squaredNorm() / static_cast<double>(targets.rows()) + lambda_rec * rec / rec_norm) / b;
  return grad;
}

}  // namespace mangen::nn
