#pragma once

#include <functional>
#include <limits>

#include "mangen/imitation/dataset.hpp"
#include "mangen/nn/adam.hpp"
#include "mangen/nn/composite.hpp"

namespace mangen::imitation {

struct TrainConfig {
  int epochs = 20;
  int batch = 64;
  double lr = 1e-3;
  double lambda_rec = 0.5;
  std::uint64_t seed = 0;
  /// Caps minibatches per epoch (0 = the whole training split).
  int max_batches_per_epoch = 0;
  /// Clips the global gradient norm (0 = off).
  double clip_norm = 0.0;

  void validate() const {
    require(epochs >= 1 && batch >= 1, ErrorKind::InvalidArgument, "epochs and batch must be >= 1");
    require(lr > 0.0 && lambda_rec >= 0.0, ErrorKind::InvalidArgument, "lr must be > 0 and lambda_rec >= 0");
    require(max_batches_per_epoch >= 0 && clip_norm >= 0.0, ErrorKind::InvalidArgument, "negative training budget");
  }
};

struct TrainResult {
  nn::NetworkWeights weights;  // best validation loss
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  int best_epoch = -1;
  double best_validation = std::numeric_limits<double>::infinity();
};

using EpochCallback = std::function<void(int epoch, double train_loss, double validation_loss)>;

/// Mean composite loss over windows `starts`, evaluated in chunks.
inline double evaluate_loss(const nn::NetworkWeights& w, const Dataset& ds, const std::vector<Eigen::Index>& starts,
                            double lambda_rec, std::size_t chunk = 256) {
  if (starts.empty()) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  for (std::size_t i = 0; i < starts.size(); i += chunk) {
    const std::vector<Eigen::Index> part(starts.begin() + static_cast<std::ptrdiff_t>(i),
                                         starts.begin() + static_cast<std::ptrdiff_t>(std::min(starts.size(), i + chunk)));
    const auto x = nn::SequenceBatch::gather(ds.features, part, w.spec.window);
    const auto out = nn::composite_forward(w, x);
    sum += nn::batch_loss(out, x, window_targets(ds, part, w.spec.window), lambda_rec) * static_cast<double>(part.size());
  }
  return sum / static_cast<double>(starts.size());
}

namespace detail {

inline void shuffle(std::vector<Eigen::Index>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = std::min(static_cast<std::size_t>(nn::uniform01(rng) * static_cast<double>(i)), i - 1);
    std::swap(v[i - 1], v[j]);
  }
}

inline void clip(Vector& g, double max_norm) {
  if (max_norm <= 0.0) return;
  const double n = g.norm();
  if (n > max_norm) g *= max_norm / n;
}

}  // namespace detail

/// Minibatch Adam on the composite loss, starting from `init`. Keeps the
/// weights with the lowest validation loss (training loss when the
/// validation split is empty).
inline TrainResult train(const nn::NetworkWeights& init, const Dataset& ds, const WindowedDataset& windows,
                         const TrainConfig& cfg, const nn::FreezeMask* mask = nullptr, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  require(!windows.train.empty(), ErrorKind::InvalidArgument, "training split is empty");
  require(windows.window == init.spec.window, ErrorKind::ShapeMismatch, "window length differs from network spec");
  const nn::FreezeMask free_mask = nn::no_freeze(init.size());
  const nn::FreezeMask& m = mask ? *mask : free_mask;
  require(m.size() == init.size(), ErrorKind::LengthMismatch, "freeze mask length differs from parameter count");

  TrainResult res;
  res.weights = init;
  nn::NetworkWeights w = init;
  nn::AdamState adam = nn::AdamState::for_size(w.size(), cfg.lr);
  std::mt19937_64 rng(cfg.seed);
  std::vector<Eigen::Index> order = windows.train;
  const std::size_t bsz = static_cast<std::size_t>(cfg.batch);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    detail::shuffle(order, rng);
    std::size_t n_batches = (order.size() + bsz - 1) / bsz;
    if (cfg.max_batches_per_epoch > 0) n_batches = std::min(n_batches, static_cast<std::size_t>(cfg.max_batches_per_epoch));
    double train_sum = 0.0;
    std::size_t train_count = 0;
    for (std::size_t b = 0; b < n_batches; ++b) {
      const std::vector<Eigen::Index> part(order.begin() + static_cast<std::ptrdiff_t>(b * bsz),
                                           order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), (b + 1) * bsz)));
      const auto x = nn::SequenceBatch::gather(ds.features, part, w.spec.window);
      double loss = 0.0;
      Vector g = nn::gradient(w, x, window_targets(ds, part, w.spec.window), cfg.lambda_rec, &loss);
      require(g.allFinite() && std::isfinite(loss), ErrorKind::NumericalDivergence, "non-finite loss during training");
      detail::clip(g, cfg.clip_norm);
      nn::adam_step(w.params, g, adam, m);
      train_sum += loss * static_cast<double>(part.size());
      train_count += part.size();
    }
    const double train_loss = train_sum / static_cast<double>(train_count);
    const double val_loss =
        windows.validation.empty() ? train_loss : evaluate_loss(w, ds, windows.validation, cfg.lambda_rec);
    res.train_loss.push_back(train_loss);
    res.validation_loss.push_back(val_loss);
    if (val_loss < res.best_validation) {
      res.best_validation = val_loss;
      res.best_epoch = epoch;
      res.weights = w;
    }
    if (on_epoch) on_epoch(epoch, train_loss, val_loss);
  }
  return res;
}

/// Behavior cloning from freshly initialized weights.
inline TrainResult train_bc(const Dataset& ds, const WindowedDataset& windows, const nn::NetworkSpec& spec,
                            const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
  return train(nn::NetworkWeights::initialize(spec, cfg.seed), ds, windows, cfg, nullptr, on_epoch);
}

}  // namespace mangen::imitation
