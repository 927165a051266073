#pragma once

#include <set>

#include "mangen/imitation/train.hpp"

namespace mangen::transfer {

using imitation::Dataset;
using imitation::NormStats;
using nn::FreezeMask;
using nn::Matrix;
using nn::Vector;
using nn::NetworkWeights;

/// Frozen for every parameter of the layers named in `layers`.
inline FreezeMask freeze_mask(const nn::Layout& layout, const std::set<std::string>& layers) {
  FreezeMask m(layout.size, false);
  for (const auto& name : layers) {
    const nn::LayerSlot& s = layout.find(name);
    std::fill(m.begin() + static_cast<std::ptrdiff_t>(s.offset), m.begin() + static_cast<std::ptrdiff_t>(s.offset + s.count), true);
  }
  return m;
}

inline std::set<std::string> recurrent_layers(const nn::Layout& layout) {
  std::set<std::string> names;
  for (const auto& s : layout.slots)
    if (s.recurrent()) names.insert(s.name);
  return names;
}

/// Freezes the encoder and decoder LSTM layers; dense layers stay trainable.
inline FreezeMask default_freeze_mask(const nn::NetworkSpec& spec) {
  const nn::Layout layout = nn::Layout::build(spec);
  return freeze_mask(layout, recurrent_layers(layout));
}

struct TransferConfig {
  /// Layer names to freeze; empty means every recurrent layer.
  std::set<std::string> freeze;
  double lr = 5e-5;
  int batch = 64;
  int epochs = 2000;
  double lambda_rec = 0.5;
  std::uint64_t seed = 0;
  /// Fraction of target windows held out to measure adaptation (0 = train on all).
  double holdout_fraction = 0.0;

  void validate() const {
    require(lr > 0.0 && batch >= 1 && epochs >= 1, ErrorKind::InvalidArgument, "lr, batch and epochs must be positive");
    require(holdout_fraction >= 0.0 && holdout_fraction < 1.0, ErrorKind::InvalidArgument, "holdout fraction must be in [0, 1)");
  }
};

struct TransferResult {
  NetworkWeights weights;
  std::vector<double> loss;          // training loss per epoch
  std::size_t windows = 0;           // total target windows
  std::size_t train_windows = 0;
  std::size_t frozen = 0;
  std::size_t trainable = 0;
  double holdout_before = std::numeric_limits<double>::quiet_NaN();
  double holdout_after = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline bool is_exactly_recurrent(const FreezeMask& mask, const nn::Layout& layout) {
  return mask == freeze_mask(layout, recurrent_layers(layout));
}

inline void shuffle(std::vector<Eigen::Index>& v, std::mt19937_64& rng) { imitation::detail::shuffle(v, rng); }

}  // namespace detail

/// Fine-tunes `source` on one target-aircraft demonstration, normalized with
/// the source stats. Frozen parameters are never written.
inline TransferResult fine_tune(const NetworkWeights& source, const expert::Demonstration& target_demo,
                                const NormStats& source_stats, const TransferConfig& cfg, double gravity = 32.17) {
  cfg.validate();
  const int w = source.spec.window;
  Dataset ds;
  ds.dt = target_demo.dt;
  ds.stats = source_stats;
  imitation::append(ds, {target_demo}, gravity);
  std::vector<Eigen::Index> starts = imitation::window_starts(ds, w);

  const FreezeMask mask = freeze_mask(source.layout, cfg.freeze.empty() ? recurrent_layers(source.layout) : cfg.freeze);
  TransferResult res;
  res.windows = starts.size();
  res.frozen = nn::frozen_count(mask);
  res.trainable = mask.size() - res.frozen;
  require(res.trainable > 0, ErrorKind::InvalidArgument, "freeze selection leaves nothing to train");

  std::mt19937_64 rng(cfg.seed);
  std::vector<Eigen::Index> holdout;
  if (cfg.holdout_fraction > 0.0) {
    detail::shuffle(starts, rng);
    const auto n_hold = static_cast<std::size_t>(std::llround(cfg.holdout_fraction * static_cast<double>(starts.size())));
    holdout.assign(starts.end() - static_cast<std::ptrdiff_t>(n_hold), starts.end());
    starts.resize(starts.size() - n_hold);
    std::sort(starts.begin(), starts.end());
  }
  res.train_windows = starts.size();
  require(!starts.empty(), ErrorKind::DemoTooShort, "no target windows left for training");
  if (!holdout.empty()) res.holdout_before = imitation::evaluate_loss(source, ds, holdout, cfg.lambda_rec);

  NetworkWeights weights = source;
  nn::AdamState adam = nn::AdamState::for_size(weights.size(), cfg.lr);
  const std::size_t bsz = static_cast<std::size_t>(cfg.batch);
  const bool cached = detail::is_exactly_recurrent(mask, source.layout);

  // With exactly the recurrent layers frozen their outputs never change, so
  // they are computed once and only the dense layers are trained.
  const nn::SequenceBatch all_x = nn::SequenceBatch::gather(ds.features, starts, w);
  const Matrix all_t = imitation::window_targets(ds, starts, w);
  nn::RecurrentFeatures features;
  if (cached) features = nn::recurrent_features(weights, all_x);

  std::vector<Eigen::Index> order(starts.size());
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    detail::shuffle(order, rng);
    double sum = 0.0;
    for (std::size_t b = 0; b * bsz < order.size(); ++b) {
      const std::vector<Eigen::Index> idx(order.begin() + static_cast<std::ptrdiff_t>(b * bsz),
                                          order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), (b + 1) * bsz)));
      nn::SequenceBatch x;
      for (const auto& step : all_x.steps) x.steps.push_back(step(Eigen::all, idx));
      const Matrix t = all_t(Eigen::all, idx);
      double loss = 0.0;
      const Vector g = cached ? nn::dense_gradient(weights, features.select(idx), x, t, cfg.lambda_rec, &loss)
                              : nn::gradient(weights, x, t, cfg.lambda_rec, &loss);
      require(g.allFinite(), ErrorKind::NumericalDivergence, "non-finite gradient during fine-tuning");
      nn::adam_step(weights.params, g, adam, mask);
      sum += loss * static_cast<double>(idx.size());
    }
    res.loss.push_back(sum / static_cast<double>(order.size()));
  }
  if (!holdout.empty()) res.holdout_after = imitation::evaluate_loss(weights, ds, holdout, cfg.lambda_rec);
  res.weights = std::move(weights);
  return res;
}

}  // namespace mangen::transfer
