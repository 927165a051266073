#pragma once

#include <unordered_set>
#include <vector>

#include "mangen/nn/spec.hpp"

namespace mangen::rl {

using nn::Matrix;
using nn::Vector;

struct Transition {
  Vector obs;
  Vector action;  // RL action before scaling, in [-1, 1]
  double reward = 0.0;
  Vector next_obs;
  bool done = false;
};

/// Column-stacked minibatch.
struct Minibatch {
  Matrix obs;
  Matrix action;
  Vector reward;
  Matrix next_obs;
  Vector done;

  Eigen::Index size() const { return obs.cols(); }
};

/// Fixed-capacity FIFO of transitions.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity, std::size_t warmup = 0) : capacity_(capacity), warmup_(warmup) {
    require(capacity >= 1, ErrorKind::InvalidArgument, "replay capacity must be >= 1");
    data_.reserve(std::min<std::size_t>(capacity, 1u << 16));
  }

  void push(Transition t) {
    if (data_.size() < capacity_) {
      data_.push_back(std::move(t));
    } else {
      data_[head_] = std::move(t);
      head_ = (head_ + 1) % capacity_;
    }
  }

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t warmup() const { return warmup_; }
  bool ready(std::size_t k) const { return data_.size() >= std::max(warmup_, k); }

  /// Oldest-first access.
  const Transition& at(std::size_t i) const { return data_[(head_ + i) % data_.size()]; }

  /// `k` distinct transitions chosen uniformly (Floyd's algorithm).
  Minibatch sample(std::size_t k, std::mt19937_64& rng) const {
    require(k >= 1, ErrorKind::InvalidArgument, "minibatch size must be >= 1");
    require(ready(k), ErrorKind::InsufficientFill,
            "replay holds " + std::to_string(data_.size()) + " transitions, needs " + std::to_string(std::max(warmup_, k)));
    const std::size_t n = data_.size();
    std::vector<std::size_t> picked;
    std::unordered_set<std::size_t> seen;
    for (std::size_t j = n - k; j < n; ++j) {
      const auto t = static_cast<std::size_t>(nn::uniform01(rng) * static_cast<double>(j + 1));
      const std::size_t pick = seen.count(t) ? j : std::min(t, j);
      seen.insert(pick);
      picked.push_back(pick);
    }
    const Transition& first = data_[picked.front()];
    Minibatch b;
    b.obs.resize(first.obs.size(), static_cast<Eigen::Index>(k));
    b.action.resize(first.action.size(), static_cast<Eigen::Index>(k));
    b.next_obs.resize(first.next_obs.size(), static_cast<Eigen::Index>(k));
    b.reward.resize(static_cast<Eigen::Index>(k));
    b.done.resize(static_cast<Eigen::Index>(k));
    for (std::size_t c = 0; c < k; ++c) {
      const Transition& t = data_[picked[c]];
      const auto col = static_cast<Eigen::Index>(c);
      b.obs.col(col) = t.obs;
      b.action.col(col) = t.action;
      b.next_obs.col(col) = t.next_obs;
      b.reward[col] = t.reward;
      b.done[col] = t.done ? 1.0 : 0.0;
    }
    return b;
  }

 private:
  std::size_t capacity_;
  std::size_t warmup_;
  std::size_t head_ = 0;
  std::vector<Transition> data_;
};

}  // namespace mangen::rl
