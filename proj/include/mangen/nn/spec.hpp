#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mangen/core.hpp"

namespace mangen::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Uniform double in [0, 1) from the top 53 bits; reproducible across standard libraries.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

/// Standard normal via Box-Muller on uniform01, again for cross-library reproducibility.
inline double standard_normal(std::mt19937_64& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

/// Composite recurrent autoencoder: encoder LSTM stack compresses a W x F
/// window into the last encoder hidden state (the latent); a decoder LSTM
/// stack fed the repeated latent reconstructs the window through a linear
/// readout; a dense head maps the latent to the saturated action.
struct NetworkSpec {
  int window = 50;
  int features = 18;
  std::vector<int> encoder{64};
  std::vector<int> decoder{64};
  std::vector<int> head{64, 32, 4};

  int outputs() const { return head.empty() ? 0 : head.back(); }
  int latent_size() const { return encoder.empty() ? 0 : encoder.back(); }

  void validate() const {
    require(window >= 1 && features >= 1, ErrorKind::ShapeMismatch, "window and feature count must be >= 1");
    require(!encoder.empty() && !decoder.empty() && !head.empty(), ErrorKind::ShapeMismatch,
            "encoder, decoder and head need at least one layer");
    for (int n : encoder) require(n >= 1, ErrorKind::ShapeMismatch, "layer sizes must be >= 1");
    for (int n : decoder) require(n >= 1, ErrorKind::ShapeMismatch, "layer sizes must be >= 1");
    for (int n : head) require(n >= 1, ErrorKind::ShapeMismatch, "layer sizes must be >= 1");
    require(outputs() == 4, ErrorKind::ShapeMismatch, "prediction head must end in 4 outputs");
  }

  std::string canonical() const {
    std::ostringstream os;
    auto list = [&](const std::vector<int>& v) {
      for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    };
    os << "composite-lstm-ae/v1;W=" << window << ";F=" << features << ";enc=";
    list(encoder);
    os << ";dec=";
    list(decoder);
    os << ";head=";
    list(head);
    return os.str();
  }

  std::uint64_t hash() const { return fnv1a(canonical()); }

  bool operator==(const NetworkSpec&) const = default;
};

enum class LayerKind { Lstm, Dense };

/// Location of one layer inside the flat parameter vector.
/// LSTM: Wx (4H x in), Wh (4H x H), b (4H), gate order [input, forget, output, candidate].
/// Dense: W (out x in), b (out). Matrices are column-major.
struct LayerSlot {
  std::string name;
  LayerKind kind = LayerKind::Dense;
  int in = 0;
  int out = 0;
  std::size_t offset = 0;
  std::size_t count = 0;

  bool recurrent() const { return kind == LayerKind::Lstm; }
  int fan_in() const { return recurrent() ? in + out : in; }
};

inline std::size_t lstm_parameter_count(int in, int hidden) {
  return 4 * static_cast<std::size_t>(hidden) * static_cast<std::size_t>(in + hidden + 1);
}

inline std::size_t dense_parameter_count(int in, int out) {
  return static_cast<std::size_t>(out) * static_cast<std::size_t>(in + 1);
}

struct Layout {
  std::vector<LayerSlot> slots;
  std::size_t size = 0;

  void add(std::string name, LayerKind kind, int in, int out) {
    const std::size_t n = kind == LayerKind::Lstm ? lstm_parameter_count(in, out) : dense_parameter_count(in, out);
    slots.push_back({std::move(name), kind, in, out, size, n});
    size += n;
  }

  const LayerSlot& find(const std::string& name) const {
    for (const auto& s : slots)
      if (s.name == name) return s;
    fail(ErrorKind::ShapeMismatch, "no layer named '" + name + "'");
  }

  static Layout build(const NetworkSpec& spec) {
    spec.validate();
    Layout l;
    int in = spec.features;
    for (std::size_t i = 0; i < spec.encoder.size(); ++i) {
      l.add("encoder.lstm" + std::to_string(i), LayerKind::Lstm, in, spec.encoder[i]);
      in = spec.encoder[i];
    }
    const int latent = spec.latent_size();
    in = latent;
    for (std::size_t i = 0; i < spec.decoder.size(); ++i) {
      l.add("decoder.lstm" + std::to_string(i), LayerKind::Lstm, in, spec.decoder[i]);
      in = spec.decoder[i];
    }
    l.add("decoder.out", LayerKind::Dense, in, spec.features);
    in = latent;
    for (std::size_t i = 0; i < spec.head.size(); ++i) {
      l.add("head.dense" + std::to_string(i), LayerKind::Dense, in, spec.head[i]);
      in = spec.head[i];
    }
    return l;
  }
};

/// Flat parameter vector plus the layout that gives it structure.
struct NetworkWeights {
  NetworkSpec spec;
  Layout layout;
  Vector params;

  std::uint64_t spec_hash() const { return spec.hash(); }
  std::size_t size() const { return static_cast<std::size_t>(params.size()); }

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every parameter, seeded.
  static NetworkWeights initialize(const NetworkSpec& spec, std::uint64_t seed) {
    NetworkWeights w;
    w.spec = spec;
    w.layout = Layout::build(spec);
    w.params.resize(static_cast<Eigen::Index>(w.layout.size));
    std::mt19937_64 rng(seed);
    for (const auto& slot : w.layout.slots) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(slot.fan_in()));
      for (std::size_t i = 0; i < slot.count; ++i)
        w.params[static_cast<Eigen::Index>(slot.offset + i)] = uniform(rng, -bound, bound);
    }
    return w;
  }

  bool all_finite() const { return params.allFinite(); }
};

}  // namespace mangen::nn
