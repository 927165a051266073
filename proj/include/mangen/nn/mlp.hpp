#pragma once

#include <filesystem>

#include "mangen/nn/checkpoint.hpp"
#include "mangen/nn/dense.hpp"

namespace mangen::nn {

struct MlpSpec {
  int inputs = 1;
  std::vector<int> hidden{64, 64};
  int outputs = 1;
  Activation hidden_act = Activation::Relu;
  Activation out_act = Activation::Identity;

  std::string canonical() const {
    std::ostringstream os;
    os << "mlp/v1;in=" << inputs << ";hidden=";
    for (std::size_t i = 0; i < hidden.size(); ++i) os << (i ? "," : "") << hidden[i];
    os << ";out=" << outputs << ";act=" << static_cast<int>(hidden_act) << "," << static_cast<int>(out_act);
    return os.str();
  }
  std::uint64_t hash() const { return fnv1a(canonical()); }
};

/// Plain feed-forward network over a flat parameter vector.
struct Mlp {
  MlpSpec spec;
  Layout layout;
  Vector params;

  /// Uniform(+-1/sqrt(fan_in)) init; the output layer is scaled by `final_scale`.
  static Mlp initialize(const MlpSpec& spec, std::mt19937_64& rng, double final_scale = 1.0) {
    require(spec.inputs >= 1 && spec.outputs >= 1, ErrorKind::ShapeMismatch, "mlp needs inputs and outputs");
    Mlp m;
    m.spec = spec;
    int in = spec.inputs;
    for (std::size_t i = 0; i < spec.hidden.size(); ++i) {
      require(spec.hidden[i] >= 1, ErrorKind::ShapeMismatch, "layer sizes must be >= 1");
      m.layout.add("dense" + std::to_string(i), LayerKind::Dense, in, spec.hidden[i]);
      in = spec.hidden[i];
    }
    m.layout.add("out", LayerKind::Dense, in, spec.outputs);
    m.params.resize(static_cast<Eigen::Index>(m.layout.size));
    for (std::size_t k = 0; k < m.layout.slots.size(); ++k) {
      const auto& slot = m.layout.slots[k];
      double bound = 1.0 / std::sqrt(static_cast<double>(slot.fan_in()));
      if (k + 1 == m.layout.slots.size()) bound *= final_scale;
      for (std::size_t i = 0; i < slot.count; ++i)
        m.params[static_cast<Eigen::Index>(slot.offset + i)] = uniform(rng, -bound, bound);
    }
    return m;
  }

  std::vector<const LayerSlot*> slots() const {
    std::vector<const LayerSlot*> out;
    for (const auto& s : layout.slots) out.push_back(&s);
    return out;
  }

  DenseCache forward_cache(const Matrix& x) const {
    require(x.rows() == spec.inputs, ErrorKind::ShapeMismatch, "mlp input size mismatch");
    return dense_stack_forward(params.data(), slots(), x, spec.hidden_act, spec.out_act);
  }

  Matrix forward(const Matrix& x) const { return forward_cache(x).outputs.back(); }

  /// Accumulates parameter gradients into `grad` (when non-null); returns dL/dx.
  Matrix backward(const DenseCache& cache, const Matrix& d_out, Vector* grad) const {
    if (grad && grad->size() != params.size()) *grad = Vector::Zero(params.size());
    return dense_stack_backward(params.data(), slots(), cache, d_out, spec.hidden_act, spec.out_act,
                                grad ? grad->data() : nullptr);
  }
};

inline void save(const Mlp& m, const std::filesystem::path& path) {
  checkpoint::write_atomic(path, checkpoint::encode(m.spec.hash(), m.params));
}

inline void load_into(Mlp& m, const std::filesystem::path& path) {
  const auto d = checkpoint::decode(checkpoint::read_file(path));
  require(d.spec_hash == m.spec.hash() && d.params.size() == m.params.size(), ErrorKind::SpecMismatch,
          "checkpoint " + path.string() + " does not match the network");
  m.params = d.params;
}

}  // namespace mangen::nn
