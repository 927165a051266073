#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "mangen/nn/adam.hpp"
#include "mangen/nn/composite.hpp"
#include "mangen/nn/mlp.hpp"

using namespace mangen;
using namespace mangen::nn;
namespace fs = std::filesystem;

namespace {

// Small enough for finite differences, large enough for >= 200 parameters of each layer kind.
NetworkSpec small_spec() {
  NetworkSpec s;
  s.window = 6;
  s.features = 5;
  s.encoder = {7, 6};
  s.decoder = {5, 4};
  s.head = {16, 4};
  return s;
}

struct Batch {
  SequenceBatch x;
  Matrix targets;
};

Batch random_batch(const NetworkSpec& s, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Matrix> wins;
  for (int b = 0; b < n; ++b) {
    Matrix m(s.window, s.features);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform01(rng);
    wins.push_back(m);
  }
  Matrix tg(s.head.back(), n);
  for (Eigen::Index i = 0; i < tg.size(); ++i) tg.data()[i] = uniform01(rng);
  return {SequenceBatch::from_windows(wins), tg};
}

double relative_error(double fd, double g) {
  // Floored so parameters with vanishing gradients do not blow up the ratio.
  return std::abs(fd - g) / std::max({1e-6, std::abs(fd), std::abs(g)});
}

fs::path temp_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("mangen_test_nn_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST(Forward, ShapesAndRange) {
  const auto s = small_spec();
  const auto w = NetworkWeights::initialize(s, 1);
  Matrix win = Matrix::Constant(s.window, s.features, 0.3);
  const auto out = forward(w, win);
  ASSERT_EQ(out.prediction.size(), 4);
  EXPECT_EQ(out.reconstruction.rows(), s.window);
  EXPECT_EQ(out.reconstruction.cols(), s.features);
  for (Eigen::Index i = 0; i < 4; ++i) {
    EXPECT_GT(out.prediction[i], 0.0);
    EXPECT_LT(out.prediction[i], 1.0);
  }
}

TEST(Forward, DeterministicForSameSeed) {
  const auto s = small_spec();
  const auto a = NetworkWeights::initialize(s, 7), b = NetworkWeights::initialize(s, 7);
  EXPECT_EQ(a.params, b.params);
  const Matrix win = Matrix::Constant(s.window, s.features, 0.6);
  EXPECT_EQ(forward(a, win).prediction, forward(b, win).prediction);
  EXPECT_NE(NetworkWeights::initialize(s, 8).params, a.params);
}

TEST(Forward, WrongWindowShapeRejected) {
  const auto w = NetworkWeights::initialize(small_spec(), 1);
  try {
    forward(w, Matrix::Zero(5, 5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ShapeMismatch);
  }
}

TEST(Loss, Examples) {
  const Vector a = Vector::Constant(4, 0.5);
  const Matrix r = Matrix::Constant(3, 2, 0.2);
  EXPECT_DOUBLE_EQ(loss(a, r, a, r, 0.5), 0.0);
  // prediction off by 0.1 everywhere, reconstruction exact
  EXPECT_NEAR(loss(a, r, Vector::Constant(4, 0.6), r, 0.5), 0.01, 1e-15);
  // reconstruction off by c everywhere contributes lambda * c^2
  const double c = 0.3;
  EXPECT_NEAR(loss(a, r, a, Matrix::Constant(3, 2, 0.2 + c), 1.0), c * c, 1e-15);
  EXPECT_NEAR(loss(a, r, a, Matrix::Constant(3, 2, 0.2 + c), 0.5), 0.5 * c * c, 1e-15);
}

TEST(Loss, BatchLossMatchesSingleWindowLoss) {
  const auto s = small_spec();
  const auto w = NetworkWeights::initialize(s, 2);
  const auto b = random_batch(s, 1, 3);
  const Matrix win = [&] {
    Matrix m(s.window, s.features);
    for (int t = 0; t < s.window; ++t) m.row(t) = b.x.steps[static_cast<std::size_t>(t)].col(0).transpose();
    return m;
  }();
  const auto o = forward(w, win);
  EXPECT_NEAR(batch_loss(composite_forward(w, b.x), b.x, b.targets, 0.5),
              loss(o.prediction, o.reconstruction, b.targets.col(0), win, 0.5), 1e-14);
}

TEST(Gradient, MatchesFiniteDifferencesPerLayerKind) {
  const auto s = small_spec();
  const auto w = NetworkWeights::initialize(s, 3);
  const auto b = random_batch(s, 3, 1);
  const Vector g = gradient(w, b.x, b.targets, 0.5);
  std::mt19937_64 rng(11);
  for (bool recurrent : {true, false}) {
    std::vector<Eigen::Index> idx;
    for (const auto& sl : w.layout.slots)
      if (sl.recurrent() == recurrent)
        for (std::size_t i = 0; i < sl.count; ++i) idx.push_back(static_cast<Eigen::Index>(sl.offset + i));
    ASSERT_GE(idx.size(), 200u);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(200);
    double worst = 0.0;
    for (Eigen::Index i : idx) {
      auto wp = w, wm = w;
      wp.params[i] += 1e-4;
      wm.params[i] -= 1e-4;
      const double lp = batch_loss(composite_forward(wp, b.x), b.x, b.targets, 0.5);
      const double lm = batch_loss(composite_forward(wm, b.x), b.x, b.targets, 0.5);
      worst = std::max(worst, relative_error((lp - lm) / 2e-4, g[i]));
    }
    EXPECT_LT(worst, 1e-4) << (recurrent ? "lstm" : "dense");
  }
}

TEST(Gradient, ReportsLossAndIsZeroAtPerfectFit) {
  NetworkSpec s = small_spec();
  auto w = NetworkWeights::initialize(s, 4);
  // Zero every weight: the reconstruction is exactly zero and the head outputs sigmoid(0).
  w.params.setZero();
  std::vector<Matrix> wins{Matrix::Zero(s.window, s.features)};
  const auto x = SequenceBatch::from_windows(wins);
  const Matrix tg = Matrix::Constant(4, 1, 0.5);
  double L = -1.0;
  const Vector g = gradient(w, x, tg, 0.5, &L);
  EXPECT_DOUBLE_EQ(L, 0.0);
  EXPECT_DOUBLE_EQ(g.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Gradient, DuplicatedBatchEqualsSingleSample) {
  const auto s = small_spec();
  const auto w = NetworkWeights::initialize(s, 5);
  const auto one = random_batch(s, 1, 9);
  std::vector<Matrix> wins;
  Matrix m(s.window, s.features);
  for (int t = 0; t < s.window; ++t) m.row(t) = one.x.steps[static_cast<std::size_t>(t)].col(0).transpose();
  wins = {m, m, m};
  const auto three = SequenceBatch::from_windows(wins);
  Matrix tg(4, 3);
  tg << one.targets, one.targets, one.targets;
  const Vector g1 = gradient(w, one.x, one.targets, 0.5), g3 = gradient(w, three, tg, 0.5);
  EXPECT_LT((g1 - g3).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Gradient, DenseFastPathMatchesFullGradient) {
  const auto s = small_spec();
  const auto w = NetworkWeights::initialize(s, 6);
  const auto b = random_batch(s, 4, 2);
  const Vector full = gradient(w, b.x, b.targets, 0.5);
  const Vector fast = dense_gradient(w, recurrent_features(w, b.x), b.x, b.targets, 0.5);
  for (const auto& sl : w.layout.slots) {
    for (std::size_t i = 0; i < sl.count; ++i) {
      const auto k = static_cast<Eigen::Index>(sl.offset + i);
      if (sl.recurrent())
        ASSERT_EQ(fast[k], 0.0);
      else
        ASSERT_NEAR(fast[k], full[k], 1e-12);
    }
  }
}

TEST(Adam, FullyFrozenLeavesParametersBitIdentical) {
  Vector p = Vector::LinSpaced(10, -1.0, 1.0);
  const Vector before = p;
  auto st = AdamState::for_size(10, 1e-3);
  adam_step(p, Vector::Ones(10), st, FreezeMask(10, true));
  EXPECT_EQ(p, before);
  EXPECT_EQ(st.m, Vector::Zero(10));
}

TEST(Adam, ZeroGradientIsNoOp) {
  Vector p = Vector::LinSpaced(10, -1.0, 1.0);
  const Vector before = p;
  auto st = AdamState::for_size(10, 1e-3);
  adam_step(p, Vector::Zero(10), st);
  EXPECT_EQ(p, before);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Vector p = Vector::Zero(3);
  auto st = AdamState::for_size(3, 1e-3);
  Vector g(3);
  g << 2.0, -0.5, 1e-3;
  adam_step(p, g, st);
  EXPECT_NEAR(p[0], -1e-3, 1e-9);
  EXPECT_NEAR(p[1], 1e-3, 1e-9);
  EXPECT_NEAR(p[2], -1e-3, 1e-8);
}

TEST(Adam, PartialMaskFreezesOnlyMaskedEntries) {
  Vector p = Vector::Ones(4);
  auto st = AdamState::for_size(4, 0.1);
  FreezeMask mask{true, false, true, false};
  adam_step(p, Vector::Ones(4), st, mask);
  EXPECT_EQ(p[0], 1.0);
  EXPECT_EQ(p[2], 1.0);
  EXPECT_LT(p[1], 1.0);
  EXPECT_LT(p[3], 1.0);
}

TEST(Checkpoint, RoundTripIsExact) {
  const auto dir = temp_dir("roundtrip");
  const auto s = small_spec();
  const auto w = NetworkWeights::initialize(s, 12);
  save(w, dir / "w.ckpt");
  const auto r = load(dir / "w.ckpt", s);
  EXPECT_EQ(r.params, w.params);
  EXPECT_FALSE(fs::exists(dir / "w.ckpt.tmp"));
}

TEST(Checkpoint, WrongSpecRejected) {
  const auto dir = temp_dir("spec");
  const auto s = small_spec();
  save(NetworkWeights::initialize(s, 1), dir / "w.ckpt");
  auto other = s;
  other.head = {8, 4};
  try {
    load(dir / "w.ckpt", other);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SpecMismatch);
  }
}

TEST(Checkpoint, TruncationAndCorruptionDetected) {
  const auto w = NetworkWeights::initialize(small_spec(), 1);
  const std::string bytes = checkpoint::encode(w.spec_hash(), w.params);
  auto expect_corrupt = [](const std::string& b) {
    try {
      checkpoint::decode(b);
      ADD_FAILURE() << "decode accepted damaged bytes";
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::CorruptCheckpoint);
    }
  };
  expect_corrupt(bytes.substr(0, bytes.size() / 2));
  expect_corrupt(bytes.substr(0, 10));
  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x01;
  expect_corrupt(flipped);
  std::string magic = bytes;
  magic[0] = 'X';
  expect_corrupt(magic);
  EXPECT_EQ(checkpoint::decode(bytes).params, w.params);
}

TEST(Mlp, BackwardMatchesFiniteDifferences) {
  MlpSpec spec;
  spec.inputs = 5;
  spec.hidden = {12, 9};
  spec.outputs = 3;
  spec.hidden_act = Activation::Relu;
  spec.out_act = Activation::Tanh;
  std::mt19937_64 rng(4);
  const auto m = Mlp::initialize(spec, rng);
  Matrix x(5, 4);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = uniform(rng, -1.0, 1.0);
  // L = 0.5 * ||y||^2 so dL/dy = y
  auto L = [&](const Mlp& n) { return 0.5 * n.forward(x).squaredNorm(); };
  const auto cache = m.forward_cache(x);
  Vector g;
  m.backward(cache, cache.outputs.back(), &g);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < m.params.size(); ++i) {
    auto mp = m, mm = m;
    mp.params[i] += 1e-6;
    mm.params[i] -= 1e-6;
    worst = std::max(worst, relative_error((L(mp) - L(mm)) / 2e-6, g[i]));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Mlp, FinalScaleShrinksOutputLayer) {
  MlpSpec spec;
  spec.inputs = 4;
  spec.hidden = {8};
  spec.outputs = 2;
  std::mt19937_64 a(1), b(1);
  const auto full = Mlp::initialize(spec, a, 1.0), small = Mlp::initialize(spec, b, 1e-3);
  const auto& out = full.layout.find("out");
  for (std::size_t i = 0; i < out.count; ++i) {
    const auto k = static_cast<Eigen::Index>(out.offset + i);
    EXPECT_NEAR(small.params[k], full.params[k] * 1e-3, 1e-15);
  }
}
