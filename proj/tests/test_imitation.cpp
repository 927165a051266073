#include <gtest/gtest.h>

#include "mangen/imitation/dagger.hpp"

using namespace mangen;
using namespace mangen::imitation;

namespace {

const flight::AircraftParams kParams;

expert::Demonstration splits_demo(std::size_t samples, double vt = 750, double alt = 15000) {
  return expert::run_expert(vt, alt, expert::reference_profile(expert::Maneuver::SplitS, {}, samples, 0.02), kParams);
}

nn::NetworkSpec tiny_spec(int window) {
  nn::NetworkSpec s;
  s.window = window;
  s.features = kFeatureCount;
  s.encoder = {16};
  s.decoder = {16};
  s.head = {16, 4};
  return s;
}

expert::Demonstration constant_error_demo(std::size_t n, expert::Rates err, std::size_t planned = 0) {
  expert::Demonstration d;
  d.dt = 0.02;
  d.planned_length = planned ? planned : n;
  for (std::size_t k = 0; k < n; ++k) {
    expert::DemoSample s;
    s.reference = {0.5, -0.2, 0.1};
    s.state.p = 0.5 - err[0];
    s.state.q = -0.2 - err[1];
    s.state.r = 0.1 - err[2];
    d.samples.push_back(s);
  }
  return d;
}

}  // namespace

TEST(Dataset, RowsAndNormalizedRange) {
  const auto ds = build_dataset({splits_demo(705)});
  EXPECT_EQ(ds.rows(), 705);
  EXPECT_EQ(ds.features.rows(), kFeatureCount);
  for (Eigen::Index i = 0; i < ds.features.rows(); ++i) {
    if (ds.stats.constant[static_cast<std::size_t>(i)]) continue;
    EXPECT_NEAR(ds.features.row(i).minCoeff(), 0.0, 1e-12) << feature_names()[static_cast<std::size_t>(i)];
    EXPECT_NEAR(ds.features.row(i).maxCoeff(), 1.0, 1e-12) << feature_names()[static_cast<std::size_t>(i)];
  }
}

TEST(Dataset, OffDistributionSamplesClipToUnitRange) {
  auto ds = build_dataset({splits_demo(300)});
  auto other = splits_demo(300, 900, 20000);
  EXPECT_GT(ds.stats.scale(detail::raw_features(other, 32.17)).maxCoeff(), 1.0);
  append(ds, {other});
  EXPECT_GE(ds.features.minCoeff(), 0.0);
  EXPECT_LE(ds.features.maxCoeff(), 1.0);
}

TEST(Dataset, EmptyAndInconsistentDtRejected) {
  try {
    build_dataset({});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyDemos);
  }
  auto a = splits_demo(120), b = splits_demo(120, 700, 12000);
  b.dt = 0.01;
  try {
    build_dataset({a, b});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InconsistentDt);
  }
}

TEST(Windows, CountAndTargets) {
  const auto ds = build_dataset({splits_demo(705)});
  const auto starts = window_starts(ds, 50);
  ASSERT_EQ(starts.size(), 655u);
  EXPECT_EQ(starts[1] - starts[0], 1);  // consecutive windows overlap in W-1 samples
  const Matrix t = window_targets(ds, {starts[3]}, 50);
  EXPECT_EQ(t.col(0), ds.targets.col(starts[3] + 50));
}

TEST(Windows, NeverCrossDemoBoundaries) {
  const auto ds = build_dataset({splits_demo(200), splits_demo(150, 700, 12000)});
  EXPECT_EQ(window_starts(ds, 50).size(), 150u + 100u);
  for (Eigen::Index s : window_starts(ds, 50)) EXPECT_TRUE(s + 50 < 200 || s >= 200);
}

TEST(Windows, SplitSeventyTwentyFiveFive) {
  Dataset ds;
  ds.dt = 0.02;
  ds.segments = {{0, 1050, "synthetic"}};
  const auto w = make_windows(ds, 50, 1, 3);
  EXPECT_EQ(w.train.size(), 700u);
  EXPECT_EQ(w.validation.size(), 250u);
  EXPECT_EQ(w.test.size(), 50u);
  const auto again = make_windows(ds, 50, 1, 3);
  EXPECT_EQ(w.train, again.train);
}

TEST(Windows, ShortDemoRejected) {
  const auto ds = build_dataset({splits_demo(100)});
  try {
    window_starts(ds, 100);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DemoTooShort);
  }
}

TEST(Deltas, Examples) {
  flight::AircraftState x;
  x.p = 0.8;
  EXPECT_NEAR(deltas(x, {1.0, 0.0, 0.0})[0], 0.2, 1e-15);
  x.p = -0.8;
  EXPECT_NEAR(deltas(x, {-1.0, 0.0, 0.0})[0], 0.2, 1e-15);
  x = {};
  x.q = 0.3;
  x.r = -0.1;
  EXPECT_EQ(deltas(x, {0.0, 0.3, -0.1}), (Rates{0.0, 0.0, 0.0}));
}

TEST(SwitchingLambda, Examples) {
  const Rates ref{1.0, 0.4, 0.0};
  EXPECT_EQ(switching_lambda({0.0, 0.0, 0.0}, ref, 0.1), 1);
  // tau_P = 0.1 * 1.0 exactly
  EXPECT_EQ(switching_lambda({0.1, 0.0, 0.0}, ref, 0.1), 0);
  EXPECT_EQ(switching_lambda({0.09, 0.0, 0.0}, ref, 0.1), 1);
  // tau_Q = 0.04, Q above it
  EXPECT_EQ(switching_lambda({0.01, 0.05, 0.001}, ref, 0.1), 0);
  // zero reference uses the floor: tau_R = 0.1 * 0.05
  EXPECT_EQ(switching_lambda({0.0, 0.0, 0.004}, ref, 0.1), 1);
  EXPECT_EQ(switching_lambda({0.0, 0.0, 0.006}, ref, 0.1), 0);
}

TEST(SwitchingLambda, InvariantUnderSignFlip) {
  flight::AircraftState x, m;
  x.p = 0.7;
  x.q = -0.25;
  x.r = 0.02;
  m.p = -x.p;
  m.q = -x.q;
  m.r = -x.r;
  const Rates ref{0.8, -0.3, 0.0}, mref{-0.8, 0.3, 0.0};
  for (double cg : {0.05, 0.2, 0.5, 1.0})
    EXPECT_EQ(switching_lambda(deltas(x, ref), ref, cg), switching_lambda(deltas(m, mref), mref, cg));
}

TEST(EPqr, Examples) {
  EXPECT_EQ(e_pqr({constant_error_demo(100, {0.0, 0.0, 0.0})}), 0.0);
  EXPECT_NEAR(e_pqr({constant_error_demo(100, {0.3, 0.0, 0.0})}), 0.1, 1e-12);
  const double a = e_pqr({constant_error_demo(50, {0.3, 0.0, 0.0})});
  const double b = e_pqr({constant_error_demo(50, {0.0, 0.6, 0.3})});
  EXPECT_NEAR(e_pqr({constant_error_demo(50, {0.3, 0.0, 0.0}), constant_error_demo(50, {0.0, 0.6, 0.3})}), (a + b) / 2,
              1e-12);
}

TEST(EPqr, TruncatedRolloutPaddedWithWorstStep) {
  auto d = constant_error_demo(50, {0.3, 0.0, 0.0}, 100);
  d.samples.back().state.p = 0.5 - 0.9;  // last step error 0.3
  // 49 steps at 0.1, one at 0.3, 50 padded steps at 0.3
  EXPECT_NEAR(e_pqr({d}), (49 * 0.1 + 51 * 0.3) / 100.0, 1e-12);
}

TEST(Rollout, ExpertAsPolicyMatchesRunExpert) {
  const auto prof = expert::reference_profile(expert::Maneuver::SplitS, {}, 300, 0.02);
  const auto ref = expert::run_expert(750, 15000, prof, kParams);
  const auto tr = flight::trim(750, 15000, kParams);
  const auto ds = build_dataset({ref});
  const ExpertAsPolicy pol{expert::ExpertPolicy::at_trim(tr, kParams, {})};
  const auto r = rollout_policy(pol, 750, 15000, prof, kParams, ds.stats);
  ASSERT_EQ(r.demo.size(), ref.size());
  EXPECT_NEAR(e_pqr({r.demo}), e_pqr({ref}), 1e-9);
  for (int l : r.lambda) EXPECT_EQ(l, 1);
  EXPECT_EQ(r.lambda.size(), 300u - 50u);
}

TEST(Rollout, ZeroGainMixtureIsPureExpert) {
  const auto prof = expert::reference_profile(expert::Maneuver::SplitS, {}, 200, 0.02);
  const auto ds = build_dataset({expert::run_expert(750, 15000, prof, kParams)});
  const auto w = nn::NetworkWeights::initialize(tiny_spec(20), 1);
  RolloutOptions o;
  o.bootstrap = 20;
  o.confidence_gain = 0.0;
  const auto r = rollout_policy(NetworkPolicy{w, ds.stats}, 750, 15000, prof, kParams, ds.stats, o);
  ASSERT_EQ(r.lambda.size(), 180u);
  for (int l : r.lambda) EXPECT_EQ(l, 0);
  // the executed action is the expert label everywhere
  for (const auto& s : r.demo.samples) EXPECT_EQ(s.command, s.label);
}

TEST(Training, OverfitsSmallSetAndPicksBestEpoch) {
  const auto ds = build_dataset({splits_demo(240)});
  const auto all = window_starts(ds, 20, 1);
  WindowedDataset w;
  w.window = 20;
  w.train.assign(all.begin(), all.end());
  w.validation.assign(all.begin(), all.begin() + 40);
  TrainConfig tc;
  tc.epochs = 60;
  tc.batch = 32;
  tc.lr = 3e-3;
  tc.seed = 2;
  const auto r = train_bc(ds, w, tiny_spec(20), tc);
  ASSERT_EQ(r.train_loss.size(), 60u);
  EXPECT_LT(r.train_loss.back(), 0.1 * r.train_loss.front());
  EXPECT_LE(r.best_validation, r.validation_loss.front());
  EXPECT_EQ(r.best_validation, r.validation_loss[static_cast<std::size_t>(r.best_epoch)]);
  const auto again = train_bc(ds, w, tiny_spec(20), tc);
  EXPECT_EQ(again.weights.params, r.weights.params);
}

TEST(GainSearch, SingletonGridAndPerfectLearner) {
  Scenario sc;
  sc.samples = 100;
  const auto ds = build_dataset({expert::run_expert(750, 15000, sc.profile(), kParams)});
  const std::vector<TrimPoint> trims{{750, 15000}};
  const auto tr = flight::trim(750, 15000, kParams);
  const ExpertAsPolicy perfect{expert::ExpertPolicy::at_trim(tr, kParams, {})};
  EXPECT_EQ(confidence_gain_search(perfect, ds.stats, sc, trims, {0.2}, 50).c_g, 0.2);
  // loose enough that the expert's own tracking error never trips a threshold: every candidate ties
  const auto res = confidence_gain_search(perfect, ds.stats, sc, trims, {1.0, 0.8}, 50);
  EXPECT_EQ(res.lambda_sums[0], 50.0);
  EXPECT_EQ(res.lambda_sums[1], 50.0);
  EXPECT_EQ(res.c_g, 0.8);
}

TEST(GainSearch, ReturnsArgmaxOfLambdaSums) {
  const auto prof = expert::reference_profile(expert::Maneuver::SplitS, {}, 200, 0.02);
  const auto ds = build_dataset({expert::run_expert(750, 15000, prof, kParams)});
  Scenario sc;
  sc.samples = 200;
  const auto w = nn::NetworkWeights::initialize(tiny_spec(20), 3);
  const std::vector<double> grid{0.1, 0.5, 1.0};
  const auto res = confidence_gain_search(NetworkPolicy{w, ds.stats}, ds.stats, sc, {{750, 15000}, {700, 12000}}, grid, 20);
  const auto best = std::max_element(res.lambda_sums.begin(), res.lambda_sums.end());
  EXPECT_EQ(res.c_g, grid[static_cast<std::size_t>(best - res.lambda_sums.begin())]);
}

TEST(Dagger, SmallRunGrowsDatasetAndIsReproducible) {
  Scenario sc;
  sc.samples = 160;
  const auto demo = expert::run_expert(750, 15000, sc.profile(), kParams);
  auto ds = build_dataset({demo, expert::run_expert(700, 12000, sc.profile(), kParams)});
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch = 32;
  tc.seed = 1;
  const auto bc = train_bc(ds, make_windows(ds, 20, 1, 0), tiny_spec(20), tc);
  DaggerConfig dc;
  dc.eps_pqr = 1e-6;  // never converges: exercise the whole budget
  dc.max_iterations = 2;
  dc.grid = {0.2, 0.5};
  dc.trims = {{750, 15000}};
  dc.retrain = tc;
  std::vector<std::size_t> seen;
  const auto run = [&] {
    return c_dagger(bc.weights, ds, sc, dc, [&](const DaggerIteration& it, const nn::NetworkWeights&) {
      seen.push_back(it.dataset_rows);
    });
  };
  const auto r = run();
  EXPECT_TRUE(r.budget_exhausted);
  EXPECT_FALSE(r.converged);
  ASSERT_EQ(r.log.size(), 3u);
  EXPECT_LT(r.log[0].dataset_rows, r.log[1].dataset_rows);
  EXPECT_LT(r.log[1].dataset_rows, r.log[2].dataset_rows);
  EXPECT_EQ(seen.size(), 3u);
  const auto again = run();
  EXPECT_EQ(again.weights.params, r.weights.params);
  for (std::size_t i = 0; i < r.log.size(); ++i) {
    EXPECT_EQ(again.log[i].learner.pqr, r.log[i].learner.pqr);
    if (i < 2) {
      EXPECT_EQ(again.log[i].e_pqr, r.log[i].e_pqr);
    }
  }
}

TEST(Dagger, StopsWhenErrorBelowThreshold) {
  Scenario sc;
  sc.samples = 160;
  auto ds = build_dataset({expert::run_expert(750, 15000, sc.profile(), kParams)});
  DaggerConfig dc;
  dc.eps_pqr = 1e3;
  dc.trims = {{750, 15000}};
  const auto w = nn::NetworkWeights::initialize(tiny_spec(20), 1);
  const auto r = c_dagger(w, ds, sc, dc);
  EXPECT_TRUE(r.converged);
  ASSERT_EQ(r.log.size(), 1u);
  EXPECT_EQ(r.dataset.rows(), ds.rows());
}

TEST(Dagger, RejectsBadConfig) {
  DaggerConfig dc;
  dc.grid = {0.0};
  EXPECT_THROW(dc.validate(), Error);
  dc.grid = {0.2};
  dc.eps_pqr = 0.0;
  EXPECT_THROW(dc.validate(), Error);
}
