#include <gtest/gtest.h>

#include <random>

#include "mangen/expert/run.hpp"
#include "mangen/imitation/rollout.hpp"

using namespace mangen;
using namespace mangen::expert;

TEST(Profile, SplitSLengthAndDuration) {
  const auto prof = reference_profile(Maneuver::SplitS, {}, 705, 0.02);
  EXPECT_EQ(prof.size(), 705u);
  EXPECT_NEAR(prof.duration(), 14.08, 1e-12);
}

TEST(Profile, SplitSRollIntegralIsHalfTurn) {
  const auto prof = reference_profile(Maneuver::SplitS, {}, 705, 0.02);
  const Pulse roll = splits_roll_segment();
  double sum = 0.0;
  for (std::size_t k = 0; k < prof.size(); ++k) {
    const double t = prof.dt * static_cast<double>(k);
    if (t >= roll.start && t <= roll.end()) sum += prof.samples[k][0] * prof.dt;
  }
  EXPECT_NEAR(sum, kPi, 0.05);
}

TEST(Profile, SplitSPullIsPositiveHalfLoop) {
  const auto prof = reference_profile(Maneuver::SplitS, {}, 705, 0.02);
  const Pulse pull = splits_pull_segment();
  double sum = 0.0;
  for (std::size_t k = 0; k < prof.size(); ++k) {
    const double t = prof.dt * static_cast<double>(k);
    if (t >= pull.start && t <= pull.end()) {
      EXPECT_GE(prof.samples[k][1], 0.0);
      sum += prof.samples[k][1] * prof.dt;
    }
  }
  EXPECT_NEAR(sum, kPi, 0.05);
}

TEST(Profile, ChandelleCombinesRollAndPitch) {
  const auto prof = reference_profile(Maneuver::Chandelle, {}, 705, 0.02);
  bool both = false, negative_roll = false;
  for (const auto& s : prof.samples) {
    both = both || (std::abs(s[0]) > 0.1 && std::abs(s[1]) > 0.1);
    negative_roll = negative_roll || s[0] < -0.1;
  }
  EXPECT_TRUE(both);
  EXPECT_TRUE(negative_roll);
}

TEST(Profile, BoundedAndSmooth) {
  for (auto m : {Maneuver::SplitS, Maneuver::Chandelle}) {
    const auto prof = reference_profile(m, {}, 705, 0.02);
    for (std::size_t k = 0; k < prof.size(); ++k) {
      EXPECT_LE(std::abs(prof.samples[k][0]), 3.0);
      EXPECT_LE(std::abs(prof.samples[k][1]), 2.0);
      EXPECT_LE(std::abs(prof.samples[k][2]), 1.0);
      if (k > 0) {
        for (int a = 0; a < 3; ++a) EXPECT_LT(std::abs(prof.samples[k][a] - prof.samples[k - 1][a]), 0.1);
      }
    }
  }
}

TEST(Profile, TooShortRejected) { EXPECT_THROW(reference_profile(Maneuver::SplitS, {}, 99, 0.02), Error); }

TEST(Profile, UnknownManeuverName) {
  try {
    parse_maneuver("barrel-roll");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UnknownManeuver);
  }
}

TEST(Ndi, TrimReferenceReturnsTrimControl) {
  flight::AircraftParams p;
  const auto t = flight::trim(750, 15000, p);
  const auto u = ndi_action(t.state, {0.0, 0.0, 0.0}, {}, p, t.control.throttle, t.state.vt);
  EXPECT_NEAR(u.throttle, t.control.throttle, 0.05 * std::abs(t.control.throttle));
  EXPECT_NEAR(u.elevator, t.control.elevator, 0.05 * std::abs(t.control.elevator));
  EXPECT_NEAR(u.aileron, 0.0, 1e-6);
  EXPECT_NEAR(u.rudder, 0.0, 1e-6);
}

TEST(Ndi, RollStepResponse) {
  flight::AircraftParams p;
  const NdiGains g;
  const auto t = flight::trim(750, 15000, p);
  const auto expert = ExpertPolicy::at_trim(t, p, g);
  auto x = t.state;
  auto s = t.control;
  const int steps = static_cast<int>(std::ceil(3.0 / g.kp / 0.02));
  double best = 0.0;
  for (int k = 0; k < steps; ++k) {
    std::tie(x, s) = flight::step(x, expert.act(x, {0.5, 0.0, 0.0}, {0.0, 0.0, 0.0}), s, p, 0.02);
    best = std::max(best, x.p);
  }
  EXPECT_GE(best, 0.45);
}

TEST(Ndi, OutputAlwaysWithinLimits) {
  flight::AircraftParams p;
  const auto t = flight::trim(750, 15000, p);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 200; ++i) {
    auto x = t.state;
    x.p = u(rng);
    x.q = u(rng) / 2;
    x.r = u(rng) / 4;
    try {
      const auto c = ndi_action(x, {u(rng), u(rng), u(rng)}, {}, p, t.control.throttle, t.state.vt);
      EXPECT_TRUE(flight::ControlLimits::within(c));
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::InversionSingular);
    }
  }
}

TEST(Expert, SplitSTracksAndLosesAltitude) {
  flight::AircraftParams p;
  const auto prof = reference_profile(Maneuver::SplitS, {}, 705, 0.02);
  const auto d = run_expert(750, 15000, prof, p);
  ASSERT_EQ(d.size(), prof.size());
  EXPECT_LT(imitation::e_pqr({d}), 0.02);
  EXPECT_LT(d.samples.back().state.altitude(), d.samples.front().state.altitude());
  for (const auto& s : d.samples) {
    EXPECT_TRUE(flight::ControlLimits::within(s.command));
    EXPECT_TRUE(flight::ControlLimits::within(s.surfaces));
  }
}

TEST(Expert, ChandelleTracks) {
  flight::AircraftParams p;
  const auto prof = reference_profile(Maneuver::Chandelle, {}, 705, 0.02);
  const auto d = run_expert(750, 15000, prof, p);
  ASSERT_EQ(d.size(), prof.size());
  EXPECT_LT(imitation::e_pqr({d}), 0.02);
}

TEST(Expert, Deterministic) {
  flight::AircraftParams p;
  const auto prof = reference_profile(Maneuver::SplitS, {}, 300, 0.02);
  const auto a = run_expert(700, 12000, prof, p), b = run_expert(700, 12000, prof, p);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a.samples[k].state.to_array(), b.samples[k].state.to_array());
    EXPECT_EQ(a.samples[k].command, b.samples[k].command);
  }
}

TEST(Expert, NormalAccelerationAtLevelTrim) {
  flight::AircraftParams p;
  const auto t = flight::trim(750, 15000, p);
  EXPECT_NEAR(normal_acceleration(t.state, p.gravity), -std::cos(t.state.theta), 1e-12);
}
