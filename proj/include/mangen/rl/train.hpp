#pragma once

#include "mangen/harness/metrics.hpp"
#include "mangen/imitation/dagger.hpp"
#include "mangen/rl/td3.hpp"

namespace mangen::rl {

/// Tracking task on one airframe and trim point.
struct Environment {
  flight::AircraftParams params;
  expert::Maneuver maneuver = expert::Maneuver::SplitS;
  imitation::TrimPoint trim{750.0, 15000.0};
  std::size_t samples = 705;
  double dt = 0.02;
  expert::ProfileShape shape;
  expert::NdiGains gains;
  ObsBounds bounds = ObsBounds::defaults();
  double gravity = 32.17;
  /// The TL policy's input window carries its own actions instead of the
  /// composed ones, so RL corrections reach it only through the aircraft state.
  bool tl_sees_own_action = false;

  expert::ReferenceProfile profile() const { return expert::reference_profile(maneuver, {}, samples, dt, shape); }
};

struct EpisodeResult {
  expert::Demonstration demo;
  double ret = 0.0;
  double q0 = std::numeric_limits<double>::quiet_NaN();
  long long steps = 0;  // agent steps (after the bootstrap)
  bool terminated = false;

  bool completed() const { return !terminated && demo.size() == demo.planned_length; }
};

/// One episode with action = compose(TL action, rl_action(obs), C_RL) after
/// a W-step expert bootstrap. `on_transition` sees every agent transition.
/// With `terminate` false the episode always runs to the end of the profile
/// unless the simulator diverges.
template <typename RlAction, typename OnTransition>
EpisodeResult run_episode(const Environment& env, const nn::NetworkWeights& tl, const imitation::NormStats& stats,
                          double c_rl, double delta_term, bool terminate, RlAction&& rl_action,
                          OnTransition&& on_transition) {
  const expert::ReferenceProfile prof = env.profile();
  const flight::TrimResult tr = flight::trim(env.trim.vt, env.trim.altitude, env.params);
  const expert::ExpertPolicy exp = expert::ExpertPolicy::at_trim(tr, env.params, env.gains);
  const imitation::NetworkPolicy tl_policy{tl, stats};
  const auto bootstrap = static_cast<std::size_t>(tl.spec.window);

  EpisodeResult res;
  auto& demo = res.demo;
  demo.dt = prof.dt;
  demo.trim_vt = env.trim.vt;
  demo.trim_alt = env.trim.altitude;
  demo.params_id = env.params.name;
  demo.maneuver = env.maneuver;
  demo.planned_length = prof.size();
  Matrix history(imitation::kFeatureCount, static_cast<Eigen::Index>(prof.size()));
  flight::AircraftState x = tr.state;
  flight::SurfaceState s = tr.control;
  try {
    for (std::size_t k = 0; k < prof.size(); ++k) {
      const expert::Rates& ref = prof.samples[k];
      flight::ControlInput u, u_tl;
      Vector obs, a_rl;
      const bool agent = k >= bootstrap;
      if (!agent) {
        u = exp.act(x, ref, prof.derivatives[k]);
        u_tl = u;
      } else {
        const imitation::RolloutContext ctx{k, x, ref, prof.derivatives[k], history.leftCols(static_cast<Eigen::Index>(k))};
        obs = observe(x, ref, env.bounds);
        a_rl = rl_action(obs, k == bootstrap);
        u_tl = tl_policy.act(ctx);
        u = compose(u_tl, a_rl, c_rl);
      }
      demo.samples.push_back({prof.dt * static_cast<double>(k), x, s, u, u_tl, ref, agent ? 1.0 : 0.0});
      expert::DemoSample seen = demo.samples.back();
      if (env.tl_sees_own_action) seen.command = u_tl;
      history.col(static_cast<Eigen::Index>(k)) = stats.normalize(imitation::feature_row(seen, env.gravity));
      if (k + 1 == prof.size()) break;
      std::tie(x, s) = flight::step(x, u, s, env.params, prof.dt);
      if (!agent) continue;
      const expert::Rates d = imitation::deltas(x, prof.samples[k + 1]);
      Transition t{obs, a_rl, reward(prof.dt, d), observe(x, prof.samples[k + 1], env.bounds),
                   terminate && should_terminate(d, delta_term)};
      res.ret += t.reward;
      ++res.steps;
      on_transition(t, k == bootstrap);
      if (t.done) {
        res.terminated = true;
        break;
      }
    }
  } catch (const Error&) {
    demo.diverged = true;
    res.terminated = true;
  }
  return res;
}

struct EpisodeLog {
  int episode = 0;
  double ret = 0.0;
  double q0 = 0.0;
  double sigma = 0.0;
  long long steps = 0;
  bool terminated = false;
};

struct EvalLog {
  int episode = 0;  // training episodes completed before this evaluation
  double ret = 0.0;
  double pqr_mse = 0.0;
  bool completed = false;
};

struct TrainingHistory {
  std::vector<EpisodeLog> episodes;
  std::vector<EvalLog> evaluations;
};

struct Td3Result {
  nn::Mlp best_actor;
  double best_return = -std::numeric_limits<double>::infinity();
  ActorCritic final;
  TrainingHistory history;
  bool budget_exhausted = false;
};

/// Noise-free episode of `actor` added to the TL policy.
inline EpisodeResult evaluate_actor(const Environment& env, const nn::NetworkWeights& tl, const imitation::NormStats& stats,
                                    const nn::Mlp& actor, const Td3Config& cfg) {
  return run_episode(env, tl, stats, cfg.c_rl, cfg.delta_term, true,
                     [&](const Vector& obs, bool) -> Vector { return actor.forward(obs); },
                     [](const Transition&, bool) {});
}

/// TL policy alone (zero RL action).
inline EpisodeResult evaluate_tl(const Environment& env, const nn::NetworkWeights& tl, const imitation::NormStats& stats,
                                 const Td3Config& cfg) {
  return run_episode(env, tl, stats, cfg.c_rl, cfg.delta_term, true,
                     [](const Vector&, bool) -> Vector { return Vector::Zero(kActionSize); },
                     [](const Transition&, bool) {});
}

using EpisodeCallback = std::function<void(const EpisodeLog&, const EvalLog*)>;

/// TD3 on top of a fixed TL policy. Returns the actor with the best
/// noise-free evaluation return (the initial actor is evaluated too).
inline Td3Result train_td3(const Environment& env, const nn::NetworkWeights& tl, const imitation::NormStats& stats,
                           const Td3Config& cfg, std::uint64_t seed, const EpisodeCallback& on_episode = {}) {
  cfg.validate();
  std::mt19937_64 master(seed);
  const std::uint64_t init_seed = master(), noise_seed = master(), sample_seed = master(), smooth_seed = master();
  Td3Result res;
  ActorCritic ac = ActorCritic::create(cfg, init_seed);
  OuNoise noise(cfg.noise, kActionSize, noise_seed);
  std::mt19937_64 sample_rng(sample_seed), smooth_rng(smooth_seed);
  ReplayBuffer replay(cfg.replay_capacity, cfg.warmup);
  long long updates = 0, total_steps = 0;

  auto evaluate = [&](int episode) {
    const EpisodeResult e = evaluate_actor(env, tl, stats, ac.actor, cfg);
    EvalLog log{episode, e.ret, harness::pqr_mse(e.demo).pqr, e.completed()};
    res.history.evaluations.push_back(log);
    if (e.ret > res.best_return) {
      res.best_return = e.ret;
      res.best_actor = ac.actor;
    }
    return log;
  };
  evaluate(0);

  for (int ep = 0; ep < cfg.episodes; ++ep) {
    if (cfg.max_steps > 0 && total_steps >= cfg.max_steps) {
      res.budget_exhausted = true;
      break;
    }
    noise.reset();
    EpisodeLog log;
    log.episode = ep;
    log.sigma = noise.sigma_effective();
    const EpisodeResult e = run_episode(
        env, tl, stats, cfg.c_rl, cfg.delta_term, true,
        [&](const Vector& obs, bool) -> Vector {
          Vector a = ac.actor.forward(obs) + noise.step();
          return a.cwiseMax(-1.0).cwiseMin(1.0);
        },
        [&](const Transition& t, bool first) {
          if (first) log.q0 = ac.critic1.forward(stack(t.obs, t.action))(0, 0);
          replay.push(t);
          ++total_steps;
          if (!replay.ready(static_cast<std::size_t>(cfg.batch))) return;
          for (int u = 0; u < cfg.updates_per_step; ++u)
            td3_update(ac, replay.sample(static_cast<std::size_t>(cfg.batch), sample_rng), cfg, ++updates, smooth_rng);
        });
    log.ret = e.ret;
    log.steps = e.steps;
    log.terminated = e.terminated;
    res.history.episodes.push_back(log);
    EvalLog eval_log;
    const bool do_eval = (ep + 1) % cfg.eval_every == 0 || ep + 1 == cfg.episodes;
    if (do_eval) eval_log = evaluate(ep + 1);
    if (on_episode) on_episode(log, do_eval ? &eval_log : nullptr);
  }
  res.final = std::move(ac);
  return res;
}

}  // namespace mangen::rl
