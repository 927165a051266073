#pragma once

#include <functional>
#include <limits>

#include "mangen/nn/adam.hpp"
#include "mangen/nn/mlp.hpp"
#include "mangen/rl/env.hpp"
#include "mangen/rl/noise.hpp"
#include "mangen/rl/replay.hpp"

namespace mangen::rl {

struct Td3Config {
  double c_rl = 0.1;
  double gamma = 0.99;
  int batch = 128;
  OuConfig noise;
  double polyak = 0.05;
  int target_update_frequency = 4;
  int policy_update_frequency = 8;
  std::vector<int> actor_hidden{64, 64};
  std::vector<int> critic_hidden{64, 64};
  double actor_lr = 1e-3;
  double critic_lr = 1e-3;
  double actor_final_scale = 1e-2;
  double target_noise = 0.2;
  double target_noise_clip = 0.5;
  std::size_t replay_capacity = 100000;
  std::size_t warmup = 1000;
  int episodes = 200;
  long long max_steps = 0;  // 0 = no cap beyond the episode count
  int updates_per_step = 1;
  double delta_term = 0.5;  // rad/s, per axis
  int eval_every = 5;       // episodes between noise-free evaluations

  void validate() const {
    require(c_rl > 0.0 && c_rl <= 1.0, ErrorKind::InvalidArgument, "C_RL must lie in (0, 1]");
    require(gamma > 0.0 && gamma < 1.0, ErrorKind::InvalidArgument, "gamma must lie in (0, 1)");
    require(batch >= 1 && target_update_frequency >= 1 && policy_update_frequency >= 1, ErrorKind::InvalidArgument,
            "batch and update frequencies must be >= 1");
    require(polyak > 0.0 && polyak <= 1.0, ErrorKind::InvalidArgument, "polyak factor must lie in (0, 1]");
    require(replay_capacity >= static_cast<std::size_t>(batch), ErrorKind::InvalidArgument, "replay smaller than a batch");
    require(episodes >= 1 && eval_every >= 1 && updates_per_step >= 0, ErrorKind::InvalidArgument, "bad episode budget");
    require(delta_term > 0.0 && actor_lr > 0.0 && critic_lr > 0.0, ErrorKind::InvalidArgument, "bad TD3 scalars");
  }
};

/// Actor, twin critics, and target copies of all three.
struct ActorCritic {
  nn::Mlp actor, critic1, critic2;
  nn::Mlp actor_target, critic1_target, critic2_target;
  nn::AdamState actor_opt, critic1_opt, critic2_opt;

  static ActorCritic create(const Td3Config& cfg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    ActorCritic ac;
    ac.actor = nn::Mlp::initialize({kObsSize, cfg.actor_hidden, kActionSize, nn::Activation::Relu, nn::Activation::Tanh},
                                   rng, cfg.actor_final_scale);
    const nn::MlpSpec cs{kObsSize + kActionSize, cfg.critic_hidden, 1, nn::Activation::Relu, nn::Activation::Identity};
    ac.critic1 = nn::Mlp::initialize(cs, rng);
    ac.critic2 = nn::Mlp::initialize(cs, rng);
    ac.actor_target = ac.actor;
    ac.critic1_target = ac.critic1;
    ac.critic2_target = ac.critic2;
    ac.actor_opt = nn::AdamState::for_size(static_cast<std::size_t>(ac.actor.params.size()), cfg.actor_lr);
    ac.critic1_opt = nn::AdamState::for_size(static_cast<std::size_t>(ac.critic1.params.size()), cfg.critic_lr);
    ac.critic2_opt = nn::AdamState::for_size(static_cast<std::size_t>(ac.critic2.params.size()), cfg.critic_lr);
    return ac;
  }

  Vector act(const Vector& obs) const { return actor.forward(obs); }
};

inline Matrix stack(const Matrix& obs, const Matrix& action) {
  Matrix x(obs.rows() + action.rows(), obs.cols());
  x << obs, action;
  return x;
}

/// Bootstrapped critic target y = r + gamma (1 - done) min(Q1', Q2')(s', a').
inline Vector critic_target(const ActorCritic& ac, const Minibatch& b, const Td3Config& cfg, std::mt19937_64& rng) {
  Matrix next_a = ac.actor_target.forward(b.next_obs);
  for (Eigen::Index i = 0; i < next_a.size(); ++i) {
    const double eps = std::clamp(cfg.target_noise * nn::standard_normal(rng), -cfg.target_noise_clip, cfg.target_noise_clip);
    next_a.data()[i] = std::clamp(next_a.data()[i] + eps, -1.0, 1.0);
  }
  const Matrix sa = stack(b.next_obs, next_a);
  const Vector q = ac.critic1_target.forward(sa).row(0).transpose().cwiseMin(ac.critic2_target.forward(sa).row(0).transpose());
  return b.reward + cfg.gamma * (Vector::Ones(b.size()) - b.done).cwiseProduct(q);
}

struct UpdateStats {
  double critic1_loss = 0.0;
  double critic2_loss = 0.0;
  double actor_loss = std::numeric_limits<double>::quiet_NaN();
  bool actor_updated = false;
  bool targets_updated = false;
};

inline void polyak_update(nn::Mlp& target, const nn::Mlp& online, double tau) {
  target.params = (1.0 - tau) * target.params + tau * online.params;
}

/// One TD3 learner step. The actor moves when `step_index` is a multiple of
/// the policy frequency; targets are Polyak-averaged when it is a multiple of
/// the target frequency.
inline UpdateStats td3_update(ActorCritic& ac, const Minibatch& b, const Td3Config& cfg, long long step_index,
                              std::mt19937_64& rng) {
  require(b.size() == cfg.batch, ErrorKind::ShapeMismatch, "minibatch size differs from config");
  UpdateStats st;
  const Vector y = critic_target(ac, b, cfg, rng);
  const Matrix sa = stack(b.obs, b.action);
  const double n = static_cast<double>(b.size());

  auto fit_critic = [&](nn::Mlp& critic, nn::AdamState& opt) {
    const nn::DenseCache cache = critic.forward_cache(sa);
    const Matrix err = cache.outputs.back() - y.transpose();
    Vector g = Vector::Zero(critic.params.size());
    critic.backward(cache, 2.0 * err / n, &g);
    nn::adam_step(critic.params, g, opt);
    return err.squaredNorm() / n;
  };
  st.critic1_loss = fit_critic(ac.critic1, ac.critic1_opt);
  st.critic2_loss = fit_critic(ac.critic2, ac.critic2_opt);

  if (step_index % cfg.policy_update_frequency == 0) {
    // Maximize Q1(s, actor(s)): descend on -mean Q1.
    const nn::DenseCache acache = ac.actor.forward_cache(b.obs);
    const Matrix& a = acache.outputs.back();
    const nn::DenseCache ccache = ac.critic1.forward_cache(stack(b.obs, a));
    st.actor_loss = -ccache.outputs.back().mean();
    const Matrix dx = ac.critic1.backward(ccache, Matrix::Constant(1, b.size(), -1.0 / n), nullptr);
    Vector g = Vector::Zero(ac.actor.params.size());
    ac.actor.backward(acache, dx.bottomRows(kActionSize), &g);
    nn::adam_step(ac.actor.params, g, ac.actor_opt);
    st.actor_updated = true;
  }
  if (step_index % cfg.target_update_frequency == 0) {
    polyak_update(ac.actor_target, ac.actor, cfg.polyak);
    polyak_update(ac.critic1_target, ac.critic1, cfg.polyak);
    polyak_update(ac.critic2_target, ac.critic2, cfg.polyak);
    st.targets_updated = true;
  }
  return st;
}

}  // namespace mangen::rl
