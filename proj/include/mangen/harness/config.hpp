#pragma once

#include <yaml-cpp/yaml.h>

#include <filesystem>
#include <set>

#include "mangen/imitation/dagger.hpp"
#include "mangen/rl/train.hpp"
#include "mangen/transfer/transfer.hpp"

namespace mangen::harness {

namespace fs = std::filesystem;

/// Everything the pipeline reads. Keys in the config file carry their units.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  bool has_seed = false;
  std::string output_dir;  // empty: derived from the output root
  std::string aircraft_path;

  flight::AircraftParams source;
  flight::PerturbationSpec target_perturbation{1.1, 1.1, 1.0, 1.0};
  flight::PerturbationSpec updated_perturbation{1.2, 1.2, 1.0, 1.0};

  expert::Maneuver maneuver = expert::Maneuver::SplitS;
  std::size_t samples = 705;
  double dt = 0.02;
  expert::ProfileShape shape;
  expert::NdiGains gains;
  imitation::TrimPoint eval_trim{750.0, 15000.0};

  std::vector<imitation::TrimPoint> data_grid = imitation::default_trim_grid();
  int stride = 1;
  imitation::SplitFractions split;

  nn::NetworkSpec network;
  imitation::TrainConfig bc;
  imitation::DaggerConfig dagger;
  imitation::RolloutOptions rollout;

  transfer::TransferConfig transfer;
  std::size_t transfer_samples = 719;
  imitation::TrimPoint transfer_trim{750.0, 15000.0};

  rl::Td3Config td3;
  bool rl_signed_deltas = false;
  bool rl_tl_sees_own_action = false;

  imitation::Scenario scenario(const flight::AircraftParams& params) const {
    imitation::Scenario sc;
    sc.params = params;
    sc.maneuver = maneuver;
    sc.samples = samples;
    sc.dt = dt;
    sc.shape = shape;
    sc.rollout = rollout;
    sc.rollout.gains = gains;
    sc.rollout.gravity = params.gravity;
    return sc;
  }

  flight::AircraftParams target() const {
    flight::AircraftParams p = flight::perturb(source, target_perturbation);
    p.name = source.name + "-target";
    return p;
  }

  flight::AircraftParams updated() const {
    flight::AircraftParams p = flight::perturb(source, updated_perturbation);
    p.name = source.name + "-updated";
    return p;
  }

  rl::Environment rl_environment() const {
    rl::Environment env;
    env.params = updated();
    env.maneuver = maneuver;
    env.trim = eval_trim;
    env.samples = samples;
    env.dt = dt;
    env.shape = shape;
    env.gains = gains;
    env.bounds = rl::ObsBounds::defaults(rl_signed_deltas);
    env.gravity = source.gravity;
    env.tl_sees_own_action = rl_tl_sees_own_action;
    return env;
  }

  void validate() const {
    source.validate();
    target_perturbation.validate();
    updated_perturbation.validate();
    gains.validate();
    network.validate();
    bc.validate();
    dagger.validate();
    transfer.validate();
    td3.validate();
    require(dt > 0.0 && samples >= 100, ErrorKind::ConfigError, "scenario needs dt > 0 and at least 100 samples");
    require(static_cast<int>(transfer_samples) > network.window, ErrorKind::ConfigError,
            "transfer demo must be longer than the network window");
    require(!data_grid.empty(), ErrorKind::ConfigError, "data trim grid is empty");
    require(stride >= 1, ErrorKind::ConfigError, "stride must be >= 1");
    require(split.train > 0.0 && split.validation >= 0.0 && split.train + split.validation <= 1.0, ErrorKind::ConfigError,
            "split fractions must be non-negative and sum to at most 1");
    require(network.features == imitation::kFeatureCount, ErrorKind::ConfigError, "network must take 18 features");
  }
};

namespace detail {

/// Reads a YAML mapping and rejects keys nobody asked for, so a typo in a
/// unit suffix fails loudly instead of silently keeping the default.
class Section {
 public:
  Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) fail(ErrorKind::ConfigError, path_ + " must be a mapping");
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    used_.insert(key);
    if (!node_ || !node_[key]) return;
    try {
      out = node_[key].template as<T>();
    } catch (const YAML::Exception& e) {
      fail(ErrorKind::ConfigError, where(key) + ": " + e.what());
    }
  }

  Section child(const std::string& key) {
    used_.insert(key);
    return {node_ ? node_[key] : YAML::Node(), where(key)};
  }

  bool has(const std::string& key) const { return node_ && node_[key]; }

  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    if (!node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!used_.count(key)) fail(ErrorKind::ConfigError, "unknown key '" + where(key) + "'");
    }
  }

 private:
  YAML::Node node_;
  std::string path_;
  std::set<std::string> used_;
};

inline void read_grid(Section s, std::vector<imitation::TrimPoint>& grid) {
  if (!s.has("vt_min_fts") && !s.has("points")) {
    s.finish();
    return;
  }
  if (s.has("points")) {
    std::vector<std::vector<double>> pts;
    s.read("points", pts);
    grid.clear();
    for (const auto& p : pts) {
      require(p.size() == 2, ErrorKind::ConfigError, s.where("points") + " entries must be [vt_fts, alt_ft]");
      grid.push_back({p[0], p[1]});
    }
    s.finish();
    return;
  }
  double v0 = 0, v1 = 0, dv = 0, a0 = 0, a1 = 0, da = 0;
  s.read("vt_min_fts", v0);
  s.read("vt_max_fts", v1);
  s.read("vt_step_fts", dv);
  s.read("alt_min_ft", a0);
  s.read("alt_max_ft", a1);
  s.read("alt_step_ft", da);
  s.finish();
  try {
    grid = imitation::trim_grid(v0, v1, dv, a0, a1, da);
  } catch (const Error& e) {
    fail(ErrorKind::ConfigError, e.what());
  }
}

inline void read_trim(Section s, imitation::TrimPoint& tp) {
  s.read("vt_fts", tp.vt);
  s.read("alt_ft", tp.altitude);
  s.finish();
}

inline void read_perturbation(Section s, flight::PerturbationSpec& p) {
  s.read("mass_factor", p.mass);
  s.read("inertia_factor", p.inertia);
  s.read("aero_factor", p.aero);
  s.read("actuator_rate_factor", p.actuator);
  s.finish();
}

inline void read_train(Section s, imitation::TrainConfig& c) {
  s.read("epochs", c.epochs);
  s.read("batch", c.batch);
  s.read("learning_rate", c.lr);
  s.read("lambda_rec", c.lambda_rec);
  s.read("max_batches_per_epoch", c.max_batches_per_epoch);
  s.read("clip_norm", c.clip_norm);
  s.finish();
}

}  // namespace detail

/// Aircraft parameter file: flat mapping, one unit-suffixed key per constant.
inline void read_aircraft(detail::Section s, flight::AircraftParams& p) {
  s.read("name", p.name);
  s.read("mass_slug", p.mass);
  s.read("ixx_slugft2", p.ixx);
  s.read("iyy_slugft2", p.iyy);
  s.read("izz_slugft2", p.izz);
  s.read("ixz_slugft2", p.ixz);
  s.read("wing_area_ft2", p.wing_area);
  s.read("span_ft", p.span);
  s.read("chord_ft", p.chord);
  s.read("xcg_chord", p.xcg);
  s.read("xcg_ref_chord", p.xcg_ref);
  s.read("aero_scale", p.aero_scale);
  s.read("aerodynamics_enabled", p.aerodynamics_enabled);
  s.read("thrust_max_sl_lbf", p.thrust_max_sl);
  s.read("thrust_density_exponent", p.thrust_density_exponent);
  s.read("thrust_mach_gain", p.thrust_mach_gain);
  s.read("engine_tau_s", p.engine_tau);
  s.read("tau_surface_s", p.tau_surface);
  s.read("tau_throttle_s", p.tau_throttle);
  s.read("rate_elevator_dps", p.rate_elevator);
  s.read("rate_aileron_dps", p.rate_aileron);
  s.read("rate_rudder_dps", p.rate_rudder);
  s.read("rate_throttle_per_s", p.rate_throttle);
  s.read("gravity_fts2", p.gravity);
  s.finish();
}

inline flight::AircraftParams load_aircraft(const fs::path& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::BadFile&) {
    fail(ErrorKind::ConfigError, "cannot read aircraft file " + path.string());
  } catch (const YAML::Exception& e) {
    fail(ErrorKind::ConfigError, path.string() + ": " + e.what());
  }
  flight::AircraftParams p;
  read_aircraft({root, ""}, p);
  p.validate();
  return p;
}

inline std::string aircraft_yaml(const flight::AircraftParams& p) {
  YAML::Emitter e;
  e.SetDoublePrecision(17);
  e << YAML::BeginMap << YAML::Key << "name" << YAML::Value << p.name;
  auto kv = [&](const char* k, double v) { e << YAML::Key << k << YAML::Value << v; };
  kv("mass_slug", p.mass);
  kv("ixx_slugft2", p.ixx);
  kv("iyy_slugft2", p.iyy);
  kv("izz_slugft2", p.izz);
  kv("ixz_slugft2", p.ixz);
  kv("wing_area_ft2", p.wing_area);
  kv("span_ft", p.span);
  kv("chord_ft", p.chord);
  kv("xcg_chord", p.xcg);
  kv("xcg_ref_chord", p.xcg_ref);
  kv("aero_scale", p.aero_scale);
  e << YAML::Key << "aerodynamics_enabled" << YAML::Value << p.aerodynamics_enabled;
  kv("thrust_max_sl_lbf", p.thrust_max_sl);
  kv("thrust_density_exponent", p.thrust_density_exponent);
  kv("thrust_mach_gain", p.thrust_mach_gain);
  kv("engine_tau_s", p.engine_tau);
  kv("tau_surface_s", p.tau_surface);
  kv("tau_throttle_s", p.tau_throttle);
  kv("rate_elevator_dps", p.rate_elevator);
  kv("rate_aileron_dps", p.rate_aileron);
  kv("rate_rudder_dps", p.rate_rudder);
  kv("rate_throttle_per_s", p.rate_throttle);
  kv("gravity_fts2", p.gravity);
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

/// Parses a config document. Relative paths resolve against `base_dir`.
inline ExperimentConfig parse_config(const YAML::Node& root, const fs::path& base_dir = {}) {
  using detail::Section;
  ExperimentConfig c;
  Section top(root, "");
  if (top.has("seed")) c.has_seed = true;
  top.read("seed", c.seed);
  top.read("output_dir", c.output_dir);

  {
    Section a = top.child("aircraft");
    a.read("params_path", c.aircraft_path);
    if (!c.aircraft_path.empty()) {
      fs::path p = c.aircraft_path;
      if (p.is_relative()) p = base_dir / p;
      require(fs::exists(p), ErrorKind::ConfigError, "aircraft.params_path not found: " + p.string());
      c.aircraft_path = p.string();
      c.source = load_aircraft(p);
    }
    detail::read_perturbation(a.child("target"), c.target_perturbation);
    detail::read_perturbation(a.child("updated_target"), c.updated_perturbation);
    a.finish();
  }
  {
    Section s = top.child("scenario");
    std::string m = expert::to_string(c.maneuver);
    s.read("maneuver", m);
    try {
      c.maneuver = expert::parse_maneuver(m);
    } catch (const Error& e) {
      fail(ErrorKind::ConfigError, e.what());
    }
    s.read("samples", c.samples);
    s.read("dt_s", c.dt);
    detail::read_trim(s.child("eval_trim"), c.eval_trim);
    Section p = s.child("profile");
    auto& sh = c.shape;
    p.read("splits_roll_start_s", sh.splits_roll_start);
    p.read("splits_roll_ramp_s", sh.splits_roll_ramp);
    p.read("splits_roll_rate_radps", sh.splits_roll_rate);
    p.read("splits_roll_angle_rad", sh.splits_roll_angle);
    p.read("splits_pull_start_s", sh.splits_pull_start);
    p.read("splits_pull_ramp_s", sh.splits_pull_ramp);
    p.read("splits_pull_rate_radps", sh.splits_pull_rate);
    p.read("splits_pull_angle_rad", sh.splits_pull_angle);
    p.read("chandelle_roll_in_start_s", sh.chandelle_roll_in_start);
    p.read("chandelle_roll_ramp_s", sh.chandelle_roll_ramp);
    p.read("chandelle_roll_rate_radps", sh.chandelle_roll_rate);
    p.read("chandelle_bank_angle_rad", sh.chandelle_bank_angle);
    p.read("chandelle_turn_start_s", sh.chandelle_turn_start);
    p.read("chandelle_turn_ramp_s", sh.chandelle_turn_ramp);
    p.read("chandelle_turn_plateau_s", sh.chandelle_turn_plateau);
    p.read("chandelle_pitch_rate_radps", sh.chandelle_pitch_rate);
    p.read("chandelle_yaw_rate_radps", sh.chandelle_yaw_rate);
    p.read("chandelle_roll_out_start_s", sh.chandelle_roll_out_start);
    p.finish();
    s.finish();
  }
  {
    Section e = top.child("expert");
    e.read("kp_per_s", c.gains.kp);
    e.read("kq_per_s", c.gains.kq);
    e.read("kr_per_s", c.gains.kr);
    e.read("k_airspeed_per_s", c.gains.k_airspeed);
    e.read("max_condition", c.gains.max_condition);
    e.finish();
  }
  {
    Section d = top.child("data");
    detail::read_grid(d.child("trim_grid"), c.data_grid);
    d.read("stride_steps", c.stride);
    d.read("train_fraction", c.split.train);
    d.read("validation_fraction", c.split.validation);
    d.finish();
  }
  {
    Section n = top.child("network");
    n.read("window_steps", c.network.window);
    n.read("encoder_units", c.network.encoder);
    n.read("decoder_units", c.network.decoder);
    n.read("head_units", c.network.head);
    n.finish();
  }
  detail::read_train(top.child("bc"), c.bc);
  {
    Section d = top.child("dagger");
    d.read("eps_pqr_radps", c.dagger.eps_pqr);
    d.read("gain_grid", c.dagger.grid);
    d.read("max_iterations", c.dagger.max_iterations);
    d.read("reset_weights", c.dagger.reset_weights);
    d.read("threshold_floor_radps", c.rollout.threshold_floor);
    d.read("bootstrap_steps", c.rollout.bootstrap);
    detail::read_grid(d.child("trim_grid"), c.dagger.trims);
    detail::read_trim(d.child("eval_trim"), c.dagger.eval_trim);
    c.dagger.retrain = c.bc;
    detail::read_train(d.child("retrain"), c.dagger.retrain);
    Section st = d.child("stable_set");
    double amin = c.rollout.stable.alpha_min * kRadToDeg, amax = c.rollout.stable.alpha_max * kRadToDeg,
           bmax = c.rollout.stable.beta_max * kRadToDeg;
    st.read("alpha_min_deg", amin);
    st.read("alpha_max_deg", amax);
    st.read("beta_max_deg", bmax);
    st.read("vt_min_fts", c.rollout.stable.vt_min);
    st.read("vt_max_fts", c.rollout.stable.vt_max);
    st.read("altitude_min_ft", c.rollout.stable.altitude_min);
    st.read("rate_max_radps", c.rollout.stable.rate_max);
    st.finish();
    c.rollout.stable.alpha_min = amin * kDegToRad;
    c.rollout.stable.alpha_max = amax * kDegToRad;
    c.rollout.stable.beta_max = bmax * kDegToRad;
    d.finish();
  }
  {
    Section t = top.child("transfer");
    std::vector<std::string> freeze;
    t.read("freeze_layers", freeze);
    c.transfer.freeze = {freeze.begin(), freeze.end()};
    t.read("learning_rate", c.transfer.lr);
    t.read("batch", c.transfer.batch);
    t.read("epochs", c.transfer.epochs);
    t.read("lambda_rec", c.transfer.lambda_rec);
    t.read("holdout_fraction", c.transfer.holdout_fraction);
    t.read("demo_samples", c.transfer_samples);
    detail::read_trim(t.child("demo_trim"), c.transfer_trim);
    t.finish();
  }
  {
    Section r = top.child("rl");
    auto& t = c.td3;
    r.read("c_rl", t.c_rl);
    r.read("gamma", t.gamma);
    r.read("batch", t.batch);
    r.read("polyak", t.polyak);
    r.read("target_update_frequency", t.target_update_frequency);
    r.read("policy_update_frequency", t.policy_update_frequency);
    r.read("actor_hidden_units", t.actor_hidden);
    r.read("critic_hidden_units", t.critic_hidden);
    r.read("actor_learning_rate", t.actor_lr);
    r.read("critic_learning_rate", t.critic_lr);
    r.read("actor_final_init_scale", t.actor_final_scale);
    r.read("target_noise", t.target_noise);
    r.read("target_noise_clip", t.target_noise_clip);
    r.read("replay_capacity", t.replay_capacity);
    r.read("warmup_steps", t.warmup);
    r.read("episodes", t.episodes);
    r.read("max_steps", t.max_steps);
    r.read("updates_per_step", t.updates_per_step);
    r.read("delta_term_radps", t.delta_term);
    r.read("eval_every_episodes", t.eval_every);
    r.read("signed_deltas", c.rl_signed_deltas);
    r.read("tl_sees_own_action", c.rl_tl_sees_own_action);
    Section n = r.child("ou_noise");
    n.read("mean", t.noise.mean);
    n.read("sigma", t.noise.sigma);
    n.read("theta", t.noise.theta);
    n.read("dt", t.noise.dt);
    n.read("decay_steps", t.noise.decay_steps);
    n.finish();
    r.finish();
  }
  top.finish();
  try {
    c.validate();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ConfigError) throw;
    fail(ErrorKind::ConfigError, e.what());
  }
  return c;
}

inline ExperimentConfig load_config(const fs::path& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::BadFile&) {
    fail(ErrorKind::ConfigError, "cannot read config " + path.string());
  } catch (const YAML::Exception& e) {
    fail(ErrorKind::ConfigError, path.string() + ": " + e.what());
  }
  return parse_config(root, path.parent_path());
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  try {
    return parse_config(YAML::Load(text));
  } catch (const YAML::ParserException& e) {
    fail(ErrorKind::ConfigError, e.what());
  }
}

constexpr const char* kOutputRootEnv = "MANGEN_OUTPUT_ROOT";

/// --out wins, then the config's output_dir, then $MANGEN_OUTPUT_ROOT/run-<seed>,
/// then ./runs/run-<seed>.
inline fs::path resolve_output_dir(const ExperimentConfig& c, const std::string& cli_out = {}) {
  if (!cli_out.empty()) return cli_out;
  if (!c.output_dir.empty()) return c.output_dir;
  const char* root = std::getenv(kOutputRootEnv);
  const fs::path base = root && *root ? fs::path(root) : fs::path("runs");
  return base / ("run-" + std::to_string(c.seed));
}

}  // namespace mangen::harness
