#pragma once

#include <iostream>

#include "mangen/harness/config.hpp"
#include "mangen/harness/io.hpp"
#include "mangen/rl/train.hpp"

namespace mangen::harness {

// ------------------------------------------------------------ config to json

inline Json trim_json(const imitation::TrimPoint& t) { return {{"vt_fts", t.vt}, {"alt_ft", t.altitude}}; }

inline Json grid_json(const std::vector<imitation::TrimPoint>& g) {
  Json j = Json::array();
  for (const auto& t : g) j.push_back({t.vt, t.altitude});
  return j;
}

inline Json train_json(const imitation::TrainConfig& c) {
  return {{"epochs", c.epochs}, {"batch", c.batch}, {"learning_rate", c.lr}, {"lambda_rec", c.lambda_rec},
          {"max_batches_per_epoch", c.max_batches_per_epoch}, {"clip_norm", c.clip_norm}};
}

inline Json perturbation_json(const flight::PerturbationSpec& p) {
  return {{"mass_factor", p.mass}, {"inertia_factor", p.inertia}, {"aero_factor", p.aero}, {"actuator_rate_factor", p.actuator}};
}

/// Fully resolved config, grouped by the stage that first reads each part.
inline Json config_json(const ExperimentConfig& c) {
  Json j;
  j["seed"] = c.seed;
  j["aircraft"] = {{"source", aircraft_yaml(c.source)},
                   {"target", perturbation_json(c.target_perturbation)},
                   {"updated_target", perturbation_json(c.updated_perturbation)}};
  const auto& sh = c.shape;
  j["scenario"] = {{"maneuver", expert::to_string(c.maneuver)},
                   {"samples", c.samples},
                   {"dt_s", c.dt},
                   {"eval_trim", trim_json(c.eval_trim)},
                   {"profile",
                    {sh.splits_roll_start, sh.splits_roll_ramp, sh.splits_roll_rate, sh.splits_roll_angle,
                     sh.splits_pull_start, sh.splits_pull_ramp, sh.splits_pull_rate, sh.splits_pull_angle,
                     sh.chandelle_roll_in_start, sh.chandelle_roll_ramp, sh.chandelle_roll_rate, sh.chandelle_bank_angle,
                     sh.chandelle_turn_start, sh.chandelle_turn_ramp, sh.chandelle_turn_plateau, sh.chandelle_pitch_rate,
                     sh.chandelle_yaw_rate, sh.chandelle_roll_out_start}}};
  j["expert"] = {{"kp_per_s", c.gains.kp}, {"kq_per_s", c.gains.kq}, {"kr_per_s", c.gains.kr},
                 {"k_airspeed_per_s", c.gains.k_airspeed}, {"max_condition", c.gains.max_condition}};
  j["data"] = {{"trim_grid", grid_json(c.data_grid)}, {"stride_steps", c.stride},
               {"train_fraction", c.split.train}, {"validation_fraction", c.split.validation}};
  j["network"] = {{"window_steps", c.network.window}, {"spec", c.network.canonical()}};
  j["bc"] = train_json(c.bc);
  const auto& st = c.rollout.stable;
  j["dagger"] = {{"eps_pqr_radps", c.dagger.eps_pqr},
                 {"gain_grid", c.dagger.grid},
                 {"max_iterations", c.dagger.max_iterations},
                 {"reset_weights", c.dagger.reset_weights},
                 {"threshold_floor_radps", c.rollout.threshold_floor},
                 {"bootstrap_steps", c.rollout.bootstrap},
                 {"trim_grid", grid_json(c.dagger.trims)},
                 {"eval_trim", trim_json(c.dagger.eval_trim)},
                 {"retrain", train_json(c.dagger.retrain)},
                 {"stable_set",
                  {st.alpha_min, st.alpha_max, st.beta_max, st.vt_min, st.vt_max, st.altitude_min, st.rate_max}}};
  std::vector<std::string> freeze(c.transfer.freeze.begin(), c.transfer.freeze.end());
  j["transfer"] = {{"freeze_layers", freeze},
                   {"learning_rate", c.transfer.lr},
                   {"batch", c.transfer.batch},
                   {"epochs", c.transfer.epochs},
                   {"lambda_rec", c.transfer.lambda_rec},
                   {"holdout_fraction", c.transfer.holdout_fraction},
                   {"demo_samples", c.transfer_samples},
                   {"demo_trim", trim_json(c.transfer_trim)}};
  const auto& t = c.td3;
  j["rl"] = {{"c_rl", t.c_rl},
             {"gamma", t.gamma},
             {"batch", t.batch},
             {"polyak", t.polyak},
             {"target_update_frequency", t.target_update_frequency},
             {"policy_update_frequency", t.policy_update_frequency},
             {"actor_hidden_units", t.actor_hidden},
             {"critic_hidden_units", t.critic_hidden},
             {"actor_learning_rate", t.actor_lr},
             {"critic_learning_rate", t.critic_lr},
             {"actor_final_init_scale", t.actor_final_scale},
             {"target_noise", t.target_noise},
             {"target_noise_clip", t.target_noise_clip},
             {"replay_capacity", t.replay_capacity},
             {"warmup_steps", t.warmup},
             {"episodes", t.episodes},
             {"max_steps", t.max_steps},
             {"updates_per_step", t.updates_per_step},
             {"delta_term_radps", t.delta_term},
             {"eval_every_episodes", t.eval_every},
             {"signed_deltas", c.rl_signed_deltas},
             {"tl_sees_own_action", c.rl_tl_sees_own_action},
             {"ou_noise",
              {{"mean", t.noise.mean}, {"sigma", t.noise.sigma}, {"theta", t.noise.theta}, {"dt", t.noise.dt},
               {"decay_steps", t.noise.decay_steps}}}};
  return j;
}

// ----------------------------------------------------------------- manifest

struct OutputFile {
  std::string path;  // relative to the run directory
  std::uint32_t crc32 = 0;
  std::uintmax_t bytes = 0;
};

struct StageRecord {
  std::string name;
  std::string status;  // "completed" or "failed"
  std::string key;     // config + upstream hash the outputs were produced from
  std::vector<OutputFile> outputs;
  std::string error;
};

struct Manifest {
  std::string config_hash;
  std::vector<StageRecord> stages;

  bool ok() const {
    for (const auto& s : stages)
      if (s.status != "completed") return false;
    return true;
  }

  const StageRecord* find(const std::string& name) const {
    for (const auto& s : stages)
      if (s.name == name) return &s;
    return nullptr;
  }
};

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string hex32(std::uint32_t v) {
  char buf[9];
  std::snprintf(buf, sizeof(buf), "%08x", v);
  return buf;
}

inline Json manifest_json(const Manifest& m) {
  Json j;
  j["format"] = "mangen-manifest/v1";
  j["config_hash"] = m.config_hash;
  j["stages"] = Json::array();
  for (const auto& s : m.stages) {
    Json st{{"name", s.name}, {"status", s.status}, {"key", s.key}, {"outputs", Json::array()}};
    for (const auto& o : s.outputs) st["outputs"].push_back({{"path", o.path}, {"crc32", hex32(o.crc32)}, {"bytes", o.bytes}});
    if (!s.error.empty()) st["error"] = s.error;
    j["stages"].push_back(st);
  }
  return j;
}

inline Manifest manifest_from_json(const Json& j) {
  Manifest m;
  m.config_hash = j.value("config_hash", "");
  for (const auto& st : j.at("stages")) {
    StageRecord s;
    s.name = st.at("name");
    s.status = st.at("status");
    s.key = st.at("key");
    s.error = st.value("error", "");
    for (const auto& o : st.at("outputs"))
      s.outputs.push_back({o.at("path"), static_cast<std::uint32_t>(std::stoul(o.at("crc32").get<std::string>(), nullptr, 16)),
                           o.at("bytes").get<std::uintmax_t>()});
    m.stages.push_back(std::move(s));
  }
  return m;
}

inline std::optional<Manifest> read_manifest(const fs::path& run_dir) {
  const fs::path p = run_dir / "manifest.json";
  if (!fs::exists(p)) return std::nullopt;
  try {
    return manifest_from_json(Json::parse(nn::checkpoint::read_file(p)));
  } catch (const std::exception&) {
    return std::nullopt;  // unreadable manifest: nothing is reusable
  }
}

// ------------------------------------------------------------------- stages

inline const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{"bc", "dagger", "transfer", "rl", "eval"};
  return names;
}

/// Seed for one stage, derived from the experiment seed.
inline std::uint64_t stage_seed(std::uint64_t seed, const std::string& stage) {
  return fnv1a(stage, seed ^ 0x9e3779b97f4a7c15ULL);
}

struct PipelineOptions {
  /// Last stage to run (index into stage_names()).
  int until = 4;
  /// Reuse completed stages whose key and output checksums still match.
  bool resume = true;
  std::ostream* progress = &std::cerr;
};

namespace detail {

struct StageContext {
  const ExperimentConfig& cfg;
  fs::path dir;
  std::vector<OutputFile>* outputs;
  std::ostream* progress;

  fs::path path(const std::string& rel) const { return dir / rel; }

  void produced(const std::string& rel) const {
    const fs::path p = path(rel);
    outputs->push_back({rel, file_crc32(p), fs::file_size(p)});
  }

  void say(const std::string& msg) const {
    if (progress) *progress << msg << std::endl;
  }
};

/// Expert demonstrations over `grid`; trim points where the expert fails are
/// reported through `failed` and skipped.
inline std::vector<expert::Demonstration> expert_demos(const ExperimentConfig& cfg, const flight::AircraftParams& params,
                                                       const std::vector<imitation::TrimPoint>& grid,
                                                       std::vector<std::string>* failed = nullptr) {
  std::vector<expert::Demonstration> demos;
  const imitation::Scenario sc = cfg.scenario(params);
  for (const auto& tp : grid) {
    try {
      demos.push_back(expert::run_expert(tp.vt, tp.altitude, sc.profile(), params, cfg.gains));
    } catch (const Error& e) {
      if (!failed) throw;
      failed->push_back(e.what());
    }
  }
  return demos;
}

inline Json pqr_json(const PqrMse& m) {
  return {{"p_mse_rad2ps2", m.p}, {"q_mse_rad2ps2", m.q}, {"r_mse_rad2ps2", m.r}, {"pqr_mse_rad2ps2", m.pqr}};
}

inline void stage_bc(const StageContext& s) {
  const auto& cfg = s.cfg;
  std::vector<std::string> failed;
  const std::vector<expert::Demonstration> usable = expert_demos(cfg, cfg.source, cfg.data_grid, &failed);
  for (const auto& f : failed) s.say("  skipped: " + f);
  require(!usable.empty(), ErrorKind::ExpertDiverged, "the expert failed at every trim point");
  save_dataset(usable, s.path("bc/expert_dataset.csv"));
  s.produced("bc/expert_dataset.csv");

  const imitation::Dataset ds = imitation::build_dataset(usable, cfg.source.gravity);
  save_stats(ds.stats, s.path("bc/norm_stats.json"));
  s.produced("bc/norm_stats.json");
  const auto windows = imitation::make_windows(ds, cfg.network.window, cfg.stride, stage_seed(cfg.seed, "split"), cfg.split);
  imitation::TrainConfig tc = cfg.bc;
  tc.seed = stage_seed(cfg.seed, "bc");
  JsonlLog log(s.path("bc/train_log.jsonl"));
  s.say("  " + std::to_string(usable.size()) + " demos, " + std::to_string(windows.train.size()) + " training windows");
  const auto res = imitation::train_bc(ds, windows, cfg.network, tc, [&](int epoch, double train, double val) {
    log.write({{"epoch", epoch}, {"train_loss", train}, {"validation_loss", val}});
    s.say("  epoch " + std::to_string(epoch) + " train " + format_double(train) + " val " + format_double(val));
  });
  log.write({{"best_epoch", res.best_epoch}, {"best_validation_loss", res.best_validation}});
  s.produced("bc/train_log.jsonl");
  nn::save(res.weights, s.path("bc/bc.ckpt"));
  s.produced("bc/bc.ckpt");
}

inline void stage_dagger(const StageContext& s) {
  const auto& cfg = s.cfg;
  const auto demos = load_dataset(s.path("bc/expert_dataset.csv"));
  imitation::Dataset ds;
  ds.dt = demos.front().dt;
  ds.stats = load_stats(s.path("bc/norm_stats.json"));
  imitation::append(ds, demos, cfg.source.gravity);
  const nn::NetworkWeights bc = nn::load(s.path("bc/bc.ckpt"), cfg.network);

  imitation::DaggerConfig dc = cfg.dagger;
  dc.stride = cfg.stride;
  dc.split_seed = stage_seed(cfg.seed, "split");
  dc.retrain.seed = stage_seed(cfg.seed, "dagger");
  JsonlLog log(s.path("dagger/iterations.jsonl"));
  std::vector<std::string> ckpts;
  const auto res = imitation::c_dagger(bc, ds, cfg.scenario(cfg.source), dc,
                                       [&](const imitation::DaggerIteration& r, const nn::NetworkWeights& w) {
                                         Json rec{{"iteration", r.iteration},
                                                  {"c_g", r.c_g},
                                                  {"e_pqr_radps", r.e_pqr},
                                                  {"lambda_sum", r.lambda_sum},
                                                  {"dataset_rows", r.dataset_rows},
                                                  {"learner", pqr_json(r.learner)},
                                                  {"learner_diverged", r.learner_diverged}};
                                         log.write(rec);
                                         const std::string rel = "dagger/iter_" + std::to_string(r.iteration) + ".ckpt";
                                         nn::save(w, s.path(rel));
                                         ckpts.push_back(rel);
                                         s.say("  iteration " + std::to_string(r.iteration) + " e_pqr " +
                                               format_double(r.e_pqr) + " learner pqr-mse " + format_double(r.learner.pqr));
                                       });
  log.write({{"converged", res.converged}, {"budget_exhausted", res.budget_exhausted}});
  s.produced("dagger/iterations.jsonl");
  for (const auto& c : ckpts) s.produced(c);
  nn::save(res.weights, s.path("dagger/dagger.ckpt"));
  s.produced("dagger/dagger.ckpt");
}

inline expert::Demonstration target_demo(const ExperimentConfig& cfg) {
  const auto prof = expert::reference_profile(cfg.maneuver, {}, cfg.transfer_samples, cfg.dt, cfg.shape);
  return expert::run_expert(cfg.transfer_trim.vt, cfg.transfer_trim.altitude, prof, cfg.target(), cfg.gains);
}

inline void stage_transfer(const StageContext& s) {
  const auto& cfg = s.cfg;
  const expert::Demonstration demo = target_demo(cfg);
  require(!demo.diverged, ErrorKind::ExpertDiverged, "expert diverged on the target aircraft");
  save_dataset({demo}, s.path("transfer/target_demo.csv"));
  s.produced("transfer/target_demo.csv");
  const auto stats = load_stats(s.path("bc/norm_stats.json"));
  const nn::NetworkWeights source = nn::load(s.path("dagger/dagger.ckpt"), cfg.network);
  transfer::TransferConfig tc = cfg.transfer;
  tc.seed = stage_seed(cfg.seed, "transfer");
  const auto res = transfer::fine_tune(source, demo, stats, tc, cfg.source.gravity);
  JsonlLog log(s.path("transfer/loss.jsonl"));
  for (std::size_t e = 0; e < res.loss.size(); ++e) log.write({{"epoch", e}, {"loss", res.loss[e]}});
  log.write({{"windows", res.windows}, {"train_windows", res.train_windows}, {"frozen", res.frozen},
             {"trainable", res.trainable}, {"holdout_before", res.holdout_before}, {"holdout_after", res.holdout_after}});
  s.say("  " + std::to_string(res.windows) + " windows, loss " + format_double(res.loss.front()) + " -> " +
        format_double(res.loss.back()));
  s.produced("transfer/loss.jsonl");
  nn::save(res.weights, s.path("transfer/tl.ckpt"));
  s.produced("transfer/tl.ckpt");
}

inline void stage_rl(const StageContext& s) {
  const auto& cfg = s.cfg;
  const auto stats = load_stats(s.path("bc/norm_stats.json"));
  const nn::NetworkWeights tl = nn::load(s.path("transfer/tl.ckpt"), cfg.network);
  const rl::Environment env = cfg.rl_environment();
  JsonlLog log(s.path("rl/history.jsonl"));
  const auto res = rl::train_td3(env, tl, stats, cfg.td3, stage_seed(cfg.seed, "rl"),
                                 [&](const rl::EpisodeLog& e, const rl::EvalLog* ev) {
                                   Json rec{{"episode", e.episode}, {"return", e.ret},       {"q0", e.q0},
                                            {"sigma_eff", e.sigma}, {"steps", e.steps}, {"terminated", e.terminated}};
                                   if (ev)
                                     rec["eval"] = {{"return", ev->ret}, {"pqr_mse_rad2ps2", ev->pqr_mse},
                                                    {"completed", ev->completed}};
                                   log.write(rec);
                                   if (ev)
                                     s.say("  episode " + std::to_string(e.episode + 1) + " eval return " +
                                           format_double(ev->ret));
                                 });
  log.write({{"best_return", res.best_return}, {"budget_exhausted", res.budget_exhausted}});
  s.produced("rl/history.jsonl");
  nn::save(res.best_actor, s.path("rl/actor.ckpt"));
  s.produced("rl/actor.ckpt");
  nn::save(res.final.actor, s.path("rl/actor_final.ckpt"));
  nn::save(res.final.critic1, s.path("rl/critic1.ckpt"));
  nn::save(res.final.critic2, s.path("rl/critic2.ckpt"));
  for (const char* f : {"rl/actor_final.ckpt", "rl/critic1.ckpt", "rl/critic2.ckpt"}) s.produced(f);
}

inline nn::Mlp load_actor(const ExperimentConfig& cfg, const fs::path& path) {
  std::mt19937_64 rng(0);
  nn::Mlp actor = nn::Mlp::initialize(
      {rl::kObsSize, cfg.td3.actor_hidden, rl::kActionSize, nn::Activation::Relu, nn::Activation::Tanh}, rng);
  nn::load_into(actor, path);
  return actor;
}

}  // namespace detail

/// Every metrics row of a finished run. Learners fly the eval trim with the
/// expert bootstrap; the updated-target rows use the RL episode rules
/// (termination enabled) so TL and TL+RL are scored identically.
inline MetricsTable evaluate_run(const ExperimentConfig& cfg, const fs::path& dir, const fs::path& traj_dir = {}) {
  MetricsTable t;
  const std::string man = expert::to_string(cfg.maneuver);
  const auto stats = load_stats(dir / "bc/norm_stats.json");
  auto record = [&](const std::string& stage, const expert::Demonstration& d, bool completed) {
    t.add(man, stage, pqr_mse(d), completed);
    if (!traj_dir.empty()) export_trajectory(d, traj_dir / (stage + ".csv"));
  };
  auto full = [](const expert::Demonstration& d) { return !d.diverged && d.size() == d.planned_length; };
  const imitation::Scenario src = cfg.scenario(cfg.source), tgt = cfg.scenario(cfg.target());

  const auto ex = expert::run_expert(cfg.eval_trim.vt, cfg.eval_trim.altitude, src.profile(), cfg.source, cfg.gains);
  record("expert", ex, full(ex));
  auto learner = [&](const std::string& stage, const fs::path& ckpt, const imitation::Scenario& sc) {
    const auto w = nn::load(ckpt, cfg.network);
    const auto r = imitation::learner_rollout(w, stats, sc, cfg.eval_trim);
    record(stage, r.demo, full(r.demo));
  };
  learner("bc", dir / "bc/bc.ckpt", src);
  for (int it = 1;; ++it) {
    const fs::path p = dir / ("dagger/iter_" + std::to_string(it) + ".ckpt");
    if (!fs::exists(p)) break;
    learner("dagger-iter-" + std::to_string(it), p, src);
  }
  learner("dagger-final", dir / "dagger/dagger.ckpt", src);
  learner("source-on-target", dir / "dagger/dagger.ckpt", tgt);
  learner("tl-on-target", dir / "transfer/tl.ckpt", tgt);

  const auto tl = nn::load(dir / "transfer/tl.ckpt", cfg.network);
  const rl::Environment env = cfg.rl_environment();
  const auto alone = rl::evaluate_tl(env, tl, stats, cfg.td3);
  record("tl-on-updated-target", alone.demo, alone.completed());
  const nn::Mlp actor = detail::load_actor(cfg, dir / "rl/actor.ckpt");
  const auto both = rl::evaluate_actor(env, tl, stats, actor, cfg.td3);
  record("tl-rl-on-updated-target", both.demo, both.completed());
  return t;
}

namespace detail {

inline void stage_eval(const StageContext& s) {
  const MetricsTable t = evaluate_run(s.cfg, s.dir, s.dir / "eval/trajectories");
  for (const auto& r : t.rows) s.produced("eval/trajectories/" + r.stage + ".csv");
  export_metrics(t, s.path("eval/metrics.json"));
  s.produced("eval/metrics.json");
}

inline bool outputs_intact(const fs::path& dir, const StageRecord& rec) {
  for (const auto& o : rec.outputs) {
    const fs::path p = dir / o.path;
    if (!fs::exists(p) || fs::file_size(p) != o.bytes || file_crc32(p) != o.crc32) return false;
  }
  return true;
}

}  // namespace detail

/// Runs stages [0, until] in order, writing manifest.json after each one.
/// A stage is reused when the manifest shows it completed under the same key
/// and all its outputs still match their checksums.
inline Manifest run_pipeline(const ExperimentConfig& cfg, const fs::path& dir, const PipelineOptions& opts = {}) {
  require(opts.until >= 0 && opts.until < static_cast<int>(stage_names().size()), ErrorKind::InvalidArgument,
          "no such stage");
  fs::create_directories(dir);
  const Json cj = config_json(cfg);
  write_text(dir / "config_resolved.json", cj.dump(2) + "\n");
  const std::optional<Manifest> previous = opts.resume ? read_manifest(dir) : std::nullopt;

  Manifest m;
  m.config_hash = hex64(fnv1a(cj.dump()));
  // Config sections each stage reads, cumulative.
  const std::vector<std::vector<std::string>> sections{
      {"seed", "scenario", "expert", "data", "network", "bc"},
      {"dagger"},
      {"transfer"},
      {"rl"},
      {}};
  const std::vector<std::string> aircraft_parts{"source", "source", "target", "updated_target", ""};
  using StageFn = void (*)(const detail::StageContext&);
  const StageFn fns[] = {detail::stage_bc, detail::stage_dagger, detail::stage_transfer, detail::stage_rl,
                         detail::stage_eval};

  std::string chain;
  for (int i = 0; i <= opts.until; ++i) {
    const std::string& name = stage_names()[static_cast<std::size_t>(i)];
    for (const auto& sec : sections[static_cast<std::size_t>(i)]) chain += cj[sec].dump();
    if (!aircraft_parts[static_cast<std::size_t>(i)].empty()) chain += cj["aircraft"][aircraft_parts[i]].dump();
    if (i > 0)
      for (const auto& o : m.stages.back().outputs) chain += o.path + hex32(o.crc32);
    StageRecord rec;
    rec.name = name;
    rec.key = hex64(fnv1a(chain));

    const StageRecord* old = previous ? previous->find(name) : nullptr;
    if (old && old->status == "completed" && old->key == rec.key && detail::outputs_intact(dir, *old)) {
      if (opts.progress) *opts.progress << "[" << name << "] up to date, reusing outputs" << std::endl;
      m.stages.push_back(*old);
      continue;
    }
    if (opts.progress) *opts.progress << "[" << name << "] running" << std::endl;
    rec.status = "completed";
    try {
      fns[i]({cfg, dir, &rec.outputs, opts.progress});
    } catch (const std::exception& e) {
      rec.status = "failed";
      rec.error = e.what();
    }
    m.stages.push_back(rec);
    write_text(dir / "manifest.json", manifest_json(m).dump(2) + "\n");
    if (rec.status != "completed") {
      if (opts.progress) *opts.progress << "[" << name << "] failed: " << rec.error << std::endl;
      return m;
    }
  }
  write_text(dir / "manifest.json", manifest_json(m).dump(2) + "\n");
  return m;
}

}  // namespace mangen::harness
