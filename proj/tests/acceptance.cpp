// Acceptance run: one PASS/FAIL line per criterion on stdout, progress on stderr.
// Usage: acceptance --configs DIR --work DIR [--only N]...

#include <CLI11.hpp>
#include <chrono>
#include <fstream>
#include <iostream>
#include <random>
#include <set>

#include "mangen/harness/pipeline.hpp"

using namespace mangen;
namespace fs = std::filesystem;
using nn::Matrix;
using nn::Vector;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(4) << v;
  return os.str();
}

std::vector<harness::Json> read_jsonl(const fs::path& p) {
  std::ifstream in(p);
  require(in.good(), ErrorKind::IoError, "cannot read " + p.string());
  std::vector<harness::Json> out;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(harness::Json::parse(line));
  return out;
}

std::string slurp(const fs::path& p) { return nn::checkpoint::read_file(p); }

// ---------------------------------------------------------------- 1 simulator

Outcome simulator() {
  using namespace flight;
  const AircraftParams p;
  auto run = [&](AircraftState x, const SurfaceState& s, double dt) {
    const int n = static_cast<int>(std::lround(1.0 / dt));
    for (int i = 0; i < n; ++i) x = rk4(x, s, p, dt);
    return x;
  };
  auto dist = [](const AircraftState& a, const AircraftState& b) {
    const auto va = a.to_array(), vb = b.to_array();
    double e = 0.0;
    for (std::size_t i = 0; i < va.size(); ++i) e = std::max(e, std::abs(va[i] - vb[i]));
    return e;
  };
  const auto t = trim(750, 15000, p);
  auto x0 = t.state;
  x0.alpha += 0.03;
  x0.p = 0.2;
  x0.beta = 0.01;
  const auto ref = run(x0, t.control, 0.001);
  const double order = std::log2(dist(run(x0, t.control, 0.04), ref) / dist(run(x0, t.control, 0.02), ref));

  int trimmed = 0, untrimmable = 0;
  double worst = 0.0;
  for (const auto& tp : imitation::default_trim_grid()) {
    try {
      const auto r = trim(tp.vt, tp.altitude, p);
      worst = std::max({worst, r.residual_norm, trim_residual_norm(r.state, r.control, p)});
      ++trimmed;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::TrimNotFound) throw;
      ++untrimmable;
    }
  }

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  SurfaceState s{};
  long violations = 0;
  const auto rate = p.rate_limits();
  for (int i = 0; i < 1000000; ++i) {
    const ControlInput c{u(rng), 40.0 * u(rng), 40.0 * u(rng), 40.0 * u(rng)};
    const SurfaceState n = clamp_and_rate_limit(c, s, p, 0.02);
    bool ok = ControlLimits::within(n);
    const auto a = n.to_array(), b = s.to_array();
    for (int k = 0; k < 4; ++k) ok = ok && std::abs(a[k] - b[k]) <= rate[k] * 0.02 + 1e-12;
    violations += !ok;
    s = n;
  }
  return {order >= 3.5 && order <= 4.5 && trimmed > 0 && worst < 1e-8 && violations == 0,
          "order " + fmt(order) + ", " + std::to_string(trimmed) + " trims (" + std::to_string(untrimmable) +
              " without trim) max residual " + fmt(worst) + ", " + std::to_string(violations) +
              " actuator violations in 1e6 steps"};
}

// ---------------------------------------------------------------- 2 expert

Outcome expert_quality() {
  const flight::AircraftParams p;
  std::vector<std::string> failures;
  double worst = 0.0;
  int runs = 0;
  for (auto m : {expert::Maneuver::SplitS, expert::Maneuver::Chandelle}) {
    const auto prof = expert::reference_profile(m, {}, 705, 0.02);
    for (const auto& tp : imitation::default_trim_grid()) {
      std::string why;
      try {
        const auto d = expert::run_expert(tp.vt, tp.altitude, prof, p);
        const double e = imitation::e_pqr({d});
        worst = std::max(worst, e);
        if (d.diverged || d.size() != prof.size()) why = "incomplete";
        else if (!(e < 0.02)) why = "e_pqr " + fmt(e);
      } catch (const Error& e) {
        why = e.what();
      }
      ++runs;
      if (!why.empty())
        failures.push_back(expert::to_string(m) + "@" + fmt(tp.vt) + "/" + fmt(tp.altitude) + " " + why);
    }
  }
  std::string d = std::to_string(runs) + " runs, worst e_pqr " + fmt(worst) + ", failures " +
                  std::to_string(failures.size());
  for (std::size_t i = 0; i < std::min<std::size_t>(failures.size(), 3); ++i) d += "; " + failures[i];
  return {failures.empty(), d};
}

// ---------------------------------------------------------------- 3 gradients

Outcome gradients() {
  const nn::NetworkSpec spec;  // full-size network
  const auto w = nn::NetworkWeights::initialize(spec, 3);
  std::mt19937_64 rng(1);
  std::vector<Matrix> wins;
  for (int b = 0; b < 2; ++b) wins.push_back(Matrix::NullaryExpr(spec.window, spec.features, [&] { return nn::uniform01(rng); }));
  const auto x = nn::SequenceBatch::from_windows(wins);
  const Matrix tg = Matrix::NullaryExpr(spec.head.back(), 2, [&] { return nn::uniform01(rng); });
  const Vector g = nn::gradient(w, x, tg, 0.5);
  std::string d;
  bool ok = true;
  for (bool recurrent : {true, false}) {
    std::vector<Eigen::Index> idx;
    for (const auto& s : w.layout.slots)
      if (s.recurrent() == recurrent)
        for (std::size_t i = 0; i < s.count; ++i) idx.push_back(static_cast<Eigen::Index>(s.offset + i));
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min<std::size_t>(idx.size(), 200));
    double worst = 0.0;
    for (Eigen::Index i : idx) {
      auto wp = w, wm = w;
      wp.params[i] += 1e-4;
      wm.params[i] -= 1e-4;
      const double fd = (nn::batch_loss(nn::composite_forward(wp, x), x, tg, 0.5) -
                         nn::batch_loss(nn::composite_forward(wm, x), x, tg, 0.5)) / 2e-4;
      // floored: near-zero gradients are compared absolutely
      worst = std::max(worst, std::abs(fd - g[i]) / std::max({1e-6, std::abs(fd), std::abs(g[i])}));
    }
    ok = ok && idx.size() >= 200 && worst < 1e-4;
    d += std::string(d.empty() ? "" : ", ") + (recurrent ? "lstm" : "dense") + " " + std::to_string(idx.size()) +
         " params max rel err " + fmt(worst);
  }
  return {ok, d};
}

// ---------------------------------------------------------------- 4 behavior cloning

Outcome bc_sanity(const fs::path& run) {
  const auto demo = expert::run_expert(750, 15000, expert::reference_profile(expert::Maneuver::SplitS, {}, 705, 0.02), {});
  const auto ds = imitation::build_dataset({demo});
  const auto all = imitation::window_starts(ds, 50, 3);
  imitation::WindowedDataset w;
  w.window = 50;
  w.train.assign(all.begin(), all.begin() + 200);
  w.validation = w.train;
  imitation::TrainConfig tc;
  tc.epochs = 500;
  tc.batch = 32;
  tc.lr = 1e-3;
  tc.seed = 1;
  const auto r = imitation::train_bc(ds, w, nn::NetworkSpec{}, tc);
  const auto reached = std::find_if(r.train_loss.begin(), r.train_loss.end(), [](double l) { return l < 1e-3; });
  const bool overfit = reached != r.train_loss.end();

  double first = std::numeric_limits<double>::quiet_NaN(), best = first;
  for (const auto& rec : read_jsonl(run / "bc/train_log.jsonl")) {
    if (rec.contains("epoch") && rec.at("epoch") == 0) first = rec.at("validation_loss");
    if (rec.contains("best_validation_loss")) best = rec.at("best_validation_loss");
  }
  std::string d = overfit ? "200-window loss < 1e-3 at epoch " + std::to_string(reached - r.train_loss.begin() + 1)
                          : "200-window loss only reached " + fmt(*std::min_element(r.train_loss.begin(), r.train_loss.end()));
  d += ", full BC val epoch 1 " + fmt(first) + " best " + fmt(best);
  return {overfit && best < first, d};
}

// ---------------------------------------------------------------- 5 DAgger trend

Outcome dagger_trend(const harness::MetricsTable& m) {
  const auto* bc = m.find("split-s", "bc");
  const auto* i1 = m.find("split-s", "dagger-iter-1");
  const auto* i2 = m.find("split-s", "dagger-iter-2");
  if (!bc || !i1 || !i2) return {false, "missing bc / dagger-iter-1 / dagger-iter-2 rows"};
  const double a = bc->mse.pqr, b = i1->mse.pqr, c = i2->mse.pqr;
  return {a > b && b > c && c < 0.25 * a,
          "pqr-mse bc " + fmt(a) + " -> iter1 " + fmt(b) + " -> iter2 " + fmt(c) + " (ratio " + fmt(c / a) + ")"};
}

// ---------------------------------------------------------------- 6 lambda and c_g

Outcome lambda_and_gain() {
  using imitation::switching_lambda;
  const imitation::Rates ref{1.0, 0.4, 0.0};
  const bool lam = switching_lambda({0.0, 0.0, 0.0}, ref, 0.1) == 1 && switching_lambda({0.1, 0.0, 0.0}, ref, 0.1) == 0 &&
                   switching_lambda({0.09, 0.0, 0.0}, ref, 0.1) == 1 &&
                   switching_lambda({0.01, 0.05, 0.001}, ref, 0.1) == 0 &&
                   switching_lambda({0.0, 0.0, 0.004}, ref, 0.1) == 1 &&
                   switching_lambda({0.0, 0.0, 0.006}, ref, 0.1) == 0;

  imitation::Scenario sc;
  sc.samples = 200;
  const auto ds = imitation::build_dataset({expert::run_expert(750, 15000, sc.profile(), sc.params)});
  nn::NetworkSpec spec;
  spec.window = 20;
  spec.encoder = {16};
  spec.decoder = {16};
  spec.head = {16, 4};
  const imitation::NetworkPolicy policy{nn::NetworkWeights::initialize(spec, 3), ds.stats};
  const std::vector<imitation::TrimPoint> trims{{750, 15000}, {700, 12000}};
  const std::vector<double> grid{0.1, 0.5, 1.0};
  const auto res = imitation::confidence_gain_search(policy, ds.stats, sc, trims, grid, 20);
  // exhaustive: every candidate scored on its own
  std::vector<double> sums;
  for (double c : grid) sums.push_back(imitation::confidence_gain_search(policy, ds.stats, sc, trims, {c}, 20).lambda_sums[0]);
  const auto best = static_cast<std::size_t>(std::max_element(sums.begin(), sums.end()) - sums.begin());
  return {lam && res.c_g == grid[best] && res.lambda_sums == sums,
          std::string("lambda examples ") + (lam ? "exact" : "wrong") + ", sums " + fmt(sums[0]) + "/" + fmt(sums[1]) +
              "/" + fmt(sums[2]) + " -> c_g " + fmt(res.c_g)};
}

// ---------------------------------------------------------------- 7 transfer

Outcome transfer_check(const harness::ExperimentConfig& cfg, const fs::path& run, const harness::MetricsTable& m) {
  std::size_t windows = 0;
  for (const auto& rec : read_jsonl(run / "transfer/loss.jsonl"))
    if (rec.contains("windows")) windows = rec.at("windows");
  const auto src = nn::load(run / "dagger/dagger.ckpt", cfg.network);
  const auto tl = nn::load(run / "transfer/tl.ckpt", cfg.network);
  const auto mask = cfg.transfer.freeze.empty() ? transfer::default_freeze_mask(cfg.network)
                                                : transfer::freeze_mask(src.layout, cfg.transfer.freeze);
  std::size_t frozen = 0, moved = 0;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) {
      ++frozen;
      moved += src.params[static_cast<Eigen::Index>(i)] != tl.params[static_cast<Eigen::Index>(i)];
    }
  const auto* before = m.find("split-s", "source-on-target");
  const auto* after = m.find("split-s", "tl-on-target");
  if (!before || !after) return {false, "missing source-on-target / tl-on-target rows"};
  const double gain = 1.0 - after->mse.pqr / before->mse.pqr;
  return {windows == 669 && frozen > 0 && moved == 0 && gain >= 0.3,
          std::to_string(windows) + " windows, " + std::to_string(moved) + " of " + std::to_string(frozen) +
              " frozen params changed, pqr-mse source " + fmt(before->mse.pqr) + " -> TL " + fmt(after->mse.pqr) +
              " (" + fmt(100.0 * gain) + "% better)"};
}

// ---------------------------------------------------------------- 8 additive RL

bool td3_cadence() {
  rl::Td3Config cfg;
  cfg.batch = 8;
  cfg.actor_hidden = {16};
  cfg.critic_hidden = {16};
  auto ac = rl::ActorCritic::create(cfg, 1);
  std::mt19937_64 rng(2);
  bool ok = true;
  for (long long step = 1; step <= 32; ++step) {
    rl::Minibatch b;
    b.obs = Matrix::NullaryExpr(rl::kObsSize, cfg.batch, [&] { return nn::uniform(rng, -1.0, 1.0); });
    b.action = Matrix::NullaryExpr(rl::kActionSize, cfg.batch, [&] { return nn::uniform(rng, -1.0, 1.0); });
    b.next_obs = Matrix::NullaryExpr(rl::kObsSize, cfg.batch, [&] { return nn::uniform(rng, -1.0, 1.0); });
    b.reward = Vector::NullaryExpr(cfg.batch, [&] { return nn::uniform(rng, -0.02, 0.02); });
    b.done = Vector::Zero(cfg.batch);
    const Vector actor = ac.actor.params, c1 = ac.critic1.params, ta = ac.actor_target.params,
                 t1 = ac.critic1_target.params, t2 = ac.critic2_target.params;
    rl::td3_update(ac, b, cfg, step, rng);
    ok = ok && (ac.critic1.params != c1);
    ok = ok && ((step % 8 == 0) == (ac.actor.params != actor));
    if (step % 4 == 0) {
      ok = ok && ((ac.actor_target.params - (0.95 * ta + 0.05 * ac.actor.params)).cwiseAbs().maxCoeff() < 1e-15);
      ok = ok && ((ac.critic1_target.params - (0.95 * t1 + 0.05 * ac.critic1.params)).cwiseAbs().maxCoeff() < 1e-15);
      ok = ok && ((ac.critic2_target.params - (0.95 * t2 + 0.05 * ac.critic2.params)).cwiseAbs().maxCoeff() < 1e-15);
    } else {
      ok = ok && ac.actor_target.params == ta && ac.critic1_target.params == t1 && ac.critic2_target.params == t2;
    }
  }
  return ok;
}

Outcome additive_rl(const fs::path& run, const harness::MetricsTable& m) {
  const flight::ControlInput tl{0.5, -2.0, 1.0, 0.5};
  Vector a = Vector::Zero(4);
  a[0] = 0.4;
  const bool unit = std::abs(rl::compose(tl, a, 0.1).throttle - 0.52) < 1e-12 &&
                    std::abs(rl::reward(0.02, {0.0, 0.0, 0.0}) - 0.02) < 1e-12 &&
                    std::abs(rl::reward(0.02, {0.5, 0.3, 0.2})) < 1e-12 &&
                    std::abs(rl::reward(0.02, {1.0, 0.5, 0.5}) + 0.02) < 1e-12;
  const bool cadence = td3_cadence();

  const auto* alone = m.find("split-s", "tl-on-updated-target");
  const auto* both = m.find("split-s", "tl-rl-on-updated-target");
  if (!alone || !both) return {false, "missing updated-target rows"};
  std::vector<double> returns;
  for (const auto& rec : read_jsonl(run / "rl/history.jsonl"))
    if (rec.contains("episode")) returns.push_back(rec.at("return"));
  const std::size_t n = std::max<std::size_t>(1, returns.size() / 10);
  double lead = 0.0, trail = 0.0;
  for (std::size_t i = 0; i < n && returns.size() >= n; ++i) {
    lead += returns[i] / static_cast<double>(n);
    trail += returns[returns.size() - n + i] / static_cast<double>(n);
  }
  const bool better = both->mse.pqr < alone->mse.pqr;
  return {unit && cadence && better && both->completed && returns.size() >= 10 && trail > lead,
          std::string("unit examples ") + (unit ? "exact" : "wrong") + ", cadence " + (cadence ? "ok" : "wrong") +
              ", pqr-mse TL " + fmt(alone->mse.pqr) + " TL+RL " + fmt(both->mse.pqr) +
              (both->completed ? " (completed)" : " (terminated)") + ", return first/last 10% " + fmt(lead) + " / " +
              fmt(trail) + " over " + std::to_string(returns.size()) + " episodes"};
}

// ---------------------------------------------------------------- 9 determinism

Outcome determinism(const harness::ExperimentConfig& cfg, const fs::path& work) {
  const fs::path a = work / "determinism_a", b = work / "determinism_b";
  for (const auto& d : {a, b}) {
    fs::remove_all(d);
    harness::PipelineOptions o;
    o.resume = false;
    o.progress = &std::cerr;
    const auto man = harness::run_pipeline(cfg, d, o);
    if (!man.ok()) return {false, "pipeline failed: " + man.stages.back().error};
  }
  std::size_t compared = 0;
  std::vector<std::string> differ;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), a);
    if (e.path().extension() != ".ckpt" && rel != fs::path("eval/metrics.json")) continue;
    ++compared;
    if (!fs::exists(b / rel) || slurp(e.path()) != slurp(b / rel)) differ.push_back(rel.string());
  }
  std::string d = std::to_string(compared) + " checkpoints and metrics files compared, " +
                  std::to_string(differ.size()) + " differ";
  if (!differ.empty()) d += " (first: " + differ.front() + ")";
  return {compared > 1 && differ.empty(), d};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::string configs, work;
  std::vector<int> only;
  app.add_option("--configs", configs, "directory holding acceptance.yaml and smoke.yaml")->required();
  app.add_option("--work", work, "scratch directory for pipeline runs")->required();
  app.add_option("--only", only, "run just these criteria");
  CLI11_PARSE(app, argc, argv);
  const std::set<int> selected(only.begin(), only.end());
  auto wanted = [&](int c) { return selected.empty() || selected.count(c); };

  const fs::path cfg_dir(configs), work_dir(work);
  fs::create_directories(work_dir);
  const auto cfg = harness::load_config(cfg_dir / "acceptance.yaml");
  const fs::path run = work_dir / "acceptance";

  // Criteria 4, 5, 7 and 8 read the trained pipeline outputs; reuse them when intact.
  std::optional<harness::MetricsTable> metrics;
  std::string pipeline_error;
  if (wanted(4) || wanted(5) || wanted(7) || wanted(8)) {
    harness::PipelineOptions o;
    o.progress = &std::cerr;
    const auto man = harness::run_pipeline(cfg, run, o);
    if (man.ok())
      metrics = harness::load_metrics(run / "eval/metrics.json");
    else
      pipeline_error = "pipeline failed: " + (man.stages.empty() ? std::string("?") : man.stages.back().error);
  }

  int failed = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& check) {
    if (!wanted(id)) return;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " " << name << ": " << o.detail << " ["
              << fmt(secs) << " s]" << std::endl;
  };
  auto with_metrics = [&](const std::function<Outcome(const harness::MetricsTable&)>& f) {
    return [&, f]() { return metrics ? f(*metrics) : Outcome{false, pipeline_error}; };
  };

  report(1, "simulator", simulator);
  report(2, "expert", expert_quality);
  report(3, "gradients", gradients);
  report(4, "behavior cloning", [&] { return metrics ? bc_sanity(run) : Outcome{false, pipeline_error}; });
  report(5, "dagger trend", with_metrics(dagger_trend));
  report(6, "lambda and confidence gain", lambda_and_gain);
  report(7, "transfer", with_metrics([&](const harness::MetricsTable& m) { return transfer_check(cfg, run, m); }));
  report(8, "additive rl", with_metrics([&](const harness::MetricsTable& m) { return additive_rl(run, m); }));
  report(9, "determinism", [&] { return determinism(harness::load_config(cfg_dir / "smoke.yaml"), work_dir); });
  return failed == 0 ? 0 : 1;
}
