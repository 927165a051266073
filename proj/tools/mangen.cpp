// mangen: command-line front end for the maneuver-generation pipeline.
//
// Exit codes: 0 success, 2 configuration error, 3 stage failure.

#include <CLI11.hpp>

#include <cstdio>
#include <iomanip>

#include "mangen/harness/pipeline.hpp"

namespace {

using namespace mangen;
using harness::Json;
namespace fs = std::filesystem;

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kStageFailure = 3;

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool no_resume = false;
};

void add_common(CLI::App* sub, CommonArgs& a) {
  sub->add_option("--config", a.config, "experiment config (YAML)")->required()->check(CLI::ExistingFile);
  sub->add_option("--seed", a.seed, "override the config seed");
  sub->add_option("--out", a.out, std::string("run directory (default: config output_dir, then $") +
                                      harness::kOutputRootEnv + "/run-<seed>)");
}

harness::ExperimentConfig load(const CommonArgs& a) {
  harness::ExperimentConfig cfg = harness::load_config(a.config);
  if (a.seed) {
    cfg.seed = *a.seed;
    cfg.has_seed = true;
  }
  require(cfg.has_seed, ErrorKind::ConfigError, "a seed is required (config 'seed' or --seed)");
  return cfg;
}

void print_metrics(const harness::MetricsTable& t) {
  std::printf("%-10s %-26s %12s %12s %12s %12s %s\n", "maneuver", "stage", "P-mse", "Q-mse", "R-mse", "PQR-mse", "done");
  for (const auto& r : t.rows)
    std::printf("%-10s %-26s %12.6g %12.6g %12.6g %12.6g %s\n", r.maneuver.c_str(), r.stage.c_str(), r.mse.p, r.mse.q,
                r.mse.r, r.mse.pqr, r.completed ? "yes" : "no");
}

int cmd_trim(const CommonArgs& a) {
  const auto cfg = load(a);
  const fs::path dir = harness::resolve_output_dir(cfg, a.out);
  Json out = Json::array();
  int failures = 0;
  const std::pair<const char*, flight::AircraftParams> airframes[] = {
      {"source", cfg.source}, {"target", cfg.target()}, {"updated_target", cfg.updated()}};
  for (const auto& [label, params] : airframes)
    for (const auto& tp : cfg.data_grid) {
      Json rec{{"aircraft", label}, {"vt_fts", tp.vt}, {"alt_ft", tp.altitude}};
      try {
        const auto tr = flight::trim(tp.vt, tp.altitude, params);
        rec["alpha_deg"] = tr.state.alpha * kRadToDeg;
        rec["elevator_deg"] = tr.control.elevator;
        rec["throttle"] = tr.control.throttle;
        rec["residual"] = tr.residual_norm;
        rec["iterations"] = tr.iterations;
      } catch (const Error& e) {
        rec["error"] = e.what();
        ++failures;
      }
      out.push_back(rec);
    }
  harness::write_text(dir / "trim.json", out.dump(2) + "\n");
  std::printf("%zu trim points, %d without trim; wrote %s\n", out.size(), failures, (dir / "trim.json").c_str());
  return failures == static_cast<int>(out.size()) ? kStageFailure : kOk;
}

int cmd_gen_data(const CommonArgs& a) {
  const auto cfg = load(a);
  const fs::path dir = harness::resolve_output_dir(cfg, a.out);
  const imitation::Scenario sc = cfg.scenario(cfg.source);
  std::vector<expert::Demonstration> demos;
  Json report = Json::array();
  int failures = 0;
  for (const auto& tp : cfg.data_grid) {
    Json rec{{"vt_fts", tp.vt}, {"alt_ft", tp.altitude}};
    try {
      auto d = expert::run_expert(tp.vt, tp.altitude, sc.profile(), cfg.source, cfg.gains);
      rec["e_pqr_radps"] = imitation::e_pqr({d});
      rec["diverged"] = d.diverged;
      if (d.diverged) ++failures;
      demos.push_back(std::move(d));
    } catch (const Error& e) {
      rec["error"] = e.what();
      ++failures;
    }
    report.push_back(rec);
  }
  harness::save_dataset(demos, dir / "data/expert_dataset.csv");
  harness::write_text(dir / "data/expert_report.json", report.dump(2) + "\n");
  std::printf("%zu demonstrations, %d failures; wrote %s\n", demos.size(), failures,
              (dir / "data/expert_dataset.csv").c_str());
  return failures ? kStageFailure : kOk;
}

int cmd_stages(const CommonArgs& a, int until) {
  const auto cfg = load(a);
  const fs::path dir = harness::resolve_output_dir(cfg, a.out);
  harness::PipelineOptions opts;
  opts.until = until;
  opts.resume = !a.no_resume;
  const auto m = harness::run_pipeline(cfg, dir, opts);
  if (!m.ok()) return kStageFailure;
  if (until == 4) print_metrics(harness::load_metrics(dir / "eval/metrics.json"));
  std::printf("run directory: %s\n", dir.c_str());
  return kOk;
}

int cmd_eval(const CommonArgs& a) {
  const auto cfg = load(a);
  const fs::path dir = harness::resolve_output_dir(cfg, a.out);
  const auto m = harness::read_manifest(dir);
  require(m.has_value(), ErrorKind::IoError, "no manifest in " + dir.string() + "; run the training stages first");
  for (const char* s : {"bc", "dagger", "transfer", "rl"}) {
    const auto* rec = m->find(s);
    require(rec && rec->status == "completed", ErrorKind::IoError, std::string("stage '") + s + "' has not completed");
  }
  const auto t = harness::evaluate_run(cfg, dir, dir / "eval/trajectories");
  harness::export_metrics(t, dir / "eval/metrics.json");
  print_metrics(t);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Maneuver generation: behavior cloning, C-DAgger, transfer and additive TD3 on a 6-DOF simulator"};
  app.require_subcommand(1);
  CommonArgs args;
  struct Sub {
    const char* name;
    const char* help;
    int until;  // -1: not a pipeline stage command
  };
  const Sub subs[] = {{"trim", "trim the source, target and updated airframes over the data grid", -1},
                      {"gen-data", "fly the expert over the data grid and write the dataset", -1},
                      {"train-bc", "behavior cloning (stage 1)", 0},
                      {"dagger", "C-DAgger refinement (stages 1-2)", 1},
                      {"transfer", "fine-tune on the target airframe (stages 1-3)", 2},
                      {"train-rl", "additive TD3 on the updated airframe (stages 1-4)", 3},
                      {"eval", "score a finished run and write the metrics table", -1},
                      {"pipeline", "all stages plus evaluation", 4}};
  std::vector<std::pair<CLI::App*, Sub>> cmds;
  for (const auto& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    add_common(sub, args);
    if (s.until >= 0) sub->add_flag("--no-resume", args.no_resume, "recompute stages even if their outputs are intact");
    cmds.emplace_back(sub, s);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    for (const auto& [sub, s] : cmds) {
      if (!sub->parsed()) continue;
      const std::string name = s.name;
      if (name == "trim") return cmd_trim(args);
      if (name == "gen-data") return cmd_gen_data(args);
      if (name == "eval") return cmd_eval(args);
      return cmd_stages(args, s.until);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.kind() == ErrorKind::ConfigError ? kConfigError : kStageFailure;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kStageFailure;
  }
  return kConfigError;
}
