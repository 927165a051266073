#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "mangen/harness/metrics.hpp"
#include "mangen/imitation/dataset.hpp"
#include "mangen/nn/checkpoint.hpp"

namespace mangen::harness {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

/// Shortest decimal that reads back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, res.ptr};
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  require(res.ec == std::errc() && res.ptr == s.data() + s.size(), ErrorKind::IoError,
          "bad number '" + std::string(s) + "'");
  return v;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i)
    if (i == line.size() || line[i] == ',') {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  return out;
}

inline std::uint32_t file_crc32(const fs::path& path) {
  const std::string bytes = nn::checkpoint::read_file(path);
  return nn::checkpoint::crc32_of(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size());
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  nn::checkpoint::write_atomic(path, text);
}

// ---------------------------------------------------------------- trajectory

inline const std::vector<std::string>& trajectory_columns() {
  static const std::vector<std::string> cols{
      "t_s",          "vt_fts",      "alpha_rad",    "beta_rad",     "phi_rad",     "theta_rad",   "psi_rad",
      "p_radps",      "q_radps",     "r_radps",      "pn_ft",        "pe_ft",       "pd_ft",       "throttle_pos",
      "elevator_pos_deg", "aileron_pos_deg", "rudder_pos_deg", "throttle_cmd", "elevator_cmd_deg", "aileron_cmd_deg",
      "rudder_cmd_deg", "p_ref_radps", "q_ref_radps", "r_ref_radps", "lambda"};
  return cols;
}

inline std::string trajectory_csv(const expert::Demonstration& d) {
  std::string out;
  const auto& cols = trajectory_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
  out += '\n';
  for (const auto& s : d.samples) {
    const auto x = s.state;
    const double row[] = {s.time, x.vt, x.alpha, x.beta, x.phi, x.theta, x.psi, x.p, x.q, x.r, x.pn, x.pe, x.pd,
                          s.surfaces.throttle, s.surfaces.elevator, s.surfaces.aileron, s.surfaces.rudder,
                          s.command.throttle, s.command.elevator, s.command.aileron, s.command.rudder,
                          s.reference[0], s.reference[1], s.reference[2], s.lambda};
    for (std::size_t i = 0; i < std::size(row); ++i) {
      if (i) out += ',';
      out += format_double(row[i]);
    }
    out += '\n';
  }
  return out;
}

inline void export_trajectory(const expert::Demonstration& d, const fs::path& path) {
  try {
    write_text(path, trajectory_csv(d));
  } catch (const fs::filesystem_error& e) {
    fail(ErrorKind::IoError, e.what());
  }
}

/// Reads a trajectory export back. Only what the file carries is restored
/// (no engine state, no expert labels); planned length = row count.
inline expert::Demonstration load_trajectory(const fs::path& path) {
  std::istringstream in(nn::checkpoint::read_file(path));
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::IoError, "empty trajectory file");
  require(split_csv(line).size() == trajectory_columns().size(), ErrorKind::IoError, "unexpected trajectory header");
  expert::Demonstration d;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    require(f.size() == trajectory_columns().size(), ErrorKind::IoError, "bad trajectory row");
    double v[25];
    for (std::size_t i = 0; i < 25; ++i) v[i] = parse_double(f[i]);
    expert::DemoSample s;
    s.time = v[0];
    s.state = flight::AircraftState::from_array({v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9], v[10], v[11], v[12], 0.0});
    s.surfaces = {v[13], v[14], v[15], v[16]};
    s.command = {v[17], v[18], v[19], v[20]};
    s.label = s.command;
    s.reference = {v[21], v[22], v[23]};
    s.lambda = v[24];
    d.samples.push_back(s);
  }
  if (d.size() > 1) d.dt = d.samples[1].time - d.samples[0].time;
  d.planned_length = d.size();
  return d;
}

// ------------------------------------------------------------------ datasets

/// Dataset file: "# mangen-dataset v1", one "# demo ..." line per
/// demonstration, then a CSV of every sample tagged with its demo index.
inline std::string dataset_text(const std::vector<expert::Demonstration>& demos) {
  std::ostringstream os;
  os << "# mangen-dataset v1\n";
  for (std::size_t i = 0; i < demos.size(); ++i) {
    const auto& d = demos[i];
    os << "# demo " << i << " dt_s=" << format_double(d.dt) << " trim_vt_fts=" << format_double(d.trim_vt)
       << " trim_alt_ft=" << format_double(d.trim_alt) << " params=" << (d.params_id.empty() ? "-" : d.params_id)
       << " maneuver=" << expert::to_string(d.maneuver) << " planned=" << d.planned_length
       << " diverged=" << (d.diverged ? 1 : 0) << "\n";
  }
  os << "demo,t_s,vt_fts,alpha_rad,beta_rad,phi_rad,theta_rad,psi_rad,p_radps,q_radps,r_radps,pn_ft,pe_ft,pd_ft,pow_pct,"
        "throttle_pos,elevator_pos_deg,aileron_pos_deg,rudder_pos_deg,throttle_cmd,elevator_cmd_deg,aileron_cmd_deg,"
        "rudder_cmd_deg,throttle_label,elevator_label_deg,aileron_label_deg,rudder_label_deg,p_ref_radps,q_ref_radps,"
        "r_ref_radps,lambda\n";
  for (std::size_t i = 0; i < demos.size(); ++i)
    for (const auto& s : demos[i].samples) {
      os << i;
      const auto x = s.state.to_array();
      auto put = [&](double v) { os << ',' << format_double(v); };
      put(s.time);
      for (double v : x) put(v);
      for (double v : s.surfaces.to_array()) put(v);
      for (double v : s.command.to_array()) put(v);
      for (double v : s.label.to_array()) put(v);
      for (double v : s.reference) put(v);
      put(s.lambda);
      os << '\n';
    }
  return os.str();
}

inline void save_dataset(const std::vector<expert::Demonstration>& demos, const fs::path& path) {
  write_text(path, dataset_text(demos));
}

inline std::vector<expert::Demonstration> load_dataset(const fs::path& path) {
  std::istringstream in(nn::checkpoint::read_file(path));
  std::string line;
  require(std::getline(in, line) && line == "# mangen-dataset v1", ErrorKind::IoError, "not a dataset file: " + path.string());
  std::vector<expert::Demonstration> demos;
  while (std::getline(in, line) && line.rfind("# demo ", 0) == 0) {
    std::istringstream ls(line.substr(7));
    std::size_t idx = 0;
    ls >> idx;
    require(idx == demos.size(), ErrorKind::IoError, "demo headers out of order");
    expert::Demonstration d;
    std::string kv;
    while (ls >> kv) {
      const auto eq = kv.find('=');
      require(eq != std::string::npos, ErrorKind::IoError, "bad demo header field " + kv);
      const std::string k = kv.substr(0, eq), v = kv.substr(eq + 1);
      if (k == "dt_s") d.dt = parse_double(v);
      else if (k == "trim_vt_fts") d.trim_vt = parse_double(v);
      else if (k == "trim_alt_ft") d.trim_alt = parse_double(v);
      else if (k == "params") d.params_id = v == "-" ? "" : v;
      else if (k == "maneuver") d.maneuver = expert::parse_maneuver(v);
      else if (k == "planned") d.planned_length = std::stoul(v);
      else if (k == "diverged") d.diverged = v == "1";
    }
    demos.push_back(std::move(d));
  }
  // `line` now holds the column header.
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    require(f.size() == 31, ErrorKind::IoError, "bad dataset row");
    const auto idx = static_cast<std::size_t>(parse_double(f[0]));
    require(idx < demos.size(), ErrorKind::IoError, "dataset row names an unknown demo");
    double v[30];
    for (std::size_t i = 0; i < 30; ++i) v[i] = parse_double(f[i + 1]);
    expert::DemoSample s;
    s.time = v[0];
    flight::AircraftState::Vector xa;
    std::copy(v + 1, v + 14, xa.begin());
    s.state = flight::AircraftState::from_array(xa);
    s.surfaces = {v[14], v[15], v[16], v[17]};
    s.command = {v[18], v[19], v[20], v[21]};
    s.label = {v[22], v[23], v[24], v[25]};
    s.reference = {v[26], v[27], v[28]};
    s.lambda = v[29];
    demos[idx].samples.push_back(s);
  }
  return demos;
}

// -------------------------------------------------------------- norm stats

inline Json stats_json(const imitation::NormStats& s) {
  Json j;
  j["names"] = imitation::feature_names();
  j["min"] = std::vector<double>(s.min.data(), s.min.data() + s.min.size());
  j["max"] = std::vector<double>(s.max.data(), s.max.data() + s.max.size());
  j["constant"] = std::vector<bool>(s.constant.begin(), s.constant.end());
  return j;
}

inline imitation::NormStats stats_from_json(const Json& j) {
  imitation::NormStats s;
  try {
    const auto mn = j.at("min").get<std::vector<double>>();
    const auto mx = j.at("max").get<std::vector<double>>();
    s.constant = j.at("constant").get<std::vector<bool>>();
    require(mn.size() == mx.size() && mn.size() == s.constant.size(), ErrorKind::IoError, "norm stats lengths differ");
    s.min = Eigen::Map<const nn::Vector>(mn.data(), static_cast<Eigen::Index>(mn.size()));
    s.max = Eigen::Map<const nn::Vector>(mx.data(), static_cast<Eigen::Index>(mx.size()));
  } catch (const Json::exception& e) {
    fail(ErrorKind::IoError, std::string("bad norm stats: ") + e.what());
  }
  return s;
}

inline void save_stats(const imitation::NormStats& s, const fs::path& path) { write_text(path, stats_json(s).dump(2) + "\n"); }

inline imitation::NormStats load_stats(const fs::path& path) {
  try {
    return stats_from_json(Json::parse(nn::checkpoint::read_file(path)));
  } catch (const Json::parse_error& e) {
    fail(ErrorKind::IoError, e.what());
  }
}

// ------------------------------------------------------------------ metrics

struct MetricsRow {
  std::string maneuver;
  std::string stage;
  PqrMse mse;
  bool completed = true;
};

struct MetricsTable {
  std::vector<MetricsRow> rows;

  void add(std::string maneuver, std::string stage, const PqrMse& m, bool completed = true) {
    rows.push_back({std::move(maneuver), std::move(stage), m, completed});
  }

  const MetricsRow* find(const std::string& maneuver, const std::string& stage) const {
    for (const auto& r : rows)
      if (r.maneuver == maneuver && r.stage == stage) return &r;
    return nullptr;
  }
};

/// {maneuver: {stage: {p_mse, q_mse, r_mse, pqr_mse, completed}}}, rad^2/s^2.
inline Json metrics_json(const MetricsTable& t) {
  Json j = Json::object();
  for (const auto& r : t.rows) {
    Json& row = j[r.maneuver][r.stage];
    row["p_mse_rad2ps2"] = r.mse.p;
    row["q_mse_rad2ps2"] = r.mse.q;
    row["r_mse_rad2ps2"] = r.mse.r;
    row["pqr_mse_rad2ps2"] = r.mse.pqr;
    row["completed"] = r.completed;
  }
  return j;
}

inline void export_metrics(const MetricsTable& t, const fs::path& path) {
  try {
    write_text(path, metrics_json(t).dump(2) + "\n");
  } catch (const fs::filesystem_error& e) {
    fail(ErrorKind::IoError, e.what());
  }
}

inline MetricsTable load_metrics(const fs::path& path) {
  MetricsTable t;
  const Json j = Json::parse(nn::checkpoint::read_file(path));
  for (const auto& [man, stages] : j.items())
    for (const auto& [stage, v] : stages.items())
      t.add(man, stage,
            {v.at("p_mse_rad2ps2").get<double>(), v.at("q_mse_rad2ps2").get<double>(), v.at("r_mse_rad2ps2").get<double>(),
             v.at("pqr_mse_rad2ps2").get<double>()},
            v.at("completed").get<bool>());
  return t;
}

// --------------------------------------------------------------------- logs

/// Appends one JSON object per line; each record is flushed immediately.
class JsonlLog {
 public:
  JsonlLog() = default;
  explicit JsonlLog(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    out_.open(path, std::ios::trunc);
    require(out_.good(), ErrorKind::IoError, "cannot open log " + path.string());
  }

  void write(const Json& record) {
    if (!out_.is_open()) return;
    out_ << record.dump() << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
};

}  // namespace mangen::harness
