#pragma once

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsiege/io.hpp"
#include "tsiege/scenario.hpp"
#include "tsiege/threatmodel.hpp"

namespace tsiege::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitBootBlocked = 3;

inline std::string default_out_dir() {
  if (const char* env = std::getenv("TRACTION_SIEGE_OUT")) return env;
  return "out";
}

struct SimulateOptions {
  std::string scenario_path;
  std::optional<bool> ids_override;
  std::optional<std::uint64_t> seed_override;
  std::optional<double> duration_override;
  std::string out_dir;
};

// Runs one scenario and writes trace.csv, frames.csv and report.json into the
// output directory. Nothing is written when the scenario fails validation.
// Exit 3 marks a boot-blocked run, whose outputs are still produced.
inline int cmd_simulate(const SimulateOptions& opt, std::ostream& err = std::cerr) {
  SimConfig cfg;
  try {
    cfg = load_scenario(opt.scenario_path);
    if (opt.ids_override) cfg.ids.enabled = *opt.ids_override;
    if (opt.seed_override) cfg.seed = *opt.seed_override;
    if (opt.duration_override) {
      cfg.duration_s = *opt.duration_override;
      cfg.validate();
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }

  const std::string out = opt.out_dir.empty() ? default_out_dir() : opt.out_dir;
  try {
    std::filesystem::create_directories(out);
    const RunTrace trace = run(cfg);
    const MetricsReport report = build_report(trace);
    write_trace_csv(trace, out + "/trace.csv");
    write_frames_csv(trace, out + "/frames.csv");
    write_report_json(report, trace, out + "/report.json");
    return trace.boot_blocked ? kExitBootBlocked : kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
}

struct MatrixOptions {
  std::string suite_path;
  std::string out_dir;
};

struct MatrixRow {
  std::string scenario_id;
  std::string status = "ok";
  std::optional<MetricsReport> impact;     // IDS-off arm
  std::optional<MetricsReport> protected_; // IDS-on arm
};

namespace detail {

inline std::string fmt1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", v);
  return buf;
}

inline std::string matrix_text_table(const std::vector<MatrixRow>& rows) {
  std::vector<std::array<std::string, 8>> cells;
  cells.push_back({"Attack Scenario", "Torque Deviation (%)", "Latency Increase (ms)",
                   "Voltage Anomaly (V)", "System Downtime (s)", "IDS Detection Time (ms)",
                   "Mitigation Result", "Status"});
  for (const MatrixRow& r : rows) {
    std::array<std::string, 8> row;
    row[0] = r.scenario_id;
    row[7] = r.status;
    if (r.impact) {
      row[1] = fmt1(r.impact->torque_deviation_pct);
      row[2] = fmt1(r.impact->latency_increase_ms);
      row[3] = r.impact->voltage_anomaly_v > 0.0
                   ? "peak " + fmt1(r.impact->peak_line_voltage_v)
                   : "normal";
      row[4] = fmt1(r.impact->downtime_s);
    } else {
      row[1] = row[2] = row[3] = row[4] = "-";
    }
    if (r.protected_) {
      if (r.protected_->detected_at_boot) {
        row[5] = "at boot";
        row[6] = "startup halted";
      } else {
        row[5] = r.protected_->ids_detection_ms ? fmt1(*r.protected_->ids_detection_ms) : "-";
        row[6] = r.protected_->mitigation ? to_string(*r.protected_->mitigation) : "-";
      }
    } else {
      row[5] = row[6] = "-";
    }
    cells.push_back(std::move(row));
  }
  std::array<std::size_t, 8> width{};
  for (const auto& row : cells) {
    for (std::size_t i = 0; i < 8; ++i) width[i] = std::max(width[i], row[i].size());
  }
  std::string out;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t i = 0; i < 8; ++i) {
      out += cells[r][i] + std::string(width[i] - cells[r][i].size(), ' ');
      out += (i + 1 < 8) ? "  " : "\n";
    }
    if (r == 0) {
      for (std::size_t i = 0; i < 8; ++i) {
        out += std::string(width[i], '-');
        out += (i + 1 < 8) ? "  " : "\n";
      }
    }
  }
  return out;
}

}  // namespace detail

// Runs every scenario in the suite twice (IDS on and off), writes per-run
// artifacts plus the combined comparison table. Impact columns come from the
// unprotected arm, detection and mitigation from the protected arm.
inline int cmd_matrix(const MatrixOptions& opt, std::ostream& err = std::cerr) {
  nlohmann::json suite;
  std::vector<std::string> scenario_paths;
  try {
    std::ifstream f(opt.suite_path);
    if (!f) throw std::runtime_error("cannot open suite file: " + opt.suite_path);
    f >> suite;
    if (suite.at("schema_version").get<int>() != schema_version)
      throw std::runtime_error("unsupported suite schema_version");
    const auto base = std::filesystem::path(opt.suite_path).parent_path();
    for (const auto& p : suite.at("scenarios")) {
      scenario_paths.push_back((base / p.get<std::string>()).string());
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }

  const std::string out = opt.out_dir.empty() ? default_out_dir() : opt.out_dir;
  std::filesystem::create_directories(out);

  std::vector<MatrixRow> rows;
  bool any_error = false;
  for (const std::string& path : scenario_paths) {
    MatrixRow row;
    row.scenario_id = std::filesystem::path(path).stem().string();
    try {
      const SimConfig base_cfg = load_scenario(path);
      row.scenario_id = base_cfg.scenario_id;
      for (const bool ids_on : {false, true}) {
        SimConfig cfg = base_cfg;
        cfg.ids.enabled = ids_on;
        const RunTrace trace = run(cfg);
        const MetricsReport report = build_report(trace);
        const std::string run_dir =
            out + "/" + cfg.scenario_id + (ids_on ? "/ids_on" : "/ids_off");
        std::filesystem::create_directories(run_dir);
        write_trace_csv(trace, run_dir + "/trace.csv");
        write_frames_csv(trace, run_dir + "/frames.csv");
        write_report_json(report, trace, run_dir + "/report.json");
        (ids_on ? row.protected_ : row.impact) = report;
      }
    } catch (const std::exception& e) {
      row.status = std::string("error: ") + e.what();
      any_error = true;
    }
    rows.push_back(std::move(row));
  }

  nlohmann::json jrows = nlohmann::json::array();
  for (const MatrixRow& r : rows) {
    nlohmann::json jr;
    jr["scenario_id"] = r.scenario_id;
    jr["status"] = r.status;
    jr["impact"] = r.impact ? report_to_json(*r.impact) : nlohmann::json(nullptr);
    jr["with_ids"] = r.protected_ ? report_to_json(*r.protected_) : nlohmann::json(nullptr);
    jrows.push_back(std::move(jr));
  }
  nlohmann::json jtable;
  jtable["schema_version"] = schema_version;
  jtable["rows"] = jrows;
  {
    std::ofstream f(out + "/table2.json", std::ios::binary);
    f << jtable.dump(2) << "\n";
  }
  {
    std::ofstream f(out + "/table2.txt", std::ios::binary);
    f << detail::matrix_text_table(rows);
  }
  std::cout << detail::matrix_text_table(rows);
  return any_error ? 1 : kExitOk;
}

struct ThreatsOptions {
  std::string arch_path;
  std::string rules_path;  // defaults to stride_rules.json next to the architecture
  std::string format = "text";
  std::string out_path;  // empty: stdout only
};

inline int cmd_threats(const ThreatsOptions& opt, std::ostream& err = std::cerr) {
  try {
    std::string rules_path = opt.rules_path;
    if (rules_path.empty()) {
      rules_path = (std::filesystem::path(opt.arch_path).parent_path() / "stride_rules.json")
                       .string();
    }
    std::ifstream fa(opt.arch_path);
    if (!fa) throw std::runtime_error("cannot open architecture file: " + opt.arch_path);
    nlohmann::json ja;
    fa >> ja;
    std::ifstream fr(rules_path);
    if (!fr) throw std::runtime_error("cannot open rules file: " + rules_path);
    nlohmann::json jr;
    fr >> jr;

    const Architecture arch = architecture_from_json(ja);
    const std::vector<ThreatRule> rules = threat_rules_from_json(jr);
    const std::vector<ThreatEntry> entries = enumerate_threats(arch, rules);

    std::string rendered;
    if (opt.format == "json") {
      rendered = threats_to_json(entries).dump(2) + "\n";
    } else if (opt.format == "text") {
      rendered = threats_to_text(entries);
    } else {
      throw std::runtime_error("unknown format: " + opt.format);
    }
    std::cout << rendered;
    if (!opt.out_path.empty()) {
      std::ofstream f(opt.out_path, std::ios::binary);
      if (!f) throw std::runtime_error("cannot open " + opt.out_path);
      f << rendered;
    }
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
}

struct PlotDataOptions {
  std::vector<std::string> trace_paths;
  std::string out_path;
};

// Tidy time/torque series per run, ready for any plotting tool.
inline int cmd_plotdata(const PlotDataOptions& opt, std::ostream& err = std::cerr) {
  try {
    std::string out = "run,time_s,commanded_torque_nm,measured_torque_nm\n";
    for (const std::string& path : opt.trace_paths) {
      const ParsedTrace t = read_trace_csv(path);
      std::string label = std::filesystem::path(path).parent_path().filename().string();
      if (label.empty()) label = std::filesystem::path(path).stem().string();
      for (const TraceSample& s : t.samples) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f\n", label.c_str(), s.time,
                      s.commanded_torque, s.measured_torque);
        out += buf;
      }
    }
    if (opt.out_path.empty()) {
      std::cout << out;
    } else {
      std::ofstream f(opt.out_path, std::ios::binary);
      if (!f) throw std::runtime_error("cannot open " + opt.out_path);
      f << out;
    }
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
}

}  // namespace tsiege::cli
