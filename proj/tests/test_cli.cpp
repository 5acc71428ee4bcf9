#include <catch2/catch_amalgamated.hpp>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tsiege/cli.hpp"

using namespace tsiege;
namespace fs = std::filesystem;

namespace {

const std::string kScenarioDir = std::string(TSIEGE_DATA_DIR) + "/scenarios";
const std::string kDataDir = std::string(TSIEGE_DATA_DIR) + "/data";

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("tsiege_cli_" + std::to_string(::getpid()) + "_" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

nlohmann::json read_json(const fs::path& p) {
  std::ifstream f(p);
  REQUIRE(f.good());
  nlohmann::json j;
  f >> j;
  return j;
}

}  // namespace

TEST_CASE("simulate writes trace, frames and report") {
  TempDir tmp;
  cli::SimulateOptions opt;
  opt.scenario_path = kScenarioDir + "/sensor_spoofing.json";
  opt.ids_override = true;
  opt.out_dir = tmp.path.string();
  std::ostringstream err;
  REQUIRE(cli::cmd_simulate(opt, err) == cli::kExitOk);
  CHECK(fs::exists(tmp.path / "trace.csv"));
  CHECK(fs::exists(tmp.path / "frames.csv"));
  CHECK(fs::exists(tmp.path / "report.json"));

  const nlohmann::json report = read_json(tmp.path / "report.json");
  CHECK(report.at("ids_detection_ms").get<double>() <= 100.0);
  CHECK(report.at("mitigation").get<std::string>() == "limp_mode");
  CHECK(report.at("false_positive_count").get<int>() == 0);
}

TEST_CASE("report fields equal metrics recomputed from the trace by an independent reader") {
  TempDir tmp;
  cli::SimulateOptions opt;
  opt.scenario_path = kScenarioDir + "/dos_flood.json";
  opt.ids_override = false;
  opt.out_dir = tmp.path.string();
  std::ostringstream err;
  REQUIRE(cli::cmd_simulate(opt, err) == cli::kExitOk);

  const nlohmann::json report = read_json(tmp.path / "report.json");
  const ParsedTrace parsed = read_trace_csv((tmp.path / "trace.csv").string());
  REQUIRE(parsed.samples.size() == 30000);

  // Naive recomputation of the sample-based metrics from the CSV.
  double peak = 0.0;
  double down = 0.0;
  double worst_dev = 0.0;
  for (const TraceSample& s : parsed.samples) {
    peak = std::max(peak, s.peak_line_voltage);
    const bool halted = s.controller_mode == ControllerMode::Halted;
    const bool absent = std::abs(s.measured_torque) < 2.0 && s.commanded_torque >= 20.0;
    if (halted || absent) down += 0.001;
    if (s.time >= 10.0 && s.time < 12.0 && s.commanded_torque != 0.0) {
      worst_dev = std::max(worst_dev,
                           std::abs(s.measured_torque - s.commanded_torque) / s.commanded_torque);
    }
  }
  CHECK(report.at("peak_line_voltage_v").get<double>() == Catch::Approx(peak));
  CHECK(report.at("downtime_s").get<double>() == Catch::Approx(down));
  CHECK(report.at("torque_deviation_pct").get<double>() == Catch::Approx(100.0 * worst_dev));
}

TEST_CASE("the output directory defaults to TRACTION_SIEGE_OUT") {
  TempDir tmp;
  const std::string target = (tmp.path / "envout").string();
  ::setenv("TRACTION_SIEGE_OUT", target.c_str(), 1);
  cli::SimulateOptions opt;
  opt.scenario_path = kScenarioDir + "/clean.json";
  opt.duration_override = 1.0;
  std::ostringstream err;
  const int rc = cli::cmd_simulate(opt, err);
  ::unsetenv("TRACTION_SIEGE_OUT");
  REQUIRE(rc == cli::kExitOk);
  CHECK(fs::exists(fs::path(target) / "report.json"));
}

TEST_CASE("malformed scenarios exit 2 and write nothing") {
  TempDir tmp;
  const fs::path bad = tmp.path / "bad.json";
  {
    std::ofstream f(bad);
    f << "{ \"schema_version\": 1, ";
  }
  cli::SimulateOptions opt;
  opt.scenario_path = bad.string();
  opt.out_dir = (tmp.path / "out").string();
  std::ostringstream err;
  CHECK(cli::cmd_simulate(opt, err) == cli::kExitValidation);
  CHECK_FALSE(fs::exists(tmp.path / "out" / "trace.csv"));
  CHECK_FALSE(fs::exists(tmp.path / "out" / "report.json"));
  CHECK(err.str().find("error") != std::string::npos);
}

TEST_CASE("boot-blocked run exits 3 but still writes outputs") {
  TempDir tmp;
  cli::SimulateOptions opt;
  opt.scenario_path = kScenarioDir + "/firmware_tamper.json";
  opt.ids_override = true;
  opt.out_dir = tmp.path.string();
  std::ostringstream err;
  CHECK(cli::cmd_simulate(opt, err) == cli::kExitBootBlocked);
  CHECK(fs::exists(tmp.path / "trace.csv"));
  const nlohmann::json report = read_json(tmp.path / "report.json");
  CHECK(report.at("boot_blocked").get<bool>());
  CHECK(report.at("ids_detection_ms").get<std::string>() == "at-boot");
  CHECK(report.at("mitigation").get<std::string>() == "startup_halted");
}

TEST_CASE("matrix runs the reference suite into an eight-run table") {
  TempDir tmp;
  cli::MatrixOptions opt;
  opt.suite_path = kScenarioDir + "/suite_reference.json";
  opt.out_dir = tmp.path.string();
  std::ostringstream err;
  REQUIRE(cli::cmd_matrix(opt, err) == cli::kExitOk);

  const nlohmann::json table = read_json(tmp.path / "table2.json");
  REQUIRE(table.at("rows").size() == 4);
  int runs = 0;
  for (const auto& row : table.at("rows")) {
    CHECK(row.at("status").get<std::string>() == "ok");
    if (!row.at("impact").is_null()) runs++;
    if (!row.at("with_ids").is_null()) runs++;
  }
  CHECK(runs == 8);
  CHECK(fs::exists(tmp.path / "table2.txt"));
  CHECK(fs::exists(tmp.path / "sensor-spoofing-reference" / "ids_on" / "report.json"));
  CHECK(fs::exists(tmp.path / "sensor-spoofing-reference" / "ids_off" / "trace.csv"));

  std::ifstream f(tmp.path / "table2.txt");
  std::stringstream text;
  text << f.rdbuf();
  CHECK(text.str().find("Torque Deviation (%)") != std::string::npos);
  CHECK(text.str().find("Mitigation Result") != std::string::npos);
  CHECK(text.str().find("at boot") != std::string::npos);
}

TEST_CASE("a missing scenario file is isolated to its row") {
  TempDir tmp;
  const fs::path suite = tmp.path / "suite.json";
  {
    std::ofstream f(suite);
    nlohmann::json j;
    j["schema_version"] = 1;
    j["scenarios"] = {fs::path(kScenarioDir + "/clean.json").string(), "missing.json"};
    f << j.dump();
  }
  cli::MatrixOptions opt;
  opt.suite_path = suite.string();
  opt.out_dir = (tmp.path / "out").string();
  std::ostringstream err;
  CHECK(cli::cmd_matrix(opt, err) == 1);
  const nlohmann::json table = read_json(tmp.path / "out" / "table2.json");
  REQUIRE(table.at("rows").size() == 2);
  CHECK(table.at("rows")[0].at("status").get<std::string>() == "ok");
  CHECK(table.at("rows")[1].at("status").get<std::string>().find("error") == 0);
}

TEST_CASE("threats prints the reference table in both formats") {
  cli::ThreatsOptions opt;
  opt.arch_path = kDataDir + "/architecture.json";
  std::ostringstream err;

  TempDir tmp;
  opt.format = "text";
  opt.out_path = (tmp.path / "threats.txt").string();
  REQUIRE(cli::cmd_threats(opt, err) == cli::kExitOk);
  std::ifstream f(tmp.path / "threats.txt");
  std::stringstream text;
  text << f.rdbuf();
  CHECK(text.str().find("Incorrect actuation of motor control") != std::string::npos);
  CHECK(text.str().find("Inhibited traction control") != std::string::npos);

  opt.format = "json";
  opt.out_path = (tmp.path / "threats.json").string();
  REQUIRE(cli::cmd_threats(opt, err) == cli::kExitOk);
  const nlohmann::json j = read_json(tmp.path / "threats.json");
  CHECK(j.size() == 6);
}

TEST_CASE("threats rejects an invalid architecture with exit 2") {
  TempDir tmp;
  const fs::path arch = tmp.path / "arch.json";
  {
    std::ofstream f(arch);
    f << R"({"components":[{"name":"x","kind":"warp_core"}]})";
  }
  cli::ThreatsOptions opt;
  opt.arch_path = arch.string();
  opt.rules_path = kDataDir + "/stride_rules.json";
  std::ostringstream err;
  CHECK(cli::cmd_threats(opt, err) == cli::kExitValidation);
}

TEST_CASE("plotdata emits a tidy two-series CSV") {
  TempDir tmp;
  for (const bool ids_on : {true, false}) {
    cli::SimulateOptions opt;
    opt.scenario_path = kScenarioDir + "/sensor_spoofing.json";
    opt.ids_override = ids_on;
    opt.out_dir = (tmp.path / (ids_on ? "on" : "off")).string();
    std::ostringstream err;
    REQUIRE(cli::cmd_simulate(opt, err) == cli::kExitOk);
  }
  cli::PlotDataOptions opt;
  opt.trace_paths = {(tmp.path / "on" / "trace.csv").string(),
                     (tmp.path / "off" / "trace.csv").string()};
  opt.out_path = (tmp.path / "plot.csv").string();
  std::ostringstream err;
  REQUIRE(cli::cmd_plotdata(opt, err) == cli::kExitOk);

  std::ifstream f(tmp.path / "plot.csv");
  std::string header;
  std::getline(f, header);
  CHECK(header == "run,time_s,commanded_torque_nm,measured_torque_nm");
  std::size_t rows = 0;
  std::string line;
  bool has_on = false, has_off = false;
  while (std::getline(f, line)) {
    rows++;
    if (line.rfind("on,", 0) == 0) has_on = true;
    if (line.rfind("off,", 0) == 0) has_off = true;
  }
  CHECK(rows == 60000);
  CHECK(has_on);
  CHECK(has_off);
}

TEST_CASE("plotdata rejects a trace with the wrong schema line") {
  TempDir tmp;
  const fs::path bogus = tmp.path / "trace.csv";
  {
    std::ofstream f(bogus);
    f << "#SCHEMA something-else 9\nheader\n";
  }
  cli::PlotDataOptions opt;
  opt.trace_paths = {bogus.string()};
  std::ostringstream err;
  CHECK(cli::cmd_plotdata(opt, err) == cli::kExitValidation);
}

TEST_CASE("plotdata on a header-only trace emits just the header") {
  TempDir tmp;
  const fs::path empty = tmp.path / "trace.csv";
  {
    std::ofstream f(empty);
    f << kTraceSchemaLine << "\n";
    f << "time_s,commanded_torque_nm,measured_torque_nm,rotor_speed_rad_s,peak_line_voltage_v,"
         "controller_mode,command_issue_time_s,command_actuation_time_s,"
         "applied_torque_request_nm,gate_enabled\n";
  }
  cli::PlotDataOptions opt;
  opt.trace_paths = {empty.string()};
  opt.out_path = (tmp.path / "plot.csv").string();
  std::ostringstream err;
  REQUIRE(cli::cmd_plotdata(opt, err) == cli::kExitOk);
  std::ifstream f(tmp.path / "plot.csv");
  std::string content((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  CHECK(content == "run,time_s,commanded_torque_nm,measured_torque_nm\n");
}
