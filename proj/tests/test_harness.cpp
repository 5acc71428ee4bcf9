#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "tsiege/harness.hpp"
#include "tsiege/io.hpp"
#include "tsiege/scenario.hpp"

using namespace tsiege;

namespace {

const std::string kScenarioDir = std::string(TSIEGE_DATA_DIR) + "/scenarios";

SimConfig clean_config() { return load_scenario(kScenarioDir + "/clean.json"); }

}  // namespace

TEST_CASE("a clean run settles at half demand with no events") {
  SimConfig cfg = clean_config();
  cfg.ids.enabled = true;
  const RunTrace t = run(cfg);
  CHECK(t.events.empty());
  CHECK_FALSE(t.boot_blocked);
  REQUIRE(t.samples.size() == 30000);
  // Settled at 50 N*m through the back half of the run.
  for (std::size_t k = 20000; k < t.samples.size(); ++k) {
    CHECK(std::abs(t.samples[k].measured_torque - 50.0) < 2.0);
    CHECK(t.samples[k].controller_mode == ControllerMode::Normal);
  }
}

TEST_CASE("sample times form an exact arithmetic progression") {
  SimConfig cfg = clean_config();
  cfg.duration_s = 2.0;
  const RunTrace t = run(cfg);
  for (std::size_t k = 0; k < t.samples.size(); ++k) {
    CHECK(t.samples[k].time == static_cast<double>(k + 1) * cfg.controller.control_period_s);
  }
}

TEST_CASE("identical config and seed produce byte-identical traces") {
  SimConfig cfg = load_scenario(kScenarioDir + "/sensor_spoofing.json");
  const RunTrace a = run(cfg);
  const RunTrace b = run(cfg);
  CHECK(trace_to_csv(a) == trace_to_csv(b));
}

TEST_CASE("different seeds differ somewhere in the trace") {
  SimConfig cfg = clean_config();
  cfg.duration_s = 5.0;
  const RunTrace a = run(cfg);
  cfg.seed = cfg.seed + 1;
  const RunTrace b = run(cfg);
  CHECK(trace_to_csv(a) != trace_to_csv(b));
}

TEST_CASE("every tick executes the seven stages once, in order") {
  SimConfig cfg = clean_config();
  cfg.duration_s = 0.050;
  std::vector<int> probe;
  run(cfg, &probe);
  REQUIRE(probe.size() == 50 * 7);
  for (std::size_t k = 0; k < probe.size(); ++k) {
    CHECK(probe[k] == static_cast<int>(k % 7) + 1);
  }
}

TEST_CASE("a tampered image with protections on yields a fully halted trace") {
  SimConfig cfg = load_scenario(kScenarioDir + "/firmware_tamper.json");
  cfg.ids.enabled = true;
  const RunTrace t = run(cfg);
  CHECK(t.boot_blocked);
  REQUIRE_FALSE(t.samples.empty());
  for (const TraceSample& s : t.samples) {
    CHECK(s.controller_mode == ControllerMode::Halted);
    CHECK_FALSE(s.gate_enabled);
    CHECK(s.measured_torque == 0.0);
  }
}

TEST_CASE("runtime firmware tampering is caught by the periodic hash") {
  SimConfig cfg = clean_config();
  cfg.scenario_id = "runtime-tamper";
  cfg.duration_s = 15.0;
  AttackScenario a;
  a.kind = AttackKind::FirmwareTamper;
  a.start_time = 10.0;
  a.tamper = TamperParams{2, 5, 0xff, false};
  cfg.attack = a;
  cfg.ids.enabled = true;
  const RunTrace t = run(cfg);
  REQUIRE_FALSE(t.events.empty());
  const IdsEvent& e = t.events.front();
  CHECK(e.rule == IdsRule::FirmwareIntegrity);
  CHECK(e.detected_at >= 10.0);
  CHECK(e.detected_at <= 10.0 + cfg.ids.runtime_hash_interval_s + 1e-9);
  CHECK(e.recommended_action == MitigationAction::Halt);
  // Halt mitigation: gates stay off afterwards.
  for (const TraceSample& s : t.samples) {
    if (s.time > e.detected_at + 0.002) CHECK_FALSE(s.gate_enabled);
  }
}

TEST_CASE("an untampered controller only ever puts duties in the unit range on the wire") {
  SimConfig cfg = clean_config();
  cfg.duration_s = 10.0;
  const RunTrace t = run(cfg);
  std::size_t checked = 0;
  for (const FrameRecord& fr : t.frames) {
    if (fr.frame.id != t.command_frame_id && fr.frame.id != t.emergency_frame_id) continue;
    REQUIRE(fr.frame.payload.size() == 8);
    for (int i = 0; i < 3; ++i) {
      const auto u = static_cast<std::uint16_t>(fr.frame.payload[2 * i] |
                                                (fr.frame.payload[2 * i + 1] << 8));
      const double duty = static_cast<double>(static_cast<std::int16_t>(u)) / 4096.0;
      CHECK(duty >= 0.0);
      CHECK(duty <= 1.0);
    }
    ++checked;
  }
  CHECK(checked == 10000);
}

TEST_CASE("data injection with IDS trips both the deviation and power rules") {
  SimConfig cfg = load_scenario(kScenarioDir + "/data_injection.json");
  cfg.ids.enabled = true;
  const RunTrace t = run(cfg);
  bool saw_deviation = false, saw_power = false;
  for (const IdsEvent& e : t.events) {
    saw_deviation |= e.rule == IdsRule::SensorDeviation;
    saw_power |= e.rule == IdsRule::PowerCrossValidation;
    CHECK(e.detected_at >= 10.0);
    CHECK(e.detected_at <= 10.150);
  }
  CHECK(saw_deviation);
  CHECK(saw_power);
  // Limp outranks the derate that the power rule recommends.
  CHECK(t.samples.back().controller_mode == ControllerMode::Limp);
}

TEST_CASE("spoofing with IDS fires exactly one sensor-deviation event and limps") {
  SimConfig cfg = load_scenario(kScenarioDir + "/sensor_spoofing.json");
  cfg.ids.enabled = true;
  const RunTrace t = run(cfg);
  int sensor_events = 0;
  for (const IdsEvent& e : t.events) {
    if (e.rule == IdsRule::SensorDeviation) {
      sensor_events++;
      CHECK(e.detected_at >= 10.0);
      CHECK(e.detected_at <= 10.100);
      CHECK(e.recommended_action == MitigationAction::LimpMode);
    }
  }
  CHECK(sensor_events == 1);
  CHECK(t.samples.back().controller_mode == ControllerMode::Limp);
  const MetricsReport r = build_report(t);
  REQUIRE(r.mitigation.has_value());
  CHECK(*r.mitigation == MitigationAction::LimpMode);
}

TEST_CASE("comm buffer reset restores command latency while the flood still runs") {
  SimConfig cfg = load_scenario(kScenarioDir + "/dos_flood.json");
  cfg.ids.enabled = true;
  const RunTrace t = run(cfg);
  REQUIRE_FALSE(t.events.empty());
  CHECK(t.events.front().rule == IdsRule::CanTiming);
  const double detected = t.events.front().detected_at;
  // Within half a second of the reset every accepted command transits in
  // under 20 ms, flood or no flood.
  for (const FrameRecord& fr : t.frames) {
    if (fr.dropped || !fr.frame.delivery_time) continue;
    if (fr.frame.id != t.command_frame_id && fr.frame.id != t.emergency_frame_id) continue;
    if (fr.frame.enqueue_time < detected + 0.5 || fr.frame.enqueue_time > 12.0) continue;
    CHECK(*fr.frame.delivery_time - fr.frame.enqueue_time < 0.020);
  }
}

TEST_CASE("halted dominance: once halted no later command enables the gate") {
  SimConfig cfg = load_scenario(kScenarioDir + "/firmware_tamper.json");
  cfg.ids.enabled = false;  // boots corrupted, trips the overvoltage protection
  const RunTrace t = run(cfg);
  bool halted_seen = false;
  for (const TraceSample& s : t.samples) {
    if (s.controller_mode == ControllerMode::Halted) halted_seen = true;
    if (halted_seen) {
      CHECK(s.controller_mode == ControllerMode::Halted);
      CHECK_FALSE(s.gate_enabled);
    }
  }
  CHECK(halted_seen);
}

TEST_CASE("run_matrix pairs protection arms and isolates failures") {
  std::vector<SimConfig> configs;
  for (const char* name : {"/sensor_spoofing.json", "/dos_flood.json"}) {
    SimConfig cfg = load_scenario(kScenarioDir + name);
    for (bool ids_on : {false, true}) {
      SimConfig c = cfg;
      c.ids.enabled = ids_on;
      c.scenario_id = cfg.scenario_id + (ids_on ? "+ids" : "-ids");
      configs.push_back(c);
    }
  }
  SimConfig broken = clean_config();
  broken.scenario_id = "broken";
  broken.plant.rotor_inertia = -1.0;
  configs.push_back(broken);

  const auto results = run_matrix(configs);
  REQUIRE(results.size() == 5);
  int ok = 0;
  for (const auto& r : results) ok += r.ok ? 1 : 0;
  CHECK(ok == 4);
  CHECK_FALSE(results[4].ok);
  CHECK_FALSE(results[4].error.empty());
  CHECK(results[0].report.has_value());
}

TEST_CASE("empty matrix yields empty results") {
  CHECK(run_matrix({}).empty());
}

TEST_CASE("config validation rejects a run shorter than its attack") {
  SimConfig cfg = load_scenario(kScenarioDir + "/sensor_spoofing.json");
  cfg.duration_s = 12.0;  // attack runs 10 to 18
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
