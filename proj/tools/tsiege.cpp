// traction-siege command line front end.

#include <CLI11.hpp>

#include "tsiege/cli.hpp"
#include "tsiege/version.hpp"

int main(int argc, char** argv) {
  CLI::App app{"traction-siege: EV traction powertrain simulation under cyber-attack injection"};
  app.set_version_flag("--version", TSIEGE_VERSION);
  app.require_subcommand(1);

  tsiege::cli::SimulateOptions sim;
  std::string ids_flag;
  auto* simulate = app.add_subcommand("simulate", "run one scenario and write trace + report");
  simulate->add_option("--scenario", sim.scenario_path, "scenario JSON file")
      ->required();
  simulate->add_option("--ids", ids_flag, "override the scenario's protection switch (on|off)")
      ->check(CLI::IsMember({"on", "off"}));
  std::uint64_t seed = 0;
  auto* seed_opt = simulate->add_option("--seed", seed, "override the scenario seed");
  double duration = 0.0;
  auto* dur_opt = simulate->add_option("--duration", duration, "override run duration, seconds");
  simulate->add_option("--out", sim.out_dir,
                       "output directory (default $TRACTION_SIEGE_OUT or ./out)");

  tsiege::cli::MatrixOptions mat;
  auto* matrix = app.add_subcommand("matrix", "run a suite of scenarios with and without IDS");
  matrix->add_option("--suite", mat.suite_path, "suite JSON listing scenario files")->required();
  matrix->add_option("--out", mat.out_dir, "output directory");

  tsiege::cli::ThreatsOptions thr;
  auto* threats = app.add_subcommand("threats", "print the STRIDE threat table");
  threats->add_option("--arch", thr.arch_path, "architecture JSON file")->required();
  threats->add_option("--rules", thr.rules_path,
                      "threat rule table (default: stride_rules.json beside the architecture)");
  threats->add_option("--format", thr.format, "text or json")
      ->check(CLI::IsMember({"text", "json"}));
  threats->add_option("--out", thr.out_path, "also write the table to this file");

  tsiege::cli::PlotDataOptions plot;
  auto* plotdata = app.add_subcommand("plotdata", "emit tidy time/torque CSV from trace files");
  plotdata->add_option("--trace", plot.trace_paths, "trace.csv files")->required()->expected(-1);
  plotdata->add_option("--out", plot.out_path, "output CSV (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  if (simulate->parsed()) {
    if (!ids_flag.empty()) sim.ids_override = ids_flag == "on";
    if (seed_opt->count() > 0) sim.seed_override = seed;
    if (dur_opt->count() > 0) sim.duration_override = duration;
    return tsiege::cli::cmd_simulate(sim);
  }
  if (matrix->parsed()) return tsiege::cli::cmd_matrix(mat);
  if (threats->parsed()) return tsiege::cli::cmd_threats(thr);
  if (plotdata->parsed()) return tsiege::cli::cmd_plotdata(plot);
  return 2;
}
