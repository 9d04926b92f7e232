// eprnet: validate scenarios, calibrate sources and run static or dynamic experiments.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "eprnet/calibration.hpp"
#include "eprnet/runner.hpp"
#include "eprnet/scenario.hpp"

namespace fs = std::filesystem;
using namespace eprnet;

namespace {

int cmd_validate(const std::string& file) {
  auto sc = load_scenario(file);
  sc.check();
  double total = 0.0;
  for (const auto& e : sc.schedule) total += e.dwell_s;
  std::cout << "ok: scenario '" << sc.name << "', " << sc.schedule.size() << " schedule entries, " << total
            << " s, " << sc.maps.size() << " custom maps\n";
  for (const auto& e : sc.schedule) {
    std::cout << "  " << e.map << " (" << e.dwell_s << " s):";
    for (const auto& l : links_of(sc.resolve_map(e.map))) std::cout << " " << l.label();
    std::cout << "\n";
  }
  return 0;
}

int cmd_calibrate(const std::string& file, const std::string& targets_file, const std::vector<std::string>& fit_maps,
                  const std::string& out) {
  auto sc = load_scenario(file);
  const auto targets = load_targets(targets_file);
  std::vector<RateTarget> fit, check;
  for (const auto& t : targets) {
    const bool used = fit_maps.empty() || std::find(fit_maps.begin(), fit_maps.end(), t.map) != fit_maps.end();
    (used ? fit : check).push_back(t);
  }
  const auto result = calibrate_brightness(fit, sc, check);
  std::cout << result.to_json().dump(2) << "\n";
  if (!out.empty()) {
    sc.sources = result.sources;
    std::ofstream os(out);
    if (!os) throw std::runtime_error("cannot write " + out);
    os << scenario_to_yaml(sc);
    std::cerr << "calibrated scenario written to " << out << "\n";
  }
  return 0;
}

int cmd_run_static(const std::string& file, const std::string& map, double duration, std::uint64_t seed,
                   const std::string& out) {
  const auto sc = load_scenario(file);
  const auto table = run_static(map, sc, duration, seed);
  const fs::path dir = out.empty() ? fs::path("runs") / ("static_" + map + "_" + std::to_string(seed)) : fs::path(out);
  write_static_outputs(dir, table);
  std::cout << render_report(dir) << "written to " << dir.string() << "\n";
  return 0;
}

int cmd_run_dynamic(const std::string& file, std::uint64_t seed, const std::string& out) {
  const auto sc = load_scenario(file);
  const auto run = run_dynamic(sc, seed);
  const fs::path dir = out.empty() ? fs::path("runs") / ("dynamic_" + std::to_string(seed)) : fs::path(out);
  write_dynamic_outputs(dir, run, sc);
  std::cout << render_report(dir) << "written to " << dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entanglement distribution overlay simulator"};
  app.require_subcommand(1);

  std::string scenario, targets, map, out;
  std::vector<std::string> fit_maps{"I", "IV"};
  double duration = 100.0;
  std::uint64_t seed = 1;

  auto* validate = app.add_subcommand("validate", "Check a scenario file and list its schedule");
  validate->add_option("scenario", scenario, "Scenario YAML")->required()->check(CLI::ExistingFile);

  auto* calibrate = app.add_subcommand("calibrate", "Fit source brightness to target coincidence rates");
  calibrate->add_option("scenario", scenario, "Scenario YAML")->required()->check(CLI::ExistingFile);
  calibrate->add_option("--targets", targets, "Targets YAML")->required()->check(CLI::ExistingFile);
  calibrate->add_option("--fit-maps", fit_maps, "Maps whose targets are fitted; the rest are held out");
  calibrate->add_option("--out", out, "Write the calibrated scenario here");

  auto* stat = app.add_subcommand("run-static", "Run one map for a fixed duration");
  stat->add_option("scenario", scenario, "Scenario YAML")->required()->check(CLI::ExistingFile);
  stat->add_option("--map", map, "Map id")->required();
  stat->add_option("--duration", duration, "Seconds of simulated acquisition")->check(CLI::PositiveNumber);
  stat->add_option("--seed", seed, "Random seed");
  stat->add_option("--out", out, "Run directory");

  auto* dyn = app.add_subcommand("run-dynamic", "Cycle through the scenario schedule");
  dyn->add_option("scenario", scenario, "Scenario YAML")->required()->check(CLI::ExistingFile);
  dyn->add_option("--seed", seed, "Random seed");
  dyn->add_option("--out", out, "Run directory");

  auto* defaults = app.add_subcommand("defaults", "Print the default scenario as YAML");

  std::string run_dir;
  auto* report = app.add_subcommand("report", "Summarize a run directory");
  report->add_option("run-dir", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*defaults) {
      std::cout << scenario_to_yaml(default_scenario());
      return 0;
    }
    if (*validate) return cmd_validate(scenario);
    if (*calibrate) return cmd_calibrate(scenario, targets, fit_maps, out);
    if (*stat) return cmd_run_static(scenario, map, duration, seed, out);
    if (*dyn) return cmd_run_dynamic(scenario, seed, out);
    if (*report) {
      std::cout << render_report(run_dir);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
