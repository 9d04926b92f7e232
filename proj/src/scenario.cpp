#include "eprnet/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace eprnet {
namespace {

void allow_keys(const YAML::Node& node, const std::string& where, std::initializer_list<const char*> keys) {
  if (!node.IsMap()) throw std::invalid_argument("'" + where + "' must be a mapping");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) throw std::invalid_argument("unknown key '" + key + "' in '" + where + "'");
  }
}

template <typename T>
void read(const YAML::Node& node, const char* key, T& out) {
  if (!node[key]) return;
  try {
    out = node[key].as<T>();
  } catch (const YAML::Exception&) {
    throw std::invalid_argument(std::string("bad value for '") + key + "'");
  }
}

void read_attenuation(const YAML::Node& node, std::map<Band, double>& out) {
  if (!node) return;
  if (!node.IsMap()) throw std::invalid_argument("attenuation_db_per_km must be a mapping");
  for (const auto& kv : node) out[parse_band(kv.first.as<std::string>())] = kv.second.as<double>();
}

void read_span(const YAML::Node& node, const std::string& where, FiberSpan& span) {
  if (!node) return;
  allow_keys(node, where, {"length_km", "attenuation_db_per_km"});
  read(node, "length_km", span.length_km);
  read_attenuation(node["attenuation_db_per_km"], span.attenuation_db_per_km);
}

void read_plant(const YAML::Node& node, PlantConfig& plant) {
  if (!node) return;
  allow_keys(node, "plant", {"feeder", "drop", "node"});
  read_span(node["feeder"], "plant.feeder", plant.feeder);
  read_span(node["drop"], "plant.drop", plant.drop);
  if (const auto n = node["node"]) {
    allow_keys(n, "plant.node",
               {"switch_ports", "loss_min_db", "loss_max_db", "single_pass_loss_db", "foldback_loss_db",
                "response_time_s", "traversal_delay_s", "traversal_rule"});
    auto& c = plant.node;
    read(n, "switch_ports", c.switch_ports);
    read(n, "loss_min_db", c.loss_min_db);
    read(n, "loss_max_db", c.loss_max_db);
    read(n, "single_pass_loss_db", c.single_pass_loss_db);
    read(n, "foldback_loss_db", c.foldback_loss_db);
    read(n, "response_time_s", c.response_time_s);
    read(n, "traversal_delay_s", c.traversal_delay_s);
    if (n["traversal_rule"]) c.rule = parse_traversal_rule(n["traversal_rule"].as<std::string>());
  }
}

void read_sources(const YAML::Node& node, PairStreamModel& sources) {
  if (!node) return;
  if (!node.IsMap()) throw std::invalid_argument("'sources' must be a mapping");
  for (const auto& kv : node) {
    const auto name = kv.first.as<std::string>();
    auto& s = sources.at(parse_stream(name));
    allow_keys(kv.second, "sources." + name, {"brightness_pps", "foldback_excess_db"});
    read(kv.second, "brightness_pps", s.brightness_pps);
    read(kv.second, "foldback_excess_db", s.foldback_excess_db);
  }
}

void read_detectors(const YAML::Node& node, Scenario& sc) {
  if (!node) return;
  if (!node.IsMap()) throw std::invalid_argument("'detectors' must be a mapping");
  for (const auto& kv : node) {
    const auto name = kv.first.as<std::string>();
    auto& d = sc.detector(parse_site(name));
    allow_keys(kv.second, "detectors." + name,
               {"mode", "efficiency", "dark_rate", "dead_time_s", "gate_duty", "jitter_s"});
    if (kv.second["mode"]) d.mode = parse_detector_mode(kv.second["mode"].as<std::string>());
    read(kv.second, "efficiency", d.efficiency);
    read(kv.second, "dark_rate", d.dark_rate);
    read(kv.second, "dead_time_s", d.dead_time_s);
    read(kv.second, "gate_duty", d.gate_duty);
    read(kv.second, "jitter_s", d.jitter_sigma_s);
  }
}

void read_analysis(const YAML::Node& node, AnalysisConfig& a) {
  if (!node) return;
  allow_keys(node, "analysis", {"window_s", "scan_range_s", "bin_width_s", "guard_bins"});
  read(node, "window_s", a.counting.window_s);
  read(node, "scan_range_s", a.counting.scan_range_s);
  read(node, "bin_width_s", a.counting.bin_width_s);
  read(node, "guard_bins", a.guard_bins);
}

void read_visibility(const YAML::Node& node, VisibilityConfig& v) {
  if (!node) return;
  allow_keys(node, "visibility",
             {"intrinsic", "settings", "sub_dwell_s", "scan_dwell_s", "drift_diffusion", "analyzer_loss_db",
              "tracker"});
  read(node, "intrinsic", v.intrinsic);
  read(node, "settings", v.settings);
  read(node, "sub_dwell_s", v.sub_dwell_s);
  read(node, "scan_dwell_s", v.scan_dwell_s);
  read(node, "drift_diffusion", v.drift_diffusion);
  read(node, "analyzer_loss_db", v.analyzer_loss_db);
  if (const auto t = node["tracker"]) {
    allow_keys(t, "visibility.tracker", {"enabled", "model_visibility", "prior_sigma", "max_step"});
    read(t, "enabled", v.tracker_enabled);
    read(t, "model_visibility", v.tracker.model_visibility);
    read(t, "prior_sigma", v.tracker.prior_sigma);
    read(t, "max_step", v.tracker.max_step);
  }
}

void read_maps(const YAML::Node& node, Scenario& sc) {
  if (!node) return;
  if (!node.IsMap()) throw std::invalid_argument("'maps' must be a mapping of id -> assignment lines");
  for (const auto& kv : node) {
    const auto id = kv.first.as<std::string>();
    if (parse_map_id(id)) throw std::invalid_argument("custom map id '" + id + "' shadows a built-in map");
    if (!kv.second.IsSequence()) throw std::invalid_argument("map '" + id + "' must be a list of assignments");
    sc.maps[id] = map_from_lines(id, kv.second.as<std::vector<std::string>>());
  }
}

void read_schedule(const YAML::Node& node, Scenario& sc) {
  if (!node) return;
  if (!node.IsSequence()) throw std::invalid_argument("'schedule' must be a list");
  sc.schedule.clear();
  for (const auto& e : node) {
    allow_keys(e, "schedule entry", {"map", "dwell_s"});
    ScheduleEntry entry;
    if (!e["map"]) throw std::invalid_argument("schedule entry needs 'map'");
    read(e, "map", entry.map);
    read(e, "dwell_s", entry.dwell_s);
    sc.schedule.push_back(entry);
  }
}

void read_amc(const YAML::Node& node, AmcConfig& amc) {
  if (!node) return;
  allow_keys(node, "amc", {"mode", "launch_power_mw", "instruction_duration_s", "raman"});
  if (node["mode"]) amc.mode = parse_amc_mode(node["mode"].as<std::string>());
  read(node, "launch_power_mw", amc.raman.launch_power_mw);
  read(node, "instruction_duration_s", amc.instruction_duration_s);
  if (const auto r = node["raman"]) {
    if (!r.IsMap()) throw std::invalid_argument("amc.raman must be a mapping of band -> coefficient");
    for (const auto& kv : r) amc.raman.coefficient[parse_band(kv.first.as<std::string>())] = kv.second.as<double>();
  }
}

// Rewrites max_digits10 scalars such as 0.050000000000000003 in their shortest round-trip form.
void shorten_numbers(YAML::Node node) {
  if (node.IsMap()) {
    for (auto it : node) shorten_numbers(it.second);
  } else if (node.IsSequence()) {
    for (auto child : node) shorten_numbers(child);
  } else if (node.IsScalar()) {
    const auto& text = node.Scalar();
    double x = 0.0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), x);
    if (text.size() < 16 || ec != std::errc{} || end != text.data() + text.size()) return;
    char buf[32];
    node = std::string(buf, std::to_chars(buf, buf + sizeof buf, x).ptr);
  }
}

YAML::Node span_node(const FiberSpan& s) {
  YAML::Node n;
  n["length_km"] = s.length_km;
  for (const auto& [band, a] : s.attenuation_db_per_km) n["attenuation_db_per_km"][std::string(to_string(band))] = a;
  return n;
}

}  // namespace

double VisibilityConfig::analyzer_transmittance() const { return std::pow(10.0, -2.0 * analyzer_loss_db / 10.0); }

DistributionMap Scenario::resolve_map(const std::string& id) const {
  if (parse_map_id(id)) return builtin_map(id);
  auto it = maps.find(id);
  if (it == maps.end()) throw std::invalid_argument("unknown map '" + id + "'");
  return it->second;
}

void Scenario::check() const {
  plant.check();
  for (const auto& s : sources.streams) s.check();
  for (const auto& d : detectors) d.check();
  if (!(acquisition_bin_s > 0.0)) throw std::invalid_argument("acquisition_bin_s must be > 0");
  if (!(analysis.counting.window_s > 0.0)) throw std::invalid_argument("coincidence window must be > 0");
  if (!(analysis.counting.bin_width_s > 0.0) || !(analysis.counting.scan_range_s >= analysis.counting.window_s))
    throw std::invalid_argument("delay histogram needs bin_width_s > 0 and scan_range_s >= window_s");
  if (analysis.guard_bins < 0) throw std::invalid_argument("guard_bins must be >= 0");
  if (visibility.intrinsic < 0.0 || visibility.intrinsic > 1.0)
    throw std::invalid_argument("intrinsic visibility must be in [0,1]");
  if (visibility.settings < 4) throw std::invalid_argument("visibility scan needs at least 4 settings");
  if (!(visibility.sub_dwell_s > 0.0) || !(visibility.scan_dwell_s > 0.0))
    throw std::invalid_argument("visibility dwell times must be > 0");
  if (!(visibility.drift_diffusion >= 0.0)) throw std::invalid_argument("drift diffusion must be >= 0");
  if (!(visibility.analyzer_loss_db >= 0.0)) throw std::invalid_argument("analyzer loss must be >= 0");
  amc.raman.check();
  if (!(amc.instruction_duration_s > 0.0)) throw std::invalid_argument("instruction duration must be > 0");
  for (const auto& [id, map] : maps) require_valid(map);
  if (schedule.empty()) throw std::invalid_argument("schedule must not be empty");
  for (const auto& e : schedule) {
    if (!(e.dwell_s > 0.0)) throw std::invalid_argument("dwell for map '" + e.map + "' must be > 0");
    if (!(e.dwell_s > amc.instruction_duration_s + plant.node.response_time_s))
      throw std::invalid_argument("dwell for map '" + e.map + "' is shorter than one reconfiguration");
    const auto map = resolve_map(e.map);
    require_valid(map);
    switch_permutation(map, plant.node.switch_ports);
  }
}

Scenario default_scenario() {
  Scenario sc;
  sc.sources.at(kStreams[0]).brightness_pps = 1217818.8;
  sc.sources.at(kStreams[0]).foldback_excess_db = -0.86369;
  sc.sources.at(kStreams[1]).brightness_pps = 1079430.3;
  sc.sources.at(kStreams[1]).foldback_excess_db = 5.52913;
  sc.sources.at(kStreams[2]).brightness_pps = 1783066.8;

  DetectorModel free_running;
  DetectorModel gated{DetectorMode::Gated, 0.10, 20.0, 1e-6, 0.10, 100e-12};
  DetectorModel silicon{DetectorMode::FreeRunning, 0.01, 50.0, 1e-6, 1.0, 100e-12};
  sc.detector(Site::A) = free_running;
  sc.detector(Site::B) = gated;
  sc.detector(Site::C) = free_running;
  sc.detector(Site::D) = gated;
  sc.detector(Site::E) = silicon;

  for (auto id : kBuiltinMaps) sc.schedule.push_back({std::string(to_string(id)), 10.0});
  return sc;
}

Scenario parse_scenario(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw std::invalid_argument(std::string("scenario is not valid YAML: ") + e.what());
  }
  Scenario sc = default_scenario();
  if (root.IsNull()) return sc;
  allow_keys(root, "scenario",
             {"name", "seed", "acquisition_bin_s", "plant", "sources", "detectors", "analysis", "visibility", "maps",
              "schedule", "amc"});
  try {
    read(root, "name", sc.name);
    read(root, "seed", sc.seed);
    read(root, "acquisition_bin_s", sc.acquisition_bin_s);
    read_plant(root["plant"], sc.plant);
    read_sources(root["sources"], sc.sources);
    read_detectors(root["detectors"], sc);
    read_analysis(root["analysis"], sc.analysis);
    read_visibility(root["visibility"], sc.visibility);
    read_maps(root["maps"], sc);
    read_schedule(root["schedule"], sc);
    read_amc(root["amc"], sc.amc);
  } catch (const YAML::Exception& e) {
    throw std::invalid_argument(std::string("malformed scenario: ") + e.what());
  }
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read scenario " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_scenario(ss.str());
}

std::string scenario_to_yaml(const Scenario& sc) {
  YAML::Node root;
  root["name"] = sc.name;
  root["seed"] = sc.seed;
  root["acquisition_bin_s"] = sc.acquisition_bin_s;
  root["plant"]["feeder"] = span_node(sc.plant.feeder);
  root["plant"]["drop"] = span_node(sc.plant.drop);
  auto node = root["plant"]["node"];
  const auto& c = sc.plant.node;
  node["switch_ports"] = c.switch_ports;
  node["loss_min_db"] = c.loss_min_db;
  node["loss_max_db"] = c.loss_max_db;
  node["single_pass_loss_db"] = c.single_pass_loss_db;
  node["foldback_loss_db"] = c.foldback_loss_db;
  node["response_time_s"] = c.response_time_s;
  node["traversal_delay_s"] = c.traversal_delay_s;
  node["traversal_rule"] = std::string(to_string(c.rule));
  for (const auto& s : sc.sources.streams) {
    auto n = root["sources"][to_string(s.key)];
    n["brightness_pps"] = s.brightness_pps;
    n["foldback_excess_db"] = s.foldback_excess_db;
  }
  for (Site site : kAllSites) {
    const auto& d = sc.detector(site);
    auto n = root["detectors"][std::string(to_string(site))];
    n["mode"] = std::string(to_string(d.mode));
    n["efficiency"] = d.efficiency;
    n["dark_rate"] = d.dark_rate;
    n["dead_time_s"] = d.dead_time_s;
    n["gate_duty"] = d.gate_duty;
    n["jitter_s"] = d.jitter_sigma_s;
  }
  root["analysis"]["window_s"] = sc.analysis.counting.window_s;
  root["analysis"]["scan_range_s"] = sc.analysis.counting.scan_range_s;
  root["analysis"]["bin_width_s"] = sc.analysis.counting.bin_width_s;
  root["analysis"]["guard_bins"] = sc.analysis.guard_bins;
  auto v = root["visibility"];
  v["intrinsic"] = sc.visibility.intrinsic;
  v["settings"] = sc.visibility.settings;
  v["sub_dwell_s"] = sc.visibility.sub_dwell_s;
  v["scan_dwell_s"] = sc.visibility.scan_dwell_s;
  v["drift_diffusion"] = sc.visibility.drift_diffusion;
  v["analyzer_loss_db"] = sc.visibility.analyzer_loss_db;
  v["tracker"]["enabled"] = sc.visibility.tracker_enabled;
  v["tracker"]["model_visibility"] = sc.visibility.tracker.model_visibility;
  v["tracker"]["prior_sigma"] = sc.visibility.tracker.prior_sigma;
  v["tracker"]["max_step"] = sc.visibility.tracker.max_step;
  for (const auto& [id, map] : sc.maps) root["maps"][id] = map_to_lines(map);
  for (const auto& e : sc.schedule) {
    YAML::Node n;
    n["map"] = e.map;
    n["dwell_s"] = e.dwell_s;
    root["schedule"].push_back(n);
  }
  root["amc"]["mode"] = std::string(to_string(sc.amc.mode));
  root["amc"]["launch_power_mw"] = sc.amc.raman.launch_power_mw;
  root["amc"]["instruction_duration_s"] = sc.amc.instruction_duration_s;
  for (const auto& [band, coeff] : sc.amc.raman.coefficient) root["amc"]["raman"][std::string(to_string(band))] = coeff;
  shorten_numbers(root);
  YAML::Emitter out;
  out << root;
  return std::string(out.c_str()) + "\n";
}

}  // namespace eprnet
