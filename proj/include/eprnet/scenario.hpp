#pragma once

// Scenario configuration: plant, sources, detectors, maps, schedule and AMC.
// The YAML grammar is documented in docs/formats.md.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "eprnet/control_plane.hpp"
#include "eprnet/core_model.hpp"
#include "eprnet/entanglement.hpp"
#include "eprnet/optical_plant.hpp"
#include "eprnet/photon_stats.hpp"

namespace eprnet {

/// Basis-offset diffusion (rad^2/s) that reproduces the low-rate visibility
/// band with the default tracker; a fitted, not measured, value.
inline constexpr double kDefaultDriftDiffusion = 8.0e-4;

struct ScheduleEntry {
  std::string map;
  double dwell_s = 10.0;
};

struct AnalysisConfig {
  CountOptions counting;
  int guard_bins = 1;
};

struct VisibilityConfig {
  double intrinsic = 0.955;
  int settings = 8;
  double sub_dwell_s = 1.0;
  double scan_dwell_s = 1200.0;
  double drift_diffusion = kDefaultDriftDiffusion;
  double analyzer_loss_db = 6.0;  // per analyzer unit; one at E and one at the edge site
  bool tracker_enabled = true;
  TrackerConfig tracker;

  double analyzer_transmittance() const;
};

struct AmcConfig {
  AmcMode mode = AmcMode::Gated;
  RamanModel raman;
  double instruction_duration_s = kDefaultInstructionDuration;
};

struct Scenario {
  std::string name = "default";
  PlantConfig plant;
  PairStreamModel sources;
  std::array<DetectorModel, kAllSites.size()> detectors;
  AnalysisConfig analysis;
  VisibilityConfig visibility;
  std::map<std::string, DistributionMap> maps;  // custom maps by id
  std::vector<ScheduleEntry> schedule;
  double acquisition_bin_s = 0.050;
  std::uint64_t seed = 1;
  AmcConfig amc;

  const DetectorModel& detector(Site s) const { return detectors[static_cast<std::size_t>(s)]; }
  DetectorModel& detector(Site s) { return detectors[static_cast<std::size_t>(s)]; }

  /// Built-in ids first, then custom maps. Throws for unknown ids.
  DistributionMap resolve_map(const std::string& id) const;

  /// Throws std::invalid_argument (InvalidMapError for bad maps) on the first problem.
  void check() const;
};

/// Calibrated sources, testbed detectors and the I..VI cycle at 10 s per map.
Scenario default_scenario();

Scenario parse_scenario(const std::string& yaml_text);
Scenario load_scenario(const std::filesystem::path& path);
std::string scenario_to_yaml(const Scenario& s);

}  // namespace eprnet
