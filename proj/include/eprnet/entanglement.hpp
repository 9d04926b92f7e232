#pragma once

// Polarization-correlation model, analyzer scans with fiber drift, visibility
// fitting and the classical-limit test for the cloud-to-edge links.

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace eprnet {

/// Visibility a classical (local) model cannot exceed: 1/sqrt(2).
inline constexpr double kClassicalVisibilityLimit = 0.70710678118654752440;

struct PolarizationPairState {
  double intrinsic_visibility = 1.0;
  double basis_offset = 0.0;  // rad, kept in [0, pi)
};

double wrap_offset(double radians);

struct AnalyzerSetting {
  double theta_local = 0.0;
  double theta_remote = 0.0;
};

struct DriftProcess {
  double diffusion = 0.0;  // rad^2/s random walk of the basis offset
};

struct VisibilityEstimate {
  double value = 0.0;      // clamped to [0, 1]
  double raw_value = 0.0;  // unclamped fit output
  double std_error = 0.0;
  std::uint64_t counts_used = 0;
  double phase = 0.0;  // fitted angle of the correlation maximum
};

/// P = (1 + V cos 2(theta_local - theta_remote - offset)) / 4.
double coincidence_probability(const AnalyzerSetting& setting, const PolarizationPairState& state);

/// `n` remote settings evenly spaced over one half-period, local analyzer at 0.
std::vector<AnalyzerSetting> default_settings(int n = 8);

struct TrackerConfig {
  double model_visibility = 0.9;
  double prior_sigma = 0.1;  // rad, Gaussian prior on one update
  double max_step = 0.3;     // rad, hard bound on one update
};

struct SettingCounts {
  AnalyzerSetting setting;
  double counts = 0.0;
};

/// Moves the correction by the MAP estimate of the residual offset given
/// equal-exposure counts. Few counts give small, noisy steps.
double drift_tracker_step(double current_correction, std::span<const SettingCounts> recent,
                          const TrackerConfig& config = {});

struct ScanPoint {
  AnalyzerSetting setting;
  double dwell_s = 0.0;
  double counts = 0.0;
};

/// Poisson-weighted linear least squares on counts vs. 2*angle; grid search
/// over the phase when the linear system is degenerate.
VisibilityEstimate fit_visibility(std::span<const ScanPoint> points);

struct ScanConfig {
  double true_rate = 0.0;     // cc/s arriving at the analyzers
  double sub_dwell_s = 1.0;   // settings are visited round-robin in slots of this length
  bool tracker_enabled = true;
  TrackerConfig tracker;
  bool noiseless = false;     // use expected counts instead of Poisson draws
};

struct ScanResult {
  VisibilityEstimate estimate;
  std::vector<ScanPoint> points;  // one per setting, counts accumulated over the scan
  double final_offset = 0.0;
  double final_correction = 0.0;
};

/// Requires >= 4 distinct remote angles whose largest circular gap is <= pi/2.
ScanResult scan_and_fit(const PolarizationPairState& state, const DriftProcess& drift, const ScanConfig& config,
                        std::span<const AnalyzerSetting> settings, double dwell_s, std::uint64_t seed);

bool exceeds_classical_limit(double visibility);
bool exceeds_classical_limit(const VisibilityEstimate& est);

void write_scan_csv(std::ostream& os, std::span<const ScanPoint> points);
std::string fit_report_json(const VisibilityEstimate& est);

}  // namespace eprnet
