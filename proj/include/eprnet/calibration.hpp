#pragma once

// Fits per-stream brightness (and fold-back excess loss) to target coincidence rates.

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eprnet/scenario.hpp"

namespace eprnet {

struct RateTarget {
  std::string map;    // map id
  std::string sites;  // "A-D", "E-D"
  StreamKey stream;
  double rate = 0.0;  // cc/s
};

std::vector<RateTarget> parse_targets(const std::string& yaml_text);
std::vector<RateTarget> load_targets(const std::filesystem::path& path);

/// B = R / (eta_pair * T_a * T_b).
double invert_brightness(double rate, double transmittance_a, double transmittance_b, double pair_efficiency);

/// Analytic true-coincidence rate of the link a target refers to, under `sources`.
double predicted_rate(const Scenario& scenario, const RateTarget& target, const PairStreamModel& sources);

/// Node loss per arm (dB) on the link a target refers to.
std::pair<double, double> link_node_loss(const Scenario& scenario, const RateTarget& target);

struct TargetResidual {
  RateTarget target;
  double predicted = 0.0;
  double relative = 0.0;  // predicted / target - 1
  bool used_in_fit = false;
  bool flagged = false;  // |relative| > 10 %
};

struct CalibrationResult {
  PairStreamModel sources;
  std::vector<TargetResidual> residuals;

  bool within_tolerance() const;
  nlohmann::json to_json() const;
};

class CalibrationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Log-domain weighted least squares per stream over brightness and, when a
/// stream has both single-pass and fold-back targets, its fold-back excess.
/// `check_targets` are evaluated with the fitted model but not fitted.
CalibrationResult calibrate_brightness(std::span<const RateTarget> fit_targets, const Scenario& scenario,
                                       std::span<const RateTarget> check_targets = {});

}  // namespace eprnet
