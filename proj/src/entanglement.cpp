#include "eprnet/entanglement.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <nlohmann/json.hpp>
#include <numbers>
#include <ostream>
#include <random>
#include <stdexcept>

namespace eprnet {
namespace {

constexpr double kPi = std::numbers::pi;

struct Posterior {
  std::vector<double> cos2, sin2, counts;
  double visibility = 0.0;
  double inv_two_var = 0.0;

  Posterior(std::span<const SettingCounts> recent, const TrackerConfig& cfg)
      : visibility(cfg.model_visibility), inv_two_var(1.0 / (2.0 * cfg.prior_sigma * cfg.prior_sigma)) {
    for (const auto& s : recent) {
      const double d = 2.0 * (s.setting.theta_local - s.setting.theta_remote);
      cos2.push_back(std::cos(d));
      sin2.push_back(std::sin(d));
      counts.push_back(s.counts);
    }
  }

  double operator()(double r) const {
    const double c = std::cos(2.0 * r), s = std::sin(2.0 * r);
    double norm = 0.0, ll = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      const double lam = std::max(1e-12, 1.0 + visibility * (cos2[i] * c + sin2[i] * s));
      norm += lam;
      if (counts[i] > 0.0) ll += counts[i] * std::log(lam);
    }
    double total = 0.0;
    for (double n : counts) total += n;
    return ll - total * std::log(norm) - r * r * inv_two_var;
  }
};

void check_settings(std::span<const AnalyzerSetting> settings) {
  std::vector<double> angles;
  for (const auto& s : settings) {
    const double a = wrap_offset(s.theta_remote - s.theta_local);
    if (std::none_of(angles.begin(), angles.end(), [&](double b) { return std::abs(a - b) < 1e-9; }))
      angles.push_back(a);
  }
  if (angles.size() < 4) throw std::invalid_argument("visibility scan needs at least 4 distinct analyzer angles");
  std::sort(angles.begin(), angles.end());
  double max_gap = angles.front() + kPi - angles.back();
  for (std::size_t i = 1; i < angles.size(); ++i) max_gap = std::max(max_gap, angles[i] - angles[i - 1]);
  if (max_gap > kPi / 2.0 + 1e-9)
    throw std::invalid_argument("visibility scan angles must span a half-period");
}

VisibilityEstimate grid_fit(std::span<const ScanPoint> points) {
  VisibilityEstimate best;
  double best_chi2 = std::numeric_limits<double>::infinity();
  for (int g = 0; g < 360; ++g) {
    const double phase = kPi * g / 360.0;
    Eigen::Matrix2d m = Eigen::Matrix2d::Zero();
    Eigen::Vector2d v = Eigen::Vector2d::Zero();
    for (const auto& p : points) {
      const double w = p.dwell_s * p.dwell_s / std::max(p.counts, 1.0);
      const double y = p.counts / p.dwell_s;
      const double c = std::cos(2.0 * (p.setting.theta_local - p.setting.theta_remote - phase));
      Eigen::Vector2d row(1.0, c);
      m += w * row * row.transpose();
      v += w * y * row;
    }
    if (std::abs(m.determinant()) < 1e-300) continue;
    Eigen::Vector2d sol = m.ldlt().solve(v);
    if (sol[1] < 0.0) continue;
    double chi2 = 0.0;
    for (const auto& p : points) {
      const double w = p.dwell_s * p.dwell_s / std::max(p.counts, 1.0);
      const double c = std::cos(2.0 * (p.setting.theta_local - p.setting.theta_remote - phase));
      const double res = p.counts / p.dwell_s - (sol[0] + sol[1] * c);
      chi2 += w * res * res;
    }
    if (chi2 < best_chi2) {
      best_chi2 = chi2;
      best.raw_value = sol[0] > 0.0 ? sol[1] / sol[0] : 0.0;
      best.phase = phase;
      Eigen::Matrix2d cov = m.inverse();
      best.std_error = sol[0] > 0.0 ? std::sqrt(std::max(0.0, cov(1, 1))) / sol[0] : 1.0;
    }
  }
  return best;
}

}  // namespace

double wrap_offset(double radians) {
  double w = std::fmod(radians, kPi);
  if (w < 0.0) w += kPi;
  return w;
}

double coincidence_probability(const AnalyzerSetting& setting, const PolarizationPairState& state) {
  const double x = setting.theta_local - setting.theta_remote - state.basis_offset;
  return 0.25 * (1.0 + state.intrinsic_visibility * std::cos(2.0 * x));
}

std::vector<AnalyzerSetting> default_settings(int n) {
  std::vector<AnalyzerSetting> out;
  for (int k = 0; k < n; ++k) out.push_back({0.0, kPi * k / n});
  return out;
}

double drift_tracker_step(double current_correction, std::span<const SettingCounts> recent,
                          const TrackerConfig& config) {
  if (recent.size() < 2) throw std::invalid_argument("drift tracker needs counts from at least 2 settings");
  double total = 0.0;
  for (const auto& r : recent) total += r.counts;
  if (!(total > 0.0)) return current_correction;

  const Posterior log_posterior(recent, config);
  double best = 0.0, best_lp = log_posterior(0.0);
  constexpr int kGrid = 120;
  for (int g = 0; g < kGrid; ++g) {
    const double r = -kPi / 2.0 + kPi * g / kGrid;
    const double lp = log_posterior(r);
    if (lp > best_lp) {
      best_lp = lp;
      best = r;
    }
  }
  // Golden-section refinement around the grid optimum.
  const double step = kPi / kGrid;
  double lo = best - step, hi = best + step;
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = log_posterior(x1), f2 = log_posterior(x2);
  for (int it = 0; it < 40; ++it) {
    if (f1 > f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = log_posterior(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = log_posterior(x2);
    }
  }
  const double shift = std::clamp(0.5 * (lo + hi), -config.max_step, config.max_step);
  return current_correction + shift;
}

VisibilityEstimate fit_visibility(std::span<const ScanPoint> points) {
  VisibilityEstimate est;
  for (const auto& p : points) {
    if (!(p.dwell_s > 0.0)) throw std::invalid_argument("scan point dwell must be positive");
    est.counts_used += static_cast<std::uint64_t>(std::llround(std::max(0.0, p.counts)));
  }
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  for (const auto& p : points) {
    const double w = p.dwell_s * p.dwell_s / std::max(p.counts, 1.0);
    const double phi = 2.0 * (p.setting.theta_local - p.setting.theta_remote);
    Eigen::Vector3d row(1.0, std::cos(phi), std::sin(phi));
    m += w * row * row.transpose();
    v += w * (p.counts / p.dwell_s) * row;
  }
  Eigen::FullPivLU<Eigen::Matrix3d> lu(m);
  bool degenerate = lu.rank() < 3;
  Eigen::Vector3d c;
  if (!degenerate) {
    c = lu.solve(v);
    degenerate = !(c[0] > 0.0);
  }
  if (degenerate) {
    auto g = grid_fit(points);
    g.counts_used = est.counts_used;
    g.value = std::clamp(g.raw_value, 0.0, 1.0);
    return g;
  }
  const double amp = std::hypot(c[1], c[2]);
  est.raw_value = amp / c[0];
  est.value = std::clamp(est.raw_value, 0.0, 1.0);
  est.phase = wrap_offset(0.5 * std::atan2(c[2], c[1]));
  Eigen::Matrix3d cov = m.inverse();
  Eigen::Vector3d grad;
  if (amp > 0.0)
    grad << -est.raw_value / c[0], c[1] / (c[0] * amp), c[2] / (c[0] * amp);
  else
    grad << 0.0, 1.0 / c[0], 0.0;
  est.std_error = std::sqrt(std::max(0.0, static_cast<double>(grad.transpose() * cov * grad)));
  return est;
}

ScanResult scan_and_fit(const PolarizationPairState& state, const DriftProcess& drift, const ScanConfig& config,
                        std::span<const AnalyzerSetting> settings, double dwell_s, std::uint64_t seed) {
  check_settings(settings);
  if (!(dwell_s > 0.0) || !(config.sub_dwell_s > 0.0)) throw std::invalid_argument("dwell times must be positive");
  if (!(config.true_rate >= 0.0)) throw std::invalid_argument("coincidence rate must be >= 0");
  if (!(drift.diffusion >= 0.0)) throw std::invalid_argument("drift diffusion must be >= 0");
  if (state.intrinsic_visibility < 0.0 || state.intrinsic_visibility > 1.0)
    throw std::invalid_argument("intrinsic visibility must be in [0,1]");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);

  ScanResult out;
  out.points.reserve(settings.size());
  for (const auto& s : settings) out.points.push_back({s, 0.0, 0.0});

  double offset = state.basis_offset, correction = 0.0;
  std::vector<SettingCounts> round(settings.size());
  double remaining = dwell_s;
  while (remaining > 1e-12) {
    const double slot = std::min(config.sub_dwell_s, remaining);
    remaining -= slot;
    for (std::size_t i = 0; i < settings.size(); ++i) {
      if (drift.diffusion > 0.0) offset += std::sqrt(drift.diffusion * slot) * unit(rng);
      PolarizationPairState now{state.intrinsic_visibility, offset - correction};
      const double mean = config.true_rate * slot * coincidence_probability(settings[i], now);
      const double n = config.noiseless ? mean
                                        : static_cast<double>(mean > 0.0
                                                                  ? std::poisson_distribution<std::uint64_t>(mean)(rng)
                                                                  : 0);
      out.points[i].dwell_s += slot;
      out.points[i].counts += n;
      round[i] = {settings[i], n};
    }
    if (config.tracker_enabled) correction = drift_tracker_step(correction, round, config.tracker);
  }
  out.final_offset = wrap_offset(offset);
  out.final_correction = correction;
  out.estimate = fit_visibility(out.points);
  return out;
}

bool exceeds_classical_limit(double visibility) { return visibility > kClassicalVisibilityLimit; }
bool exceeds_classical_limit(const VisibilityEstimate& est) { return exceeds_classical_limit(est.value); }

void write_scan_csv(std::ostream& os, std::span<const ScanPoint> points) {
  os << "theta_remote,dwell_s,counts\n";
  for (const auto& p : points) os << p.setting.theta_remote << "," << p.dwell_s << "," << p.counts << "\n";
}

std::string fit_report_json(const VisibilityEstimate& est) {
  nlohmann::json j{{"V", est.value},
                   {"V_raw", est.raw_value},
                   {"std_error", est.std_error},
                   {"counts_used", est.counts_used},
                   {"classical_limit", kClassicalVisibilityLimit},
                   {"exceeds_classical_limit", exceeds_classical_limit(est) ? "pass" : "fail"}};
  return j.dump(2);
}

}  // namespace eprnet
