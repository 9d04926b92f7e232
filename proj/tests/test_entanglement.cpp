#include <doctest.h>

#include <numbers>
#include <sstream>

#include "eprnet/entanglement.hpp"

using namespace eprnet;
using doctest::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<SettingCounts> expected_counts(double offset, double visibility, double scale, int n = 8) {
  std::vector<SettingCounts> out;
  for (const auto& s : default_settings(n))
    out.push_back({s, scale * coincidence_probability(s, {visibility, offset})});
  return out;
}

double mean_visibility(double rate, double diffusion, int seeds) {
  double sum = 0.0;
  ScanConfig cfg;
  cfg.true_rate = rate;
  const auto settings = default_settings();
  for (int s = 0; s < seeds; ++s)
    sum += scan_and_fit({0.955, 0.0}, {diffusion}, cfg, settings, 1200.0, 1000 + s).estimate.value;
  return sum / seeds;
}

}  // namespace

TEST_CASE("coincidence probability examples") {
  CHECK(coincidence_probability({0.3, 0.3}, {1.0, 0.0}) == Approx(0.5));
  for (double v : {0.0, 0.4, 1.0}) CHECK(coincidence_probability({0.0, kPi / 4.0}, {v, 0.0}) == Approx(0.25));
  CHECK(coincidence_probability({0.0, 0.0}, {1.0, kPi / 4.0}) == Approx(0.25));
  for (double a : {0.0, 0.7, 2.0}) CHECK(coincidence_probability({a, 0.1}, {0.0, 0.3}) == Approx(0.25));
}

TEST_CASE("uniform average over the remote analyzer is one quarter") {
  for (double v : {0.0, 0.5, 0.955, 1.0})
    for (double off : {0.0, 0.37, 2.5}) {
      double sum = 0.0;
      const int n = 720;
      for (int k = 0; k < n; ++k) sum += coincidence_probability({0.2, kPi * k / n}, {v, off});
      CHECK(sum / n == Approx(0.25).epsilon(1e-12));
    }
}

TEST_CASE("basis offset wraps modulo pi") {
  CHECK(wrap_offset(kPi + 0.25) == Approx(0.25));
  CHECK(wrap_offset(-0.25) == Approx(kPi - 0.25));
}

TEST_CASE("classical limit is strict at one over root two") {
  CHECK(exceeds_classical_limit(0.886));
  CHECK(exceeds_classical_limit(0.841));
  CHECK_FALSE(exceeds_classical_limit(0.70710));
  CHECK_FALSE(exceeds_classical_limit(kClassicalVisibilityLimit));
  CHECK(exceeds_classical_limit(0.7072));
}

TEST_CASE("tracker fixed point, recovery and low-count bound") {
  CHECK(drift_tracker_step(0.0, expected_counts(0.0, 0.9, 1e6)) == Approx(0.0).epsilon(1e-6));
  // Oracle: the likelihood peak of expected counts sits at the true offset.
  const double moved = drift_tracker_step(0.0, expected_counts(0.1, 0.9, 1e8));
  CHECK(moved == Approx(0.1).epsilon(0.01));
  auto one = expected_counts(0.0, 0.9, 0.0);
  one[3].counts = 1.0;
  const TrackerConfig cfg;
  CHECK(std::abs(drift_tracker_step(0.2, one, cfg) - 0.2) < cfg.max_step);
  CHECK(drift_tracker_step(0.4, expected_counts(0.0, 0.9, 0.0)) == 0.4);
  CHECK_THROWS_AS(drift_tracker_step(0.0, std::span<const SettingCounts>{}), std::invalid_argument);
}

TEST_CASE("noiseless scan recovers perfect visibility") {
  ScanConfig cfg;
  cfg.true_rate = 50.0;
  cfg.noiseless = true;
  cfg.tracker_enabled = false;
  const auto r = scan_and_fit({1.0, 0.3}, {0.0}, cfg, default_settings(), 100.0, 1);
  CHECK(r.estimate.value == Approx(1.0).epsilon(1e-9));
  CHECK(r.estimate.phase == Approx(0.3).epsilon(1e-9));
}

TEST_CASE("scan needs four distinct angles over a half period") {
  ScanConfig cfg;
  cfg.true_rate = 10.0;
  CHECK_THROWS_AS(scan_and_fit({0.9, 0.0}, {0.0}, cfg, default_settings(3), 10.0, 1), std::invalid_argument);
  const std::vector<AnalyzerSetting> bunched{{0, 0.0}, {0, 0.1}, {0, 0.2}, {0, 0.3}};
  CHECK_THROWS_AS(scan_and_fit({0.9, 0.0}, {0.0}, cfg, bunched, 10.0, 1), std::invalid_argument);
}

TEST_CASE("high-rate drift-free scan reproduces the reference visibility") {
  ScanConfig cfg;
  cfg.true_rate = 200.0;
  int within = 0;
  for (int s = 0; s < 50; ++s) {
    const auto r = scan_and_fit({0.955, 0.0}, {0.0}, cfg, default_settings(), 1200.0, s);
    within += std::abs(r.estimate.value - 0.955) <= 0.033;
  }
  CHECK(within >= 48);
}

TEST_CASE("fitted visibility stays consistent with the intrinsic value") {
  ScanConfig cfg;
  cfg.true_rate = 2.0;
  for (int s = 0; s < 100; ++s) {
    const auto r = scan_and_fit({0.955, 0.0}, {8e-4}, cfg, default_settings(), 1200.0, 500 + s);
    REQUIRE(r.estimate.raw_value <= 0.955 + 3.0 * r.estimate.std_error);
    REQUIRE(r.estimate.std_error >= 0.0);
  }
}

TEST_CASE("mean visibility falls with drift and rises with rate") {
  const double rates[] = {1.85, 8.0, 50.0};
  const double diffusions[] = {2e-4, 8e-4, 3e-3};
  double grid[3][3];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) grid[i][j] = mean_visibility(rates[i], diffusions[j], 50);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) CHECK(grid[i][j] >= grid[i][j + 1]);
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 2; ++i) CHECK(grid[i][j] <= grid[i + 1][j]);
}

TEST_CASE("scan exports") {
  std::vector<ScanPoint> pts{{{0.0, 0.0}, 10.0, 42.0}};
  std::stringstream ss;
  write_scan_csv(ss, pts);
  CHECK(ss.str() == "theta_remote,dwell_s,counts\n0,10,42\n");
  VisibilityEstimate est;
  est.value = 0.9;
  CHECK(fit_report_json(est).find("\"exceeds_classical_limit\": \"pass\"") != std::string::npos);
}
