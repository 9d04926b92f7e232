#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "eprnet/runner.hpp"

using namespace eprnet;
using doctest::Approx;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

bool same_tree(const fs::path& a, const fs::path& b) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    ++n;
    if (slurp(e.path()) != slurp(b / e.path().filename())) return false;
  }
  return n > 0 && n == static_cast<std::size_t>(std::distance(fs::directory_iterator(b), fs::directory_iterator{}));
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("eprnet_runner_" + name);
  fs::remove_all(p);
  return p;
}

RateTrace flat_trace(std::size_t bins, std::uint32_t value) {
  RateTrace t;
  t.bin_width_s = 0.05;
  t.n_bins = bins;
  t.channels.push_back({"A.C", Site::A, Band::C, 5.0, std::vector<std::uint32_t>(bins, value),
                        std::vector<bool>(bins, true)});
  t.segments.push_back({"I", 0.0, bins * 0.05, 0.0016, 0.0066, 0, bins, 2, {}});
  return t;
}

}  // namespace

TEST_CASE("detection plan covers every band at every edge site plus E") {
  const auto plan = detection_plan(default_scenario());
  CHECK(plan.channels.size() == 13);
  CHECK(plan.channels[plan.index(Site::E, Band::NIR900)].id == "E.NIR900");
  CHECK(plan.channels[plan.index(Site::B, Band::L)].detector.mode == DetectorMode::Gated);
  CHECK_THROWS_AS(plan.index(Site::E, Band::C), std::invalid_argument);
}

TEST_CASE("dynamic range examples") {
  const std::vector<double> two{100.0, 39.8};
  CHECK(dynamic_range(two).db == Approx(4.0).epsilon(1e-3));
  const std::vector<double> flat{7.0, 7.0, 7.0};
  CHECK(dynamic_range(flat).db == 0.0);
  const std::vector<double> dead{5.0, 0.0};
  CHECK(dynamic_range(dead).unbounded);
  CHECK_THROWS_AS(dynamic_range(std::span<const double>{}), std::invalid_argument);
  const auto t = flat_trace(40, 12);
  const std::vector<Site> sites{Site::A};
  CHECK(dynamic_range(t, sites).db == 0.0);
}

TEST_CASE("all-zero trace is one gap over the whole trace") {
  const auto t = flat_trace(40, 0);
  const auto gaps = detect_gaps(t, 0.0);
  REQUIRE(gaps.size() == 1);
  CHECK(gaps[0].first_bin == 0);
  CHECK(gaps[0].bins == 40);
  CHECK(gaps[0].end_s == Approx(2.0));
  CHECK(detect_gaps(flat_trace(40, 50)).empty());
  CHECK_THROWS_AS(detect_gaps(t, -1.0), std::invalid_argument);
}

TEST_CASE("static run with the sources off sits on the accidental floor") {
  auto sc = default_scenario();
  for (auto& s : sc.sources.streams) s.brightness_pps = 0.0;
  const auto table = run_static("III", sc, 20.0, 4);
  CHECK(table.rows.size() == 3);
  for (const auto& r : table.rows) {
    CHECK(r.expected_rate == 0.0);
    const double acc_counts = r.accidental_rate * 20.0;
    CHECK(std::abs(static_cast<double>(r.matched) - acc_counts) <= 3.0 * std::sqrt(acc_counts) + 3.0);
  }
  for (const auto& [id, rate] : table.channel_singles) {
    const auto site = parse_site(id.substr(0, 1));
    CHECK(rate == Approx(sc.detector(site).dark_rate).epsilon(0.2));
  }
}

TEST_CASE("static run rejects invalid maps") {
  auto sc = default_scenario();
  sc.maps["half"] = map_from_lines("half", {"EPR1.s1.C -> A"});
  CHECK_THROWS_AS(run_static("half", sc, 10.0, 1), InvalidMapError);
  CHECK_THROWS_AS(run_static("VII", sc, 10.0, 1), std::invalid_argument);
}

TEST_CASE("static map-I run reproduces its calibration rows") {
  const auto sc = default_scenario();
  const auto t = run_static("I", sc, 100.0, 2);
  const auto& s1 = t.row("A-D", kStreams[0]);
  const auto& s2 = t.row("B-C", kStreams[1]);
  CHECK(std::abs(s1.rate - 5.9) <= 3.0 * std::sqrt(5.9 / 100.0));
  CHECK(std::abs(s2.rate - 1.2) <= 3.0 * std::sqrt(1.2 / 100.0));
  CHECK(s1.expected_rate == Approx(5.9).epsilon(1e-6));
  CHECK_FALSE(s1.visibility.has_value());
}

TEST_CASE("static map-IV scans the EPR2 link behind the analyzers") {
  const auto sc = default_scenario();
  const auto t = run_static("IV", sc, 30.0, 3);
  const auto& e = t.row("E-D", kStreams[2]);
  REQUIRE(e.visibility.has_value());
  CHECK(e.scan_rate == Approx(e.rate * std::pow(10.0, -1.2)).epsilon(1e-9));
  CHECK(e.scan_points.size() == 8);
  CHECK(exceeds_classical_limit(*e.visibility));
  const auto j = t.to_json();
  CHECK(j["links"].size() == 3);
}

TEST_CASE("static and dynamic outputs are bit-identical for a fixed seed") {
  auto sc = default_scenario();
  sc.schedule = {{"I", 2.0}, {"IV", 2.0}, {"VI", 2.0}};
  const auto a = scratch("a"), b = scratch("b"), c = scratch("c"), d = scratch("d");
  write_static_outputs(a, run_static("V", sc, 10.0, 8));
  write_static_outputs(b, run_static("V", sc, 10.0, 8));
  CHECK(same_tree(a, b));
  write_dynamic_outputs(c, run_dynamic(sc, 8), sc);
  write_dynamic_outputs(d, run_dynamic(sc, 8), sc);
  CHECK(same_tree(c, d));
  CHECK(fs::exists(c / "trace.csv"));
  CHECK(fs::exists(c / "events.jsonl"));
  CHECK(fs::exists(a / "summary.json"));
  CHECK(render_report(c).find("dynamic range") != std::string::npos);
  const auto other = scratch("e");
  write_static_outputs(other, run_static("V", sc, 10.0, 9));
  CHECK_FALSE(same_tree(a, other));
  for (const auto& p : {a, b, c, d, other}) fs::remove_all(p);
}

TEST_CASE("instructions take effect after wire time plus switch response") {
  auto sc = default_scenario();
  sc.schedule = {{"II", 1.0}, {"III", 1.0}};
  const auto run = run_dynamic(sc, 1);
  REQUIRE(run.trace.segments.size() == 2);
  for (const auto& seg : run.trace.segments) {
    CHECK(seg.arrival_s - seg.start_s == Approx(sc.amc.instruction_duration_s));
    CHECK(seg.outage_end_s - seg.start_s ==
          Approx(sc.amc.instruction_duration_s + sc.plant.node.response_time_s));
    CHECK(seg.steady_bin >= seg.first_bin + 1);
  }
  CHECK(run.frames.size() == 2);
  CHECK(decode_instruction(run.frames[1]).resolve() == builtin_map(MapId::III));
  CHECK(run.trace.n_bins == 40);
}

TEST_CASE("dynamic run rejects an invalid schedule before execution") {
  auto sc = default_scenario();
  sc.maps["half"] = map_from_lines("half", {"EPR1.s2.L -> B"});
  sc.schedule = {{"I", 1.0}, {"half", 1.0}};
  CHECK_THROWS_AS(run_dynamic(sc, 1), InvalidMapError);
}

TEST_CASE("single-map schedule gives a stationary trace") {
  auto sc = default_scenario();
  sc.schedule = {{"IV", 30.0}};
  const auto run = run_dynamic(sc, 12);
  const auto& seg = run.trace.segments[0];
  for (Site site : {Site::A, Site::C, Site::D, Site::E}) {
    const auto s = run.trace.site_singles(site);
    const std::vector<double> steady(s.begin() + static_cast<long>(seg.steady_bin), s.end());
    const double n = static_cast<double>(steady.size());
    const double mean = std::accumulate(steady.begin(), steady.end(), 0.0) / n;
    double chi2 = 0.0;
    for (double x : steady) chi2 += (x - mean) * (x - mean) / mean;
    CAPTURE(to_string(site));
    // Poisson dispersion: chi2 ~ chi2(n - 1); 5 sigma band.
    CHECK(std::abs(chi2 - (n - 1)) <= 5.0 * std::sqrt(2.0 * (n - 1)));
    const std::size_t half = steady.size() / 2;
    const double first = std::accumulate(steady.begin(), steady.begin() + static_cast<long>(half), 0.0);
    const double second = std::accumulate(steady.begin() + static_cast<long>(half), steady.end(), 0.0);
    CHECK(std::abs(first - second) <= 4.0 * std::sqrt(first + second));
  }
  CHECK(detect_gaps(run.trace).empty());
}

TEST_CASE("segment coincidences match an independent static run") {
  const auto sc = default_scenario();
  const auto run = run_dynamic(sc, 21);
  for (const auto& seg : run.trace.segments) {
    const auto table = run_static(seg.map, sc, seg.end_s - seg.start_s, 1000 + seg.first_bin);
    for (const auto& row : table.rows) {
      const auto* tl = run.trace.link(row.link.label());
      REQUIRE(tl != nullptr);
      double dyn = 0.0;
      for (std::size_t i = seg.first_bin; i < seg.end_bin; ++i) dyn += tl->counts[i];
      const double stat = static_cast<double>(row.matched);
      CAPTURE(row.link.label());
      CHECK(std::abs(dyn - stat) <= 3.0 * std::sqrt(dyn + stat));
    }
  }
}

TEST_CASE("trace CSV layout") {
  auto sc = default_scenario();
  sc.schedule = {{"I", 0.2}};
  const auto run = run_dynamic(sc, 3);
  std::stringstream ss;
  write_trace_csv(ss, run.trace);
  std::string header;
  std::getline(ss, header);
  CHECK(header.rfind("bin_start_s,site,singles,", 0) == 0);
  std::size_t rows = 0;
  for (std::string line; std::getline(ss, line);) ++rows;
  CHECK(rows == run.trace.n_bins * 5);
}
