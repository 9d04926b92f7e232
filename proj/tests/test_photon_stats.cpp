#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "eprnet/photon_stats.hpp"

using namespace eprnet;
using doctest::Approx;

namespace {

constexpr SpectralAsset kS1C{Source::EPR1, Stream::S1, Band::C};
constexpr SpectralAsset kS1L{Source::EPR1, Stream::S1, Band::L};

ChannelPath lossy(const SpectralAsset& asset, Site site, double loss_db, double delay_s = 0.0, int passes = 1) {
  return ChannelPath{asset, site, {}, loss_db, delay_s, passes};
}

DetectorModel ideal(double eta, double dark = 0.0) {
  DetectorModel d;
  d.efficiency = eta;
  d.dark_rate = dark;
  d.dead_time_s = 0.0;
  d.jitter_sigma_s = 0.0;
  return d;
}

ArmSpec spec(double brightness, double loss_a, double loss_b, DetectorModel da, DetectorModel db) {
  return {StreamModel{kStreams[0], brightness, 0.0}, lossy(kS1C, Site::A, loss_a, 80e-6),
          lossy(kS1L, Site::C, loss_b, 83e-6), da, db};
}

}  // namespace

TEST_CASE("expected singles examples") {
  const StreamModel on{kStreams[0], 1e6, 0.0};
  CHECK(expected_singles(on, lossy(kS1C, Site::A, 0.0), ideal(0.01)) == Approx(1e4));
  const StreamModel off{kStreams[0], 0.0, 0.0};
  CHECK(expected_singles(off, lossy(kS1C, Site::A, 3.0), ideal(0.01, 100.0)) == Approx(100.0));
  const StreamModel cal{kStreams[0], 1.12e6, 0.0};
  CHECK(expected_singles(cal, lossy(kS1C, Site::A, 6.4), ideal(0.01)) == Approx(2.57e3).epsilon(0.005));
}

TEST_CASE("gated detectors thin by their duty") {
  DetectorModel g = ideal(0.1);
  g.mode = DetectorMode::Gated;
  g.gate_duty = 0.1;
  CHECK(g.effective_efficiency() == Approx(0.01));
  g.gate_duty = 0.0;
  CHECK_THROWS_AS(g.check(), std::invalid_argument);
  CHECK(parse_detector_mode("gated") == DetectorMode::Gated);
}

TEST_CASE("expected coincidences examples") {
  const StreamModel s{kStreams[0], 1e6, 0.0};
  const auto r = expected_coincidences(s, lossy(kS1C, Site::A, 0.0), lossy(kS1L, Site::B, 0.0), ideal(0.01),
                                       ideal(0.01), 1e-9);
  CHECK(r.true_rate == Approx(100.0));
  const auto acc = expected_coincidences(s, lossy(kS1C, Site::A, 0.0), lossy(kS1L, Site::B, 0.0), ideal(0.01),
                                         ideal(0.01), 1e-9, 1e4, 1e4);
  CHECK(acc.accidental_rate == Approx(0.1));
}

TEST_CASE("expected coincidences reject arms of another stream or the same photon") {
  const StreamModel s{kStreams[0], 1e6, 0.0};
  const SpectralAsset s2c{Source::EPR1, Stream::S2, Band::C};
  CHECK_THROWS_AS(expected_coincidences(s, lossy(kS1C, Site::A, 0), lossy(s2c, Site::B, 0), ideal(0.01), ideal(0.01),
                                        1e-9),
                  std::invalid_argument);
  CHECK_THROWS_AS(expected_coincidences(s, lossy(kS1C, Site::A, 0), lossy(kS1C, Site::B, 0), ideal(0.01),
                                        ideal(0.01), 1e-9),
                  std::invalid_argument);
}

TEST_CASE("fold-back excess applies only on multi-pass paths and is split per arm") {
  const StreamModel s{kStreams[1], 1e6, 6.0};
  CHECK(arm_transmittance(s, lossy(kS1C, Site::A, 3.0, 0, 1)) == Approx(db_to_transmittance(3.0)));
  CHECK(arm_transmittance(s, lossy(kS1C, Site::A, 3.0, 0, 2)) == Approx(db_to_transmittance(6.0)));
  const StreamModel gain{kStreams[1], 1e6, -2.0};
  CHECK(arm_transmittance(gain, lossy(kS1C, Site::A, 4.0, 0, 2)) == Approx(db_to_transmittance(3.0)));
  CHECK(arm_transmittance(gain, lossy(kS1C, Site::A, 0.0, 0, 2)) == 1.0);
}

TEST_CASE("thinning composition") {
  const StreamModel s{kStreams[0], 1.3e6, 0.0};
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 15.0);
  for (int i = 0; i < 200; ++i) {
    const double l1 = u(rng), l2 = u(rng);
    ChannelPath two{kS1C, Site::A, {}, 0.0, 0.0, 0};
    two.append({PathSegment::Kind::Fiber, "a", l1, 0.0});
    two.append({PathSegment::Kind::Fiber, "b", l2, 0.0});
    const double split = expected_singles(s, two, ideal(0.01));
    const double whole = expected_singles(s, lossy(kS1C, Site::A, l1 + l2), ideal(0.01));
    REQUIRE(std::abs(split - whole) <= 1e-9 * whole);
  }
}

TEST_CASE("lossless singles count matches the Poisson expectation") {
  const auto sp = spec(1e6, 0.0, 0.0, ideal(0.01), ideal(0.01));
  const auto [a, b] = generate_pair_timetags(sp, 100.0, 42);
  CHECK(std::abs(static_cast<double>(a.timestamps.size()) - 1e6) < 3.0 * 1e3);
  CHECK(std::abs(static_cast<double>(b.timestamps.size()) - 1e6) < 3.0 * 1e3);
}

TEST_CASE("zero efficiency leaves only dark counts") {
  const auto sp = spec(1e6, 0.0, 0.0, ideal(0.0, 100.0), ideal(0.0, 0.0));
  const auto [a, b] = generate_pair_timetags(sp, 100.0, 5);
  CHECK(std::abs(static_cast<double>(a.timestamps.size()) - 1e4) < 3.0 * 100.0);
  CHECK(b.timestamps.empty());
}

TEST_CASE("generation is deterministic per seed") {
  DetectorModel d = ideal(0.02, 200.0);
  d.jitter_sigma_s = 100e-12;
  d.dead_time_s = 1e-6;
  const auto sp = spec(5e5, 3.0, 4.0, d, d);
  const auto x = generate_pair_timetags(sp, 5.0, 9);
  const auto y = generate_pair_timetags(sp, 5.0, 9);
  const auto z = generate_pair_timetags(sp, 5.0, 10);
  CHECK(x.first.timestamps == y.first.timestamps);
  CHECK(x.second.timestamps == y.second.timestamps);
  CHECK(x.first.timestamps != z.first.timestamps);
  CHECK_THROWS_AS(generate_pair_timetags(sp, 0.0, 1), std::invalid_argument);
}

TEST_CASE("dead time only removes tags") {
  std::mt19937_64 rng(3);
  std::exponential_distribution<double> gap(2e5);
  std::vector<double> tags;
  double t = 0.0;
  for (int i = 0; i < 20000; ++i) tags.push_back(t += gap(rng));
  const auto out = apply_dead_time(tags, 1e-6);
  CHECK(out.size() < tags.size());
  CHECK(std::includes(tags.begin(), tags.end(), out.begin(), out.end()));
  for (std::size_t i = 1; i < out.size(); ++i) REQUIRE(out[i] - out[i - 1] >= 1e-6);
  CHECK(apply_dead_time(tags, 0.0) == tags);
}

TEST_CASE("generated tags are strictly increasing") {
  DetectorModel d = ideal(0.05, 1000.0);
  d.dead_time_s = 1e-6;
  d.jitter_sigma_s = 100e-12;
  const auto [a, b] = generate_pair_timetags(spec(1e6, 1.0, 1.0, d, d), 2.0, 8);
  for (const auto* s : {&a, &b})
    for (std::size_t i = 1; i < s->timestamps.size(); ++i) REQUIRE(s->timestamps[i] > s->timestamps[i - 1]);
}

TEST_CASE("self coincidence matches every tag at zero delay") {
  std::mt19937_64 rng(4);
  std::exponential_distribution<double> gap(1e3);
  TimetagStream a;
  a.end_s = 10.0;
  for (double t = gap(rng); t < 10.0; t += gap(rng)) a.timestamps.push_back(t);
  for (double w : {1e-10, 1e-9, 5e-9}) {
    CountOptions o;
    o.window_s = w;
    const auto r = count_coincidences(a, a, o);
    CHECK(r.matched == a.timestamps.size());
    CHECK(r.peak_delay_s == 0.0);
  }
  CountOptions bad;
  bad.window_s = 0.0;
  CHECK_THROWS_AS(count_coincidences(a, a, bad), std::invalid_argument);
}

TEST_CASE("histogram total equals pairs in the scan") {
  DetectorModel d = ideal(0.01, 100.0);
  d.jitter_sigma_s = 100e-12;
  const auto sp = spec(1e6, 2.0, 2.0, d, d);
  const auto [a, b] = generate_pair_timetags(sp, 10.0, 12);
  CountOptions o;
  o.center_s = 3e-6;
  const auto r = count_coincidences(a, b, o);
  std::uint64_t total = 0;
  for (auto h : r.histogram) total += h;
  CHECK(total == r.pairs_in_scan);
  CHECK(r.matched <= r.pairs_in_scan);
  CHECK(r.true_rate >= 0.0);
  CHECK(r.accidental_rate >= 0.0);
  CHECK(r.peak_delay_s == Approx(3e-6).epsilon(1e-4));
}

TEST_CASE("coincidence counting is symmetric in its two streams") {
  DetectorModel d = ideal(0.01, 300.0);
  d.jitter_sigma_s = 100e-12;
  const auto [a, b] = generate_pair_timetags(spec(1e6, 1.0, 3.0, d, d), 20.0, 21);
  CountOptions ab, ba;
  ab.center_s = 3e-6;
  ba.center_s = -3e-6;
  const auto x = count_coincidences(a, b, ab);
  const auto y = count_coincidences(b, a, ba);
  CHECK(x.matched == y.matched);
  CHECK(x.peak_delay_s == Approx(-y.peak_delay_s));
  CHECK(x.pairs_in_scan == y.pairs_in_scan);
}

TEST_CASE("independent streams give the accidental rate S_a S_b tau") {
  std::vector<DetectionChannel> ch{{"A.C", Site::A, Band::C, ideal(0.0, 1e3)},
                                   {"B.C", Site::B, Band::C, ideal(0.0, 1e3)}};
  Epoch ep{0.0, 1000.0, {}, {}};
  const auto tags = generate_timetags(ch, std::span<const Epoch>(&ep, 1), 77);
  const auto r = count_coincidences(tags[0], tags[1], CountOptions{});
  // Oracle: 1e3 * 1e3 * 1e-9 * 1000 = 1 count; Poisson 3 sigma upper bound is 4.
  CHECK(r.matched <= 4);
  CHECK(r.accidental_rate * 1000.0 == Approx(1.0).epsilon(0.3));
}

TEST_CASE("Monte-Carlo coincidences agree with the analytic rate") {
  std::mt19937_64 cfg(2024);
  std::uniform_real_distribution<double> bright(2e5, 1e6), loss(0.0, 8.0), eta(0.005, 0.03), dark(0.0, 500.0);
  int within = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    DetectorModel da = ideal(eta(cfg), dark(cfg)), db = ideal(eta(cfg), dark(cfg));
    da.jitter_sigma_s = db.jitter_sigma_s = 100e-12;
    const auto sp = spec(bright(cfg), loss(cfg), loss(cfg), da, db);
    const double duration = 100.0;
    const auto expected =
        expected_coincidences(sp.stream, sp.path_a, sp.path_b, sp.det_a, sp.det_b, 1e-9);
    const auto [a, b] = generate_pair_timetags(sp, duration, seed);
    CountOptions o;
    o.center_s = sp.path_b.delay_s - sp.path_a.delay_s;
    const auto r = count_coincidences(a, b, o);
    const double sigma = std::sqrt((expected.true_rate + expected.accidental_rate) * duration);
    within += std::abs(r.true_rate - expected.true_rate) * duration <= 3.0 * sigma;
  }
  CHECK(within >= 95);
}

TEST_CASE("dead time thins coincidences by the non-paralyzable survival of each arm") {
  DetectorModel d = ideal(0.05, 0.0);
  d.jitter_sigma_s = 100e-12;
  d.dead_time_s = 1e-6;
  const auto sp = spec(1e6, 0.0, 0.0, d, d);
  const auto expected = expected_coincidences(sp.stream, sp.path_a, sp.path_b, d, d, 1e-9);
  const auto [a, b] = generate_pair_timetags(sp, 50.0, 31);
  CountOptions o;
  o.center_s = 3e-6;
  const auto r = count_coincidences(a, b, o);
  // Oracle: incident rate R = 5e4/s per arm, survival 1/(1 + R tau) on each arm.
  const double survive = 1.0 / (1.0 + 5e4 * 1e-6);
  const double oracle = expected.true_rate * survive * survive;
  CHECK(std::abs(r.true_rate - oracle) * 50.0 <= 3.0 * std::sqrt(oracle * 50.0));
  CHECK(static_cast<double>(a.timestamps.size()) / 50.0 == Approx(5e4 * survive).epsilon(0.01));
}

TEST_CASE("efficiency scaling") {
  const auto sp = spec(1e5, 0.0, 0.0, ideal(0.01), ideal(0.01));
  CHECK(efficiency_scaling_check(sp, 2.0) == Approx(4.0));
  CHECK(efficiency_scaling_check(sp, 1.0) == Approx(1.0));
  CHECK_THROWS_AS(efficiency_scaling_check(sp, 0.0), std::invalid_argument);
  DetectorModel d = ideal(0.01, 100.0);
  d.jitter_sigma_s = 100e-12;
  d.dead_time_s = 1e-6;
  const auto mc = efficiency_scaling_monte_carlo(spec(1e5, 0.0, 0.0, d, d), 3.0, 100.0, 6);
  CHECK(std::abs(mc.ratio - 9.0) <= 3.0 * mc.sigma);
}
