#include "eprnet/photon_stats.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace eprnet {
namespace {

std::mt19937_64 substream(std::uint64_t seed, std::initializer_list<std::uint32_t> path) {
  std::vector<std::uint32_t> words{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  words.insert(words.end(), path.begin(), path.end());
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

std::uint64_t poisson(std::mt19937_64& rng, double mean) {
  if (!(mean > 0.0)) return 0;
  return std::poisson_distribution<std::uint64_t>(mean)(rng);
}

void check_same_stream(const StreamModel& stream, const ChannelPath& a, const ChannelPath& b) {
  if (a.asset.key() != stream.key || b.asset.key() != stream.key)
    throw std::invalid_argument("paths do not belong to stream " + to_string(stream.key));
  if (a.asset == b.asset) throw std::invalid_argument("both arms carry the same photon " + to_string(a.asset));
}

}  // namespace

void StreamModel::check() const {
  if (!(brightness_pps >= 0.0)) throw std::invalid_argument("brightness must be >= 0 for " + to_string(key));
  if (!std::isfinite(foldback_excess_db))
    throw std::invalid_argument("fold-back excess loss must be finite for " + to_string(key));
}

std::string_view to_string(DetectorMode m) { return m == DetectorMode::Gated ? "gated" : "free-running"; }

DetectorMode parse_detector_mode(std::string_view text) {
  if (text == "gated") return DetectorMode::Gated;
  if (text == "free-running") return DetectorMode::FreeRunning;
  throw std::invalid_argument("unknown detector mode '" + std::string(text) + "'");
}

void DetectorModel::check() const {
  if (!(efficiency >= 0.0 && efficiency <= 1.0)) throw std::invalid_argument("detector efficiency must be in [0,1]");
  if (!(dark_rate >= 0.0)) throw std::invalid_argument("dark rate must be >= 0");
  if (!(dead_time_s >= 0.0)) throw std::invalid_argument("dead time must be >= 0");
  if (!(jitter_sigma_s >= 0.0)) throw std::invalid_argument("jitter must be >= 0");
  if (mode == DetectorMode::Gated && !(gate_duty > 0.0 && gate_duty <= 1.0))
    throw std::invalid_argument("gate duty must be in (0,1]");
}

double arm_transmittance(const StreamModel& stream, const ChannelPath& path) {
  double t = path.transmittance();
  if (path.node_traversals >= 2) t *= std::pow(10.0, -stream.foldback_excess_db / 20.0);
  return std::min(1.0, t);
}

double expected_singles(const StreamModel& stream, const ChannelPath& path, const DetectorModel& det) {
  return stream.brightness_pps * arm_transmittance(stream, path) * det.effective_efficiency() + det.dark_rate;
}

CoincidenceResult expected_coincidences(const StreamModel& stream, const ChannelPath& path_a,
                                        const ChannelPath& path_b, const DetectorModel& det_a,
                                        const DetectorModel& det_b, double window_s) {
  return expected_coincidences(stream, path_a, path_b, det_a, det_b, window_s,
                               expected_singles(stream, path_a, det_a), expected_singles(stream, path_b, det_b));
}

CoincidenceResult expected_coincidences(const StreamModel& stream, const ChannelPath& path_a,
                                        const ChannelPath& path_b, const DetectorModel& det_a,
                                        const DetectorModel& det_b, double window_s, double singles_a,
                                        double singles_b) {
  check_same_stream(stream, path_a, path_b);
  CoincidenceResult r;
  r.window_s = window_s;
  r.true_rate = stream.brightness_pps * arm_transmittance(stream, path_a) * arm_transmittance(stream, path_b) *
                det_a.effective_efficiency() * det_b.effective_efficiency();
  r.accidental_rate = singles_a * singles_b * window_s;
  r.peak_delay_s = path_b.delay_s - path_a.delay_s;
  return r;
}

std::vector<double> apply_dead_time(std::span<const double> sorted, double dead_time_s) {
  std::vector<double> out;
  out.reserve(sorted.size());
  for (double t : sorted) {
    if (!out.empty() && (t <= out.back() || t - out.back() < dead_time_s)) continue;
    out.push_back(t);
  }
  return out;
}

std::vector<TimetagStream> generate_timetags(std::span<const DetectionChannel> channels,
                                             std::span<const Epoch> epochs, std::uint64_t seed) {
  std::vector<std::vector<double>> raw(channels.size());
  double t_begin = epochs.empty() ? 0.0 : epochs.front().start_s;
  double t_end = t_begin;

  auto jitter = [&](std::mt19937_64& rng, std::size_t ch) {
    double sigma = channels[ch].detector.jitter_sigma_s;
    return sigma > 0.0 ? std::normal_distribution<double>(0.0, sigma)(rng) : 0.0;
  };
  auto survival = [&](const std::optional<ArmRef>& arm) {
    return arm ? arm->transmittance * channels[arm->channel].detector.effective_efficiency() : 0.0;
  };

  for (std::uint32_t e = 0; e < epochs.size(); ++e) {
    const auto& ep = epochs[e];
    if (ep.end_s < ep.start_s) throw std::invalid_argument("epoch ends before it starts");
    t_begin = std::min(t_begin, ep.start_s);
    t_end = std::max(t_end, ep.end_s);
    const double dur = ep.end_s - ep.start_s;
    std::uniform_real_distribution<double> when(ep.start_s, ep.end_s);

    for (std::uint32_t k = 0; k < ep.emitters.size(); ++k) {
      const auto& em = ep.emitters[k];
      em.stream.check();
      const double pa = survival(em.arm_a), pb = survival(em.arm_b);
      const double b = em.stream.brightness_pps;
      // Poisson splitting of the thinned pair process into three independent processes.
      const double rates[3] = {b * pa * pb, b * pa * (1.0 - pb), b * pb * (1.0 - pa)};
      for (std::uint32_t kind = 0; kind < 3; ++kind) {
        auto rng = substream(seed, {1u, e, k, kind});
        const auto n = poisson(rng, rates[kind] * dur);
        for (std::uint64_t i = 0; i < n; ++i) {
          const double t = when(rng);
          if (kind != 2) raw[em.arm_a->channel].push_back(t + em.arm_a->delay_s + jitter(rng, em.arm_a->channel));
          if (kind != 1) raw[em.arm_b->channel].push_back(t + em.arm_b->delay_s + jitter(rng, em.arm_b->channel));
        }
      }
    }

    for (std::uint32_t c = 0; c < channels.size(); ++c) {
      double extra = c < ep.background.size() ? ep.background[c] : 0.0;
      if (extra < 0.0) throw std::invalid_argument("background rate must be >= 0");
      auto rng = substream(seed, {2u, e, c});
      const auto n = poisson(rng, (channels[c].detector.dark_rate + extra) * dur);
      for (std::uint64_t i = 0; i < n; ++i) raw[c].push_back(when(rng));
    }
  }

  std::vector<TimetagStream> out;
  out.reserve(channels.size());
  for (std::size_t c = 0; c < channels.size(); ++c) {
    channels[c].detector.check();
    auto& tags = raw[c];
    std::erase_if(tags, [&](double t) { return t < t_begin || t >= t_end; });
    std::sort(tags.begin(), tags.end());
    TimetagStream s;
    s.detector = channels[c].id;
    s.site = channels[c].site;
    s.start_s = t_begin;
    s.end_s = t_end;
    s.timestamps = apply_dead_time(tags, channels[c].detector.dead_time_s);
    out.push_back(std::move(s));
  }
  return out;
}

std::pair<TimetagStream, TimetagStream> generate_pair_timetags(const ArmSpec& spec, double duration_s,
                                                               std::uint64_t seed) {
  if (!(duration_s > 0.0)) throw std::invalid_argument("duration must be positive");
  check_same_stream(spec.stream, spec.path_a, spec.path_b);
  std::vector<DetectionChannel> channels{
      {std::string(to_string(spec.path_a.destination)) + "." + std::string(to_string(spec.path_a.asset.band)),
       spec.path_a.destination, spec.path_a.asset.band, spec.det_a},
      {std::string(to_string(spec.path_b.destination)) + "." + std::string(to_string(spec.path_b.asset.band)),
       spec.path_b.destination, spec.path_b.asset.band, spec.det_b}};
  Epoch ep;
  ep.start_s = 0.0;
  ep.end_s = duration_s;
  ep.emitters.push_back({spec.stream, ArmRef{0, arm_transmittance(spec.stream, spec.path_a), spec.path_a.delay_s},
                         ArmRef{1, arm_transmittance(spec.stream, spec.path_b), spec.path_b.delay_s}});
  auto tags = generate_timetags(channels, std::span<const Epoch>(&ep, 1), seed);
  return {std::move(tags[0]), std::move(tags[1])};
}

std::vector<double> match_pairs(std::span<const double> a, std::span<const double> b, double delay_s,
                                double window_s) {
  std::vector<double> out;
  const double half = window_s / 2.0;
  std::size_t j0 = 0;
  for (double ta : a) {
    const double lo = ta + delay_s - half, hi = ta + delay_s + half;
    while (j0 < b.size() && b[j0] < lo) ++j0;
    for (std::size_t j = j0; j < b.size() && b[j] <= hi; ++j) out.push_back(ta);
  }
  return out;
}

CoincidenceResult count_coincidences(const TimetagStream& a, const TimetagStream& b, const CountOptions& opts) {
  if (!(opts.window_s > 0.0)) throw std::invalid_argument("coincidence window must be positive");
  if (!(opts.scan_range_s > 0.0) || !(opts.bin_width_s > 0.0))
    throw std::invalid_argument("scan range and bin width must be positive");

  CoincidenceResult r;
  r.window_s = opts.window_s;
  r.bin_width_s = opts.bin_width_s;
  r.duration_s = std::max(0.0, std::min(a.end_s, b.end_s) - std::max(a.start_s, b.start_s));
  if (r.duration_s == 0.0) r.duration_s = std::max(a.duration(), b.duration());

  const long half = std::lround(opts.scan_range_s / opts.bin_width_s);
  const std::size_t nbins = static_cast<std::size_t>(2 * half + 1);
  r.histogram.assign(nbins, 0);
  r.peak_delay_s = opts.center_s;
  if (a.timestamps.empty() || b.timestamps.empty()) return r;

  const double reach = (static_cast<double>(half) + 0.5) * opts.bin_width_s;
  std::size_t j0 = 0;
  const auto& tb = b.timestamps;
  for (double ta : a.timestamps) {
    const double lo = ta + opts.center_s - reach, hi = ta + opts.center_s + reach;
    while (j0 < tb.size() && tb[j0] < lo) ++j0;
    for (std::size_t j = j0; j < tb.size() && tb[j] <= hi; ++j) {
      const long k = std::lround((tb[j] - ta - opts.center_s) / opts.bin_width_s) + half;
      if (k >= 0 && k < static_cast<long>(nbins)) {
        ++r.histogram[static_cast<std::size_t>(k)];
        ++r.pairs_in_scan;
      }
    }
  }

  long peak = half;
  for (long k = 0; k < static_cast<long>(nbins); ++k) {
    const auto hk = r.histogram[static_cast<std::size_t>(k)], hp = r.histogram[static_cast<std::size_t>(peak)];
    if (hk > hp || (hk == hp && std::labs(k - half) < std::labs(peak - half))) peak = k;
  }
  r.peak_delay_s = opts.center_s + static_cast<double>(peak - half) * opts.bin_width_s;
  r.matched = match_pairs(a.timestamps, b.timestamps, r.peak_delay_s, opts.window_s).size();

  // Off-peak floor: skip bins within max(window, 2 ns) of the peak.
  const double exclusion = std::max(opts.window_s, 2e-9);
  std::uint64_t floor_sum = 0, floor_bins = 0;
  for (long k = 0; k < static_cast<long>(nbins); ++k) {
    if (std::abs(static_cast<double>(k - peak)) * opts.bin_width_s <= exclusion) continue;
    floor_sum += r.histogram[static_cast<std::size_t>(k)];
    ++floor_bins;
  }
  const double floor_per_bin = floor_bins ? static_cast<double>(floor_sum) / static_cast<double>(floor_bins) : 0.0;
  const double accidental_counts = floor_per_bin * opts.window_s / opts.bin_width_s;
  r.accidental_rate = accidental_counts / r.duration_s;
  r.true_rate = std::max(0.0, static_cast<double>(r.matched) - accidental_counts) / r.duration_s;
  return r;
}

double efficiency_scaling_check(const ArmSpec& spec, double factor) {
  if (!(factor > 0.0)) throw std::invalid_argument("scaling factor must be positive");
  auto scaled = spec;
  scaled.det_a.efficiency *= factor;
  scaled.det_b.efficiency *= factor;
  const double base =
      expected_coincidences(spec.stream, spec.path_a, spec.path_b, spec.det_a, spec.det_b, 1e-9).true_rate;
  const double up =
      expected_coincidences(scaled.stream, scaled.path_a, scaled.path_b, scaled.det_a, scaled.det_b, 1e-9).true_rate;
  if (base <= 0.0) throw std::invalid_argument("base coincidence rate is zero");
  return up / base;
}

ScalingEstimate efficiency_scaling_monte_carlo(const ArmSpec& spec, double factor, double duration_s,
                                               std::uint64_t seed, double window_s) {
  if (!(factor > 0.0)) throw std::invalid_argument("scaling factor must be positive");
  auto scaled = spec;
  scaled.det_a.efficiency *= factor;
  scaled.det_b.efficiency *= factor;
  CountOptions opts;
  opts.window_s = window_s;
  opts.center_s = spec.path_b.delay_s - spec.path_a.delay_s;
  auto [a0, b0] = generate_pair_timetags(spec, duration_s, seed);
  auto [a1, b1] = generate_pair_timetags(scaled, duration_s, seed + 0x9e3779b97f4a7c15ULL);
  const auto base = count_coincidences(a0, b0, opts);
  const auto up = count_coincidences(a1, b1, opts);
  const double n0 = base.true_rate * duration_s, n1 = up.true_rate * duration_s;
  if (n0 <= 0.0) throw std::invalid_argument("no coincidences in the base run");
  ScalingEstimate est;
  est.ratio = n1 / n0;
  est.sigma = est.ratio * std::sqrt(1.0 / std::max(n1, 1.0) + 1.0 / n0);
  return est;
}

}  // namespace eprnet
