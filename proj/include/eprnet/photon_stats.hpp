#pragma once

// Pair-source rates, SPAD detection, Monte-Carlo timetags and coincidence counting.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eprnet/core_model.hpp"
#include "eprnet/optical_plant.hpp"

namespace eprnet {

/// One pair stream. `foldback_excess_db` is the loss this stream sees on
/// fold-back paths relative to the node's nominal fold-back loss (spectral
/// slicing and re-assembly); it is signed and split evenly between the two photons.
struct StreamModel {
  StreamKey key;
  double brightness_pps = 0.0;
  double foldback_excess_db = 0.0;

  void check() const;
};

struct PairStreamModel {
  std::array<StreamModel, 3> streams{StreamModel{kStreams[0]}, StreamModel{kStreams[1]},
                                     StreamModel{kStreams[2]}};

  const StreamModel& at(StreamKey k) const { return streams[stream_index(k)]; }
  StreamModel& at(StreamKey k) { return streams[stream_index(k)]; }
};

enum class DetectorMode : std::uint8_t { FreeRunning, Gated };
std::string_view to_string(DetectorMode m);
DetectorMode parse_detector_mode(std::string_view text);

struct DetectorModel {
  DetectorMode mode = DetectorMode::FreeRunning;
  double efficiency = 0.01;
  double dark_rate = 100.0;  // counts/s, already averaged over gates
  double dead_time_s = 1e-6;
  double gate_duty = 1.0;
  double jitter_sigma_s = 100e-12;

  double effective_efficiency() const { return efficiency * (mode == DetectorMode::Gated ? gate_duty : 1.0); }
  void check() const;
};

/// Survival probability of one photon of `stream` along `path`, before detection.
double arm_transmittance(const StreamModel& stream, const ChannelPath& path);

double expected_singles(const StreamModel& stream, const ChannelPath& path, const DetectorModel& det);

struct CoincidenceResult {
  double true_rate = 0.0;        // cc/s, accidental-subtracted
  double accidental_rate = 0.0;  // cc/s inside the window
  double window_s = 0.0;
  double duration_s = 0.0;
  std::uint64_t matched = 0;        // pairs within the window at the peak
  std::uint64_t pairs_in_scan = 0;  // == sum of histogram
  double peak_delay_s = 0.0;
  double bin_width_s = 0.0;
  std::vector<std::uint64_t> histogram;  // bins centered on center + k*bin_width

  double raw_rate() const { return duration_s > 0 ? static_cast<double>(matched) / duration_s : 0.0; }
  double car() const { return accidental_rate > 0 ? true_rate / accidental_rate : 0.0; }
};

/// Analytic rates for the two arms of one stream. Throws when the paths do not
/// carry two different photons of the same stream.
CoincidenceResult expected_coincidences(const StreamModel& stream, const ChannelPath& path_a,
                                        const ChannelPath& path_b, const DetectorModel& det_a,
                                        const DetectorModel& det_b, double window_s);

/// Same, with externally known singles rates for the accidental term.
CoincidenceResult expected_coincidences(const StreamModel& stream, const ChannelPath& path_a,
                                        const ChannelPath& path_b, const DetectorModel& det_a,
                                        const DetectorModel& det_b, double window_s, double singles_a,
                                        double singles_b);

struct TimetagStream {
  std::string detector;
  Site site = Site::A;
  double start_s = 0.0;
  double end_s = 0.0;
  std::vector<double> timestamps;
  std::vector<std::string> labels;  // empty, or one per timestamp

  double duration() const { return end_s - start_s; }
};

// ---- Monte-Carlo generation ------------------------------------------------

struct DetectionChannel {
  std::string id;  // "A.C"
  Site site;
  Band band;
  DetectorModel detector;
};

struct ArmRef {
  std::size_t channel;
  double transmittance;  // optical survival before detector efficiency
  double delay_s;
};

struct PairEmitter {
  StreamModel stream;
  std::optional<ArmRef> arm_a;
  std::optional<ArmRef> arm_b;
};

/// Interval with fixed routing. `background` holds extra Poisson counts/s per channel.
struct Epoch {
  double start_s = 0.0;
  double end_s = 0.0;
  std::vector<PairEmitter> emitters;
  std::vector<double> background;
};

/// Poisson pair emission per stream with independent photon thinning
/// (T x eta x duty), dark counts, Gaussian jitter and non-paralyzable dead time.
/// Deterministic for a fixed seed.
std::vector<TimetagStream> generate_timetags(std::span<const DetectionChannel> channels,
                                             std::span<const Epoch> epochs, std::uint64_t seed);

/// Single-epoch convenience: one emitter per (stream, path_a, path_b).
struct ArmSpec {
  StreamModel stream;
  ChannelPath path_a;
  ChannelPath path_b;
  DetectorModel det_a;
  DetectorModel det_b;
};
std::pair<TimetagStream, TimetagStream> generate_pair_timetags(const ArmSpec& spec, double duration_s,
                                                               std::uint64_t seed);

/// Non-paralyzable dead-time filter over sorted timestamps.
std::vector<double> apply_dead_time(std::span<const double> sorted, double dead_time_s);

// ---- Counting ----------------------------------------------------------------

struct CountOptions {
  double window_s = 1e-9;      // full width
  double scan_range_s = 100e-9;
  double bin_width_s = 100e-12;
  double center_s = 0.0;       // expected delay t_b - t_a
};

/// Builds the delay histogram over center +- scan_range, locates the peak and
/// counts pairs within +- window/2 of it. Accidentals come from the off-peak floor.
CoincidenceResult count_coincidences(const TimetagStream& a, const TimetagStream& b, const CountOptions& opts);

/// Times (taken from `a`) of pairs with |t_b - t_a - delay| <= window/2.
std::vector<double> match_pairs(std::span<const double> a, std::span<const double> b, double delay_s,
                                double window_s);

// ---- Efficiency scaling --------------------------------------------------------

double efficiency_scaling_check(const ArmSpec& spec, double factor);

struct ScalingEstimate {
  double ratio = 0.0;
  double sigma = 0.0;
};
ScalingEstimate efficiency_scaling_monte_carlo(const ArmSpec& spec, double factor, double duration_s,
                                               std::uint64_t seed, double window_s = 1e-9);

}  // namespace eprnet
