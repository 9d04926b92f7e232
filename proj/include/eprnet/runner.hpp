#pragma once

// Static and dynamic experiment runs, rate traces, dynamic range, gap detection
// and run-directory output.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eprnet/control_plane.hpp"
#include "eprnet/entanglement.hpp"
#include "eprnet/photon_stats.hpp"
#include "eprnet/scenario.hpp"

namespace eprnet {

/// Detector channels of a scenario: O, C and L at every edge site, NIR900 at E.
struct DetectionPlan {
  std::vector<DetectionChannel> channels;

  std::size_t index(Site site, Band band) const;  // throws when absent
};

DetectionPlan detection_plan(const Scenario& scenario);

/// Pair emitters for one routing state; `map` null means nothing is routed.
/// EPR2 always emits, its NIR photon always reaches E.
std::vector<PairEmitter> emitters_for(const Scenario& scenario, const DetectionPlan& plan, const DistributionMap* map);

/// Raman background per channel while AMC light is on the feeder.
std::vector<double> raman_background(const Scenario& scenario, const DetectionPlan& plan, const DistributionMap* map);

struct LinkRow {
  EntangledLink link;
  double rate = 0.0;        // cc/s, accidental-subtracted
  double rate_sigma = 0.0;  // Poisson
  double expected_rate = 0.0;
  double accidental_rate = 0.0;
  double car = 0.0;
  std::uint64_t matched = 0;
  double peak_delay_s = 0.0;
  std::optional<VisibilityEstimate> visibility;
  double scan_rate = 0.0;  // cc/s seen behind the analyzers
  std::vector<ScanPoint> scan_points;
};

struct SummaryTable {
  std::string map;
  double duration_s = 0.0;
  std::uint64_t seed = 0;
  AmcMode amc_mode = AmcMode::Gated;
  std::vector<LinkRow> rows;
  std::vector<std::pair<std::string, double>> channel_singles;  // counts/s per channel

  const LinkRow& row(const std::string& sites, StreamKey stream) const;
  nlohmann::json to_json() const;
};

/// Compiles paths, generates timetags, counts coincidences and scans EPR2 links.
/// The node holds `map_id` for the whole run; one instruction is sent at t = 0.
SummaryTable run_static(const std::string& map_id, const Scenario& scenario, double duration_s, std::uint64_t seed);

struct TraceChannel {
  std::string id;
  Site site;
  Band band;
  double dark_per_bin = 0.0;
  std::vector<std::uint32_t> counts;
  std::vector<bool> expected_active;
};

struct TraceLink {
  std::string label;  // "A-D:EPR1.s1"
  Site site_a;
  Site site_b;
  std::vector<std::uint32_t> counts;
};

struct SegmentLink {
  std::string label;
  std::size_t channel_a = 0;
  std::size_t channel_b = 0;
  double delay_s = 0.0;  // expected t_b - t_a
};

struct SegmentInfo {
  std::string map;
  double start_s = 0.0;
  double end_s = 0.0;
  double arrival_s = 0.0;     // instruction delivered to the node
  double outage_end_s = 0.0;  // switch settled
  std::size_t first_bin = 0;
  std::size_t end_bin = 0;  // exclusive
  std::size_t steady_bin = 0;  // first bin after the reconfiguration and guard bins
  std::vector<SegmentLink> links;
};

struct RateTrace {
  double bin_width_s = 0.0;
  std::size_t n_bins = 0;
  std::vector<TraceChannel> channels;
  std::vector<TraceLink> links;
  std::vector<SegmentInfo> segments;

  double bin_start(std::size_t i) const { return static_cast<double>(i) * bin_width_s; }
  std::vector<double> site_singles(Site site) const;
  const TraceLink* link(const std::string& label) const;
};

struct DynamicRun {
  RateTrace trace;
  std::vector<InstructionLogEntry> instructions;
  std::vector<std::vector<std::uint8_t>> frames;
  std::vector<ReconfigurationEvent> reconfigurations;
  std::uint64_t seed = 0;
  AmcMode amc_mode = AmcMode::Gated;
};

/// Sends every schedule entry as an AMC frame, applies it after the wire time
/// plus the switch response and bins all channels at the acquisition bin.
DynamicRun run_dynamic(const Scenario& scenario, std::uint64_t seed);

struct DynamicRange {
  double db = 0.0;
  bool unbounded = false;
  std::vector<double> segment_means;
};

/// 10 log10(max/min) over segment means.
DynamicRange dynamic_range(std::span<const double> segment_means);

/// Steady-state segment means of singles summed over `sites`.
DynamicRange dynamic_range(const RateTrace& trace, std::span<const Site> sites);

/// Same over the coincidence counts of every link touching an edge site.
DynamicRange coincidence_dynamic_range(const RateTrace& trace);

/// Steady-state mean counts per bin of each segment for one series.
std::vector<double> segment_means(const RateTrace& trace, std::span<const std::uint32_t> series);
std::vector<double> segment_means(const RateTrace& trace, std::span<const double> series);

struct Gap {
  std::string channel;
  std::size_t first_bin = 0;
  std::size_t bins = 0;
  double start_s = 0.0;
  double end_s = 0.0;
};

/// Maximal runs of bins with counts <= floor on channels expected active.
std::vector<Gap> detect_gaps(const RateTrace& trace, double floor);

/// Per-channel floor: dark mean + 3 sqrt(dark mean) + 1 counts per bin.
std::vector<Gap> detect_gaps(const RateTrace& trace);

nlohmann::json dynamic_summary_json(const DynamicRun& run, const Scenario& scenario);

void write_trace_csv(std::ostream& os, const RateTrace& trace);
void write_static_outputs(const std::filesystem::path& dir, const SummaryTable& table);
void write_dynamic_outputs(const std::filesystem::path& dir, const DynamicRun& run, const Scenario& scenario);

/// Human-readable digest of a run directory's summary.json.
std::string render_report(const std::filesystem::path& dir);

}  // namespace eprnet
