#include "eprnet/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace eprnet {
namespace {

constexpr Band kEdgeBands[] = {Band::O, Band::C, Band::L};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void check_components(const Scenario& sc) {
  sc.plant.check();
  for (const auto& s : sc.sources.streams) s.check();
  for (const auto& d : sc.detectors) d.check();
  sc.amc.raman.check();
}

std::string hex(std::span<const std::uint8_t> bytes) {
  std::string out;
  char buf[3];
  for (auto b : bytes) {
    std::snprintf(buf, sizeof(buf), "%02x", b);
    out += buf;
  }
  return out;
}

AMCInstruction instruction_for(const std::string& map_id, const DistributionMap& map, std::uint32_t seq,
                               double duration) {
  AMCInstruction instr;
  instr.sequence = seq;
  instr.duration_on_wire_s = duration;
  if (auto id = parse_map_id(map_id))
    instr.payload = *id;
  else
    instr.payload = map;
  return instr;
}

std::span<const double> time_slice(const std::vector<double>& tags, double from, double to) {
  auto lo = std::lower_bound(tags.begin(), tags.end(), from);
  auto hi = std::lower_bound(lo, tags.end(), to);
  return {lo, hi};
}

std::size_t ceil_bin(double t, double bin) {
  return static_cast<std::size_t>(std::max(0.0, std::ceil(t / bin - 1e-9)));
}

double mean_of(std::span<const double> v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

std::string fmt(double v, int precision) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

}  // namespace

std::size_t DetectionPlan::index(Site site, Band band) const {
  for (std::size_t i = 0; i < channels.size(); ++i)
    if (channels[i].site == site && channels[i].band == band) return i;
  throw std::invalid_argument("no detector for band " + std::string(to_string(band)) + " at site " +
                              std::string(to_string(site)));
}

DetectionPlan detection_plan(const Scenario& scenario) {
  DetectionPlan plan;
  for (Site s : kEdgeSites)
    for (Band b : kEdgeBands)
      plan.channels.push_back(
          {std::string(to_string(s)) + "." + std::string(to_string(b)), s, b, scenario.detector(s)});
  plan.channels.push_back({"E.NIR900", Site::E, Band::NIR900, scenario.detector(Site::E)});
  return plan;
}

std::vector<PairEmitter> emitters_for(const Scenario& scenario, const DetectionPlan& plan, const DistributionMap* map) {
  std::vector<PairEmitter> out;
  std::vector<ChannelPath> paths;
  if (map) paths = compile_paths(*map, scenario.plant);
  auto find = [&](const SpectralAsset& a) -> const ChannelPath* {
    for (const auto& p : paths)
      if (p.asset == a) return &p;
    return nullptr;
  };
  auto arm = [&](const StreamModel& m, const ChannelPath& p) {
    return ArmRef{plan.index(p.destination, p.asset.band), arm_transmittance(m, p), p.delay_s};
  };
  for (Stream st : {Stream::S1, Stream::S2}) {
    const auto& model = scenario.sources.at({Source::EPR1, st});
    const auto* pc = find({Source::EPR1, st, Band::C});
    const auto* pl = find({Source::EPR1, st, Band::L});
    if (pc && pl) out.push_back({model, arm(model, *pc), arm(model, *pl)});
  }
  const auto& epr2 = scenario.sources.at(kStreams[2]);
  PairEmitter e{epr2, arm(epr2, local_nir_path()), std::nullopt};
  if (map && map->epr2_active)
    if (const auto* po = find(kRoutableAssets[4])) e.arm_b = arm(epr2, *po);
  out.push_back(e);
  return out;
}

std::vector<double> raman_background(const Scenario& scenario, const DetectionPlan& plan, const DistributionMap* map) {
  std::vector<double> bg(plan.channels.size(), 0.0);
  if (!map) return bg;
  for (const auto& p : compile_paths(*map, scenario.plant))
    bg[plan.index(p.destination, p.asset.band)] +=
        raman_noise_rate(scenario.amc.raman, scenario.plant.feeder.length_km, p.asset.band);
  return bg;
}

const LinkRow& SummaryTable::row(const std::string& sites, StreamKey stream) const {
  for (const auto& r : rows)
    if (r.link.sites() == sites && r.link.key() == stream) return r;
  throw std::out_of_range("no link " + sites + " on " + to_string(stream) + " in map " + map);
}

nlohmann::json SummaryTable::to_json() const {
  nlohmann::json j{{"kind", "static"},
                   {"map", map},
                   {"duration_s", duration_s},
                   {"seed", seed},
                   {"amc_mode", std::string(to_string(amc_mode))}};
  j["links"] = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json l{{"sites", r.link.sites()},
                     {"stream", to_string(r.link.key())},
                     {"rate", r.rate},
                     {"rate_sigma", r.rate_sigma},
                     {"expected_rate", r.expected_rate},
                     {"accidental_rate", r.accidental_rate},
                     {"car", r.car},
                     {"matched", r.matched},
                     {"peak_delay_s", r.peak_delay_s}};
    if (r.visibility)
      l["visibility"] = {{"V", r.visibility->value},
                         {"std_error", r.visibility->std_error},
                         {"counts_used", r.visibility->counts_used},
                         {"scan_rate", r.scan_rate},
                         {"exceeds_classical_limit", exceeds_classical_limit(*r.visibility)}};
    j["links"].push_back(l);
  }
  for (const auto& [id, rate] : channel_singles) j["singles"][id] = rate;
  return j;
}

SummaryTable run_static(const std::string& map_id, const Scenario& scenario, double duration_s, std::uint64_t seed) {
  if (!(duration_s > 0.0)) throw std::invalid_argument("duration must be positive");
  check_components(scenario);
  const auto map = scenario.resolve_map(map_id);
  require_valid(map);
  switch_permutation(map, scenario.plant.node.switch_ports);

  const auto plan = detection_plan(scenario);
  const auto emitters = emitters_for(scenario, plan, &map);
  const auto bg = raman_background(scenario, plan, &map);
  const std::vector<double> none(plan.channels.size(), 0.0);
  const auto mode = scenario.amc.mode;
  const double wire = std::min(scenario.amc.instruction_duration_s, duration_s);
  const std::vector<Epoch> epochs{{0.0, wire, emitters, mode == AmcMode::Off ? none : bg},
                                  {wire, duration_s, emitters, mode == AmcMode::Continuous ? bg : none}};
  const auto tags = generate_timetags(plan.channels, epochs, seed);

  SummaryTable table;
  table.map = map.label();
  table.duration_s = duration_s;
  table.seed = seed;
  table.amc_mode = mode;
  const auto links = links_of(map);
  for (std::size_t li = 0; li < links.size(); ++li) {
    const auto& link = links[li];
    const auto [pa, pb] = link_paths(map, scenario.plant, link);
    const auto ca = plan.index(pa.destination, pa.asset.band), cb = plan.index(pb.destination, pb.asset.band);
    auto opts = scenario.analysis.counting;
    opts.center_s = pb.delay_s - pa.delay_s;
    const auto res = count_coincidences(tags[ca], tags[cb], opts);
    const auto& model = scenario.sources.at(link.key());

    LinkRow row;
    row.link = link;
    row.rate = res.true_rate;
    row.rate_sigma = std::sqrt(static_cast<double>(res.matched)) / duration_s;
    row.expected_rate = expected_coincidences(model, pa, pb, plan.channels[ca].detector, plan.channels[cb].detector,
                                              opts.window_s)
                            .true_rate;
    row.accidental_rate = res.accidental_rate;
    row.car = res.car();
    row.matched = res.matched;
    row.peak_delay_s = res.peak_delay_s;
    if (link.source == Source::EPR2) {
      const auto& v = scenario.visibility;
      row.scan_rate = std::max(0.0, res.true_rate) * v.analyzer_transmittance();
      ScanConfig cfg{row.scan_rate, v.sub_dwell_s, v.tracker_enabled, v.tracker, false};
      const auto settings = default_settings(v.settings);
      auto scan = scan_and_fit({v.intrinsic, 0.0}, {v.drift_diffusion}, cfg, settings, v.scan_dwell_s,
                               mix_seed(seed, li));
      row.visibility = scan.estimate;
      row.scan_points = std::move(scan.points);
    }
    table.rows.push_back(std::move(row));
  }
  for (std::size_t c = 0; c < plan.channels.size(); ++c)
    table.channel_singles.emplace_back(plan.channels[c].id,
                                       static_cast<double>(tags[c].timestamps.size()) / duration_s);
  return table;
}

std::vector<double> RateTrace::site_singles(Site site) const {
  std::vector<double> out(n_bins, 0.0);
  for (const auto& c : channels)
    if (c.site == site)
      for (std::size_t i = 0; i < n_bins; ++i) out[i] += c.counts[i];
  return out;
}

const TraceLink* RateTrace::link(const std::string& label) const {
  for (const auto& l : links)
    if (l.label == label) return &l;
  return nullptr;
}

DynamicRun run_dynamic(const Scenario& scenario, std::uint64_t seed) {
  scenario.check();
  const auto& sched = scenario.schedule;
  const std::size_t n_seg = sched.size();
  const double wire = scenario.amc.instruction_duration_s;
  const double bin = scenario.acquisition_bin_s;

  DynamicRun run;
  run.seed = seed;
  run.amc_mode = scenario.amc.mode;

  std::vector<double> starts(n_seg + 1, 0.0);
  for (std::size_t k = 0; k < n_seg; ++k) starts[k + 1] = starts[k] + sched[k].dwell_s;
  const double total = starts.back();

  // Control plane: every instruction goes through the wire format before it reaches the node.
  NodeModel node(scenario.plant.node);
  std::vector<DistributionMap> maps;
  for (std::size_t k = 0; k < n_seg; ++k) {
    const auto wanted = scenario.resolve_map(sched[k].map);
    const auto instr = instruction_for(sched[k].map, wanted, static_cast<std::uint32_t>(k + 1), wire);
    auto frame = encode_instruction(instr);
    const auto received = decode_instruction(frame).resolve();
    run.reconfigurations.push_back(node.reconfigure(received, starts[k] + wire));
    run.instructions.push_back({starts[k], instr.sequence, received.label(), "applied"});
    run.frames.push_back(std::move(frame));
    maps.push_back(received);
  }

  const auto plan = detection_plan(scenario);
  std::vector<std::vector<PairEmitter>> emitters;
  std::vector<std::vector<double>> backgrounds;
  for (const auto& m : maps) {
    emitters.push_back(emitters_for(scenario, plan, &m));
    backgrounds.push_back(raman_background(scenario, plan, &m));
  }
  const auto idle_emitters = emitters_for(scenario, plan, nullptr);
  const std::vector<double> no_background(plan.channels.size(), 0.0);

  std::set<double> cuts{0.0, total};
  for (std::size_t k = 0; k < n_seg; ++k) {
    cuts.insert(starts[k]);
    for (double t : {run.reconfigurations[k].start_s, run.reconfigurations[k].end_s()})
      if (t < total) cuts.insert(t);
  }
  std::vector<Epoch> epochs;
  for (auto it = cuts.begin(); std::next(it) != cuts.end(); ++it) {
    const double a = *it, b = *std::next(it), mid = 0.5 * (a + b);
    int active = -1;  // routed map index, -1 while nothing is routed
    for (std::size_t k = 0; k < n_seg; ++k)
      if (run.reconfigurations[k].start_s <= mid) active = mid < run.reconfigurations[k].end_s() ? -1 : int(k);
    bool amc_on = false;
    switch (scenario.amc.mode) {
      case AmcMode::Off: break;
      case AmcMode::Continuous: amc_on = true; break;
      case AmcMode::Gated:
        for (std::size_t k = 0; k < n_seg; ++k) amc_on |= (mid >= starts[k] && mid < starts[k] + wire);
        break;
    }
    Epoch ep{a, b, active < 0 ? idle_emitters : emitters[active],
             (amc_on && active >= 0) ? backgrounds[active] : no_background};
    epochs.push_back(std::move(ep));
  }
  const auto tags = generate_timetags(plan.channels, epochs, seed);

  auto& trace = run.trace;
  trace.bin_width_s = bin;
  trace.n_bins = std::max<std::size_t>(1, ceil_bin(total, bin));
  auto bin_of = [&](double t) {
    return std::min(trace.n_bins - 1, static_cast<std::size_t>(std::max(0.0, std::floor(t / bin))));
  };

  for (std::size_t k = 0; k < n_seg; ++k) {
    SegmentInfo seg;
    seg.map = maps[k].label();
    seg.start_s = starts[k];
    seg.end_s = starts[k + 1];
    seg.arrival_s = run.reconfigurations[k].start_s;
    seg.outage_end_s = run.reconfigurations[k].end_s();
    seg.first_bin = ceil_bin(starts[k], bin);
    seg.end_bin = k + 1 == n_seg ? trace.n_bins : ceil_bin(starts[k + 1], bin);
    seg.steady_bin =
        std::min(seg.end_bin, ceil_bin(seg.outage_end_s, bin) + static_cast<std::size_t>(scenario.analysis.guard_bins));
    for (const auto& link : links_of(maps[k])) {
      const auto [pa, pb] = link_paths(maps[k], scenario.plant, link);
      seg.links.push_back({link.label(), plan.index(pa.destination, pa.asset.band),
                           plan.index(pb.destination, pb.asset.band), pb.delay_s - pa.delay_s});
    }
    trace.segments.push_back(std::move(seg));
  }

  for (std::size_t c = 0; c < plan.channels.size(); ++c) {
    const auto& ch = plan.channels[c];
    TraceChannel tc{ch.id, ch.site, ch.band, ch.detector.dark_rate * bin, std::vector<std::uint32_t>(trace.n_bins, 0),
                    std::vector<bool>(trace.n_bins, false)};
    for (double t : tags[c].timestamps) ++tc.counts[bin_of(t)];
    for (std::size_t k = 0; k < n_seg; ++k) {
      const auto& seg = trace.segments[k];
      bool routed = ch.band == Band::NIR900;
      for (const auto& p : compile_paths(maps[k], scenario.plant))
        routed |= (p.destination == ch.site && p.asset.band == ch.band);
      for (std::size_t i = seg.first_bin; i < seg.end_bin; ++i) tc.expected_active[i] = routed;
    }
    trace.channels.push_back(std::move(tc));
  }

  const double window = scenario.analysis.counting.window_s;
  for (std::size_t k = 0; k < n_seg; ++k) {
    const auto& seg = trace.segments[k];
    const auto links = links_of(maps[k]);
    for (std::size_t li = 0; li < links.size(); ++li) {
      const auto& sl = seg.links[li];
      auto it = std::find_if(trace.links.begin(), trace.links.end(),
                             [&](const TraceLink& l) { return l.label == sl.label; });
      TraceLink* tl = it == trace.links.end() ? nullptr : &*it;
      if (!tl) {
        trace.links.push_back({sl.label, links[li].site_a, links[li].site_b, std::vector<std::uint32_t>(trace.n_bins, 0)});
        tl = &trace.links.back();
      }
      const auto a = time_slice(tags[sl.channel_a].timestamps, seg.start_s, seg.end_s);
      const auto b = time_slice(tags[sl.channel_b].timestamps, seg.start_s + sl.delay_s - window,
                                seg.end_s + sl.delay_s + window);
      for (double t : match_pairs(a, b, sl.delay_s, window)) ++tl->counts[bin_of(t)];
    }
  }
  return run;
}

std::vector<double> segment_means(const RateTrace& trace, std::span<const double> series) {
  if (series.size() != trace.n_bins) throw std::invalid_argument("series length does not match the trace");
  std::vector<double> out;
  for (const auto& seg : trace.segments) {
    std::size_t from = seg.steady_bin < seg.end_bin ? seg.steady_bin : seg.first_bin;
    out.push_back(mean_of(series.subspan(from, seg.end_bin - from)));
  }
  return out;
}

std::vector<double> segment_means(const RateTrace& trace, std::span<const std::uint32_t> series) {
  std::vector<double> d(series.begin(), series.end());
  return segment_means(trace, std::span<const double>(d));
}

DynamicRange dynamic_range(std::span<const double> means) {
  if (means.empty()) throw std::invalid_argument("dynamic range needs at least one segment");
  DynamicRange r;
  r.segment_means.assign(means.begin(), means.end());
  const auto [lo, hi] = std::minmax_element(means.begin(), means.end());
  if (!(*lo > 0.0)) {
    r.unbounded = true;
    r.db = std::numeric_limits<double>::infinity();
    return r;
  }
  r.db = 10.0 * std::log10(*hi / *lo);
  return r;
}

DynamicRange dynamic_range(const RateTrace& trace, std::span<const Site> sites) {
  if (trace.n_bins == 0 || trace.segments.empty()) throw std::invalid_argument("trace is empty");
  std::vector<double> sum(trace.n_bins, 0.0);
  for (Site s : sites) {
    const auto v = trace.site_singles(s);
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += v[i];
  }
  const auto means = segment_means(trace, std::span<const double>(sum));
  return dynamic_range(means);
}

DynamicRange coincidence_dynamic_range(const RateTrace& trace) {
  if (trace.n_bins == 0 || trace.segments.empty()) throw std::invalid_argument("trace is empty");
  std::vector<double> sum(trace.n_bins, 0.0);
  for (const auto& l : trace.links)
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += l.counts[i];
  const auto means = segment_means(trace, std::span<const double>(sum));
  return dynamic_range(means);
}

namespace {

std::vector<Gap> gaps_with(const RateTrace& trace, const std::function<double(const TraceChannel&)>& floor_of) {
  std::vector<Gap> out;
  for (const auto& c : trace.channels) {
    const double floor = floor_of(c);
    if (!(floor >= 0.0)) throw std::invalid_argument("gap floor must be >= 0");
    std::size_t i = 0;
    while (i < trace.n_bins) {
      if (!(c.expected_active[i] && c.counts[i] <= floor)) {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < trace.n_bins && c.expected_active[j] && c.counts[j] <= floor) ++j;
      out.push_back({c.id, i, j - i, trace.bin_start(i), trace.bin_start(j)});
      i = j;
    }
  }
  return out;
}

}  // namespace

std::vector<Gap> detect_gaps(const RateTrace& trace, double floor) {
  if (!(floor >= 0.0)) throw std::invalid_argument("gap floor must be >= 0");
  return gaps_with(trace, [floor](const TraceChannel&) { return floor; });
}

std::vector<Gap> detect_gaps(const RateTrace& trace) {
  return gaps_with(trace, [](const TraceChannel& c) { return c.dark_per_bin + 3.0 * std::sqrt(c.dark_per_bin) + 1.0; });
}

nlohmann::json dynamic_summary_json(const DynamicRun& run, const Scenario& scenario) {
  const auto& tr = run.trace;
  nlohmann::json j{{"kind", "dynamic"},
                   {"scenario", scenario.name},
                   {"seed", run.seed},
                   {"amc_mode", std::string(to_string(run.amc_mode))},
                   {"bin_width_s", tr.bin_width_s},
                   {"n_bins", tr.n_bins},
                   {"duration_s", tr.segments.empty() ? 0.0 : tr.segments.back().end_s}};

  std::map<Site, std::vector<double>> site_means;
  for (Site s : kAllSites) site_means[s] = segment_means(tr, std::span<const double>(tr.site_singles(s)));

  j["segments"] = nlohmann::json::array();
  for (std::size_t k = 0; k < tr.segments.size(); ++k) {
    const auto& seg = tr.segments[k];
    const std::size_t from = seg.steady_bin < seg.end_bin ? seg.steady_bin : seg.first_bin;
    const double span_s = static_cast<double>(seg.end_bin - from) * tr.bin_width_s;
    nlohmann::json sj{{"map", seg.map},
                      {"start_s", seg.start_s},
                      {"end_s", seg.end_s},
                      {"arrival_s", seg.arrival_s},
                      {"outage_end_s", seg.outage_end_s},
                      {"steady_bins", seg.end_bin - from}};
    for (Site s : kAllSites) sj["site_singles_per_s"][std::string(to_string(s))] = site_means[s][k] / tr.bin_width_s;
    sj["links"] = nlohmann::json::array();
    for (const auto& sl : seg.links) {
      const auto* tl = tr.link(sl.label);
      double raw = 0.0;
      for (std::size_t i = from; i < seg.end_bin; ++i) raw += tl->counts[i];
      raw /= span_s;
      auto singles = [&](std::size_t c) {
        double n = 0.0;
        for (std::size_t i = from; i < seg.end_bin; ++i) n += tr.channels[c].counts[i];
        return n / span_s;
      };
      const double acc = singles(sl.channel_a) * singles(sl.channel_b) * scenario.analysis.counting.window_s;
      sj["links"].push_back({{"link", sl.label}, {"raw_rate", raw}, {"rate", raw - acc}, {"accidental_rate", acc}});
    }
    j["segments"].push_back(sj);
  }

  const std::vector<Site> edges(kEdgeSites.begin(), kEdgeSites.end());
  const auto dr = dynamic_range(tr, edges);
  const auto cdr = coincidence_dynamic_range(tr);
  j["dynamic_range"] = {{"edge_singles_db", dr.unbounded ? nlohmann::json(nullptr) : nlohmann::json(dr.db)},
                        {"edge_singles_unbounded", dr.unbounded},
                        {"coincidences_db", cdr.unbounded ? nlohmann::json(nullptr) : nlohmann::json(cdr.db)},
                        {"coincidences_unbounded", cdr.unbounded}};
  const auto& e = site_means[Site::E];
  const double m = mean_of(e);
  double var = 0.0;
  for (double x : e) var += (x - m) * (x - m);
  j["e_site_cv"] = m > 0.0 ? std::sqrt(var / static_cast<double>(e.size())) / m : 0.0;
  j["gaps"] = nlohmann::json::array();
  for (const auto& g : detect_gaps(tr))
    j["gaps"].push_back({{"channel", g.channel}, {"start_s", g.start_s}, {"end_s", g.end_s}, {"bins", g.bins}});
  return j;
}

void write_trace_csv(std::ostream& os, const RateTrace& trace) {
  os << "bin_start_s,site,singles";
  for (const auto& l : trace.links) os << "," << l.label;
  os << "\n";
  std::map<Site, std::vector<double>> singles;
  for (Site s : kAllSites) singles[s] = trace.site_singles(s);
  char buf[32];
  for (std::size_t i = 0; i < trace.n_bins; ++i) {
    std::snprintf(buf, sizeof(buf), "%.6f", trace.bin_start(i));
    for (Site s : kAllSites) {
      os << buf << "," << to_string(s) << "," << static_cast<std::uint64_t>(singles[s][i]);
      for (const auto& l : trace.links) os << "," << ((l.site_a == s || l.site_b == s) ? l.counts[i] : 0u);
      os << "\n";
    }
  }
}

void write_static_outputs(const std::filesystem::path& dir, const SummaryTable& table) {
  std::filesystem::create_directories(dir);
  write_file(dir / "summary.json", table.to_json().dump(2) + "\n");
  auto line = nlohmann::json::parse(to_json_line({0.0, 1, table.map, "applied"}));
  line["event"] = "instruction";
  if (auto id = parse_map_id(table.map)) line["frame"] = hex(encode_instruction({1, *id, kDefaultInstructionDuration}));
  const std::string events = line.dump() + "\n";
  write_file(dir / "events.jsonl", events);
  for (const auto& r : table.rows) {
    if (!r.visibility) continue;
    std::ostringstream csv;
    write_scan_csv(csv, r.scan_points);
    write_file(dir / ("scan_" + r.link.sites() + ".csv"), csv.str());
    write_file(dir / ("fit_" + r.link.sites() + ".json"), fit_report_json(*r.visibility) + "\n");
  }
}

void write_dynamic_outputs(const std::filesystem::path& dir, const DynamicRun& run, const Scenario& scenario) {
  std::filesystem::create_directories(dir);
  write_file(dir / "summary.json", dynamic_summary_json(run, scenario).dump(2) + "\n");
  std::ostringstream csv;
  write_trace_csv(csv, run.trace);
  write_file(dir / "trace.csv", csv.str());
  std::string events, log;
  for (std::size_t k = 0; k < run.instructions.size(); ++k) {
    const auto& ins = run.instructions[k];
    log += to_json_line(ins) + "\n";
    auto line = nlohmann::json::parse(to_json_line(ins));
    line["event"] = "instruction";
    line["frame"] = hex(run.frames[k]);
    events += line.dump() + "\n";
    const auto& rc = run.reconfigurations[k];
    events += nlohmann::json{{"event", "reconfiguration"},
                             {"time", rc.start_s},
                             {"map", rc.map_label},
                             {"outage_s", rc.outage_s},
                             {"settled", rc.end_s()}}
                  .dump() +
              "\n";
  }
  write_file(dir / "events.jsonl", events);
  write_file(dir / "instructions.jsonl", log);
}

std::string render_report(const std::filesystem::path& dir) {
  std::ifstream is(dir / "summary.json");
  if (!is) throw std::runtime_error("no summary.json in " + dir.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("unreadable summary.json: " + std::string(e.what()));
  }
  std::ostringstream os;
  const auto kind = j.value("kind", "");
  if (kind == "static") {
    os << "static run, map " << j["map"].get<std::string>() << ", " << j["duration_s"].get<double>()
       << " s, seed " << j["seed"].get<std::uint64_t>() << ", AMC " << j["amc_mode"].get<std::string>() << "\n";
    for (const auto& l : j["links"]) {
      os << "  " << std::left << std::setw(5) << l["sites"].get<std::string>() << " " << std::setw(8)
         << l["stream"].get<std::string>() << std::right << " " << fmt(l["rate"], 2) << " +- "
         << fmt(l["rate_sigma"], 2) << " cc/s  (expected " << fmt(l["expected_rate"], 2) << ", CAR "
         << fmt(l["car"], 1) << ")";
      if (l.contains("visibility"))
        os << "  V = " << fmt(l["visibility"]["V"], 3) << " +- " << fmt(l["visibility"]["std_error"], 3)
           << (l["visibility"]["exceeds_classical_limit"].get<bool>() ? " (above classical limit)"
                                                                       : " (not above classical limit)");
      os << "\n";
    }
  } else if (kind == "dynamic") {
    os << "dynamic run, " << j["segments"].size() << " segments, " << j["duration_s"].get<double>() << " s, seed "
       << j["seed"].get<std::uint64_t>() << ", AMC " << j["amc_mode"].get<std::string>() << "\n";
    for (const auto& s : j["segments"]) {
      os << "  " << std::left << std::setw(4) << s["map"].get<std::string>() << std::right << " ["
         << fmt(s["start_s"], 2) << ", " << fmt(s["end_s"], 2) << ") singles/s";
      for (const auto& [site, v] : s["site_singles_per_s"].items()) os << " " << site << "=" << fmt(v, 0);
      os << "\n";
      for (const auto& l : s["links"]) os << "       " << l["link"].get<std::string>() << " " << fmt(l["rate"], 2) << " cc/s\n";
    }
    const auto& dr = j["dynamic_range"];
    os << "  edge dynamic range: "
       << (dr["edge_singles_db"].is_null() ? std::string("unbounded") : fmt(dr["edge_singles_db"], 2) + " dB")
       << " (coincidences "
       << (dr["coincidences_db"].is_null() ? std::string("unbounded") : fmt(dr["coincidences_db"], 2) + " dB")
       << ")\n";
    os << "  E-site variation: " << fmt(100.0 * j["e_site_cv"].get<double>(), 2) << " %\n";
    os << "  gaps: " << j["gaps"].size() << "\n";
  } else {
    throw std::runtime_error("summary.json has unknown kind '" + kind + "'");
  }
  return os.str();
}

}  // namespace eprnet
