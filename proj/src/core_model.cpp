#include "eprnet/core_model.hpp"

#include <algorithm>
#include <sstream>
#include <utility>

namespace eprnet {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    auto next = s.find(sep, pos);
    out.push_back(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

// Published maps as assignment text. The assignment of streams to band/site
// slots is the default documented in README; only the served site pairs are
// fixed by the measurements.
struct BuiltinDef {
  MapId id;
  std::vector<std::string> lines;
};

const std::vector<BuiltinDef>& builtin_defs() {
  static const std::vector<BuiltinDef> defs{
      {MapId::I, {"EPR1.s1.C -> A", "EPR1.s1.L -> D", "EPR1.s2.C -> B", "EPR1.s2.L -> C"}},
      {MapId::II, {"EPR1.s1.L -> B", "EPR1.s1.C -> C", "EPR1.s2.L -> A", "EPR1.s2.C -> D"}},
      {MapId::III,
       {"EPR1.s1.C -> A", "EPR1.s1.L -> D", "EPR1.s2.L -> A", "EPR1.s2.C -> C", "EPR2.O -> B"}},
      {MapId::IV,
       {"EPR1.s1.C -> A", "EPR1.s1.L -> C", "EPR1.s2.L -> A", "EPR1.s2.C -> C", "EPR2.O -> D"}},
      {MapId::V,
       {"EPR1.s1.C -> A", "EPR1.s1.L -> B", "EPR1.s2.C -> C", "EPR1.s2.L -> D", "EPR2.O -> A"}},
      {MapId::VI, {"EPR1.s2.C -> B", "EPR1.s2.L -> D", "EPR1.s1.L -> C", "EPR1.s1.C -> D"}},
  };
  return defs;
}

int site_order(Site s) { return s == Site::E ? -1 : static_cast<int>(s); }

}  // namespace

std::string_view to_string(Site s) {
  static constexpr std::array<std::string_view, 5> names{"A", "B", "C", "D", "E"};
  return names[static_cast<std::size_t>(s)];
}

std::string_view to_string(Band b) {
  static constexpr std::array<std::string_view, 5> names{"O", "S", "C", "L", "NIR900"};
  return names[static_cast<std::size_t>(b)];
}

std::string_view to_string(Source s) { return s == Source::EPR1 ? "EPR1" : "EPR2"; }

std::string_view to_string(Stream s) {
  switch (s) {
    case Stream::S1: return "s1";
    case Stream::S2: return "s2";
    default: return "single";
  }
}

Site parse_site(std::string_view text) {
  text = trim(text);
  for (Site s : kAllSites)
    if (to_string(s) == text) return s;
  throw std::invalid_argument("unknown site '" + std::string(text) + "'");
}

Band parse_band(std::string_view text) {
  text = trim(text);
  for (Band b : {Band::O, Band::S, Band::C, Band::L, Band::NIR900})
    if (to_string(b) == text) return b;
  throw std::invalid_argument("unknown waveband '" + std::string(text) + "'");
}

std::string to_string(StreamKey k) {
  if (k.source == Source::EPR2) return "EPR2";
  return std::string(to_string(k.source)) + "." + std::string(to_string(k.stream));
}

StreamKey parse_stream(std::string_view text) {
  text = trim(text);
  for (auto k : kStreams)
    if (to_string(k) == text) return k;
  if (text == "EPR2.single") return kStreams[2];
  throw std::invalid_argument("unknown stream '" + std::string(text) + "'");
}

std::size_t stream_index(StreamKey k) {
  for (std::size_t i = 0; i < kStreams.size(); ++i)
    if (kStreams[i] == k) return i;
  throw std::invalid_argument("invalid stream key");
}

std::size_t asset_index(const SpectralAsset& a) {
  for (std::size_t i = 0; i < kRoutableAssets.size(); ++i)
    if (kRoutableAssets[i] == a) return i;
  throw std::invalid_argument("asset " + to_string(a) + " is not routable");
}

std::string to_string(const SpectralAsset& a) {
  if (a.source == Source::EPR2) return "EPR2." + std::string(to_string(a.band));
  return std::string(to_string(a.source)) + "." + std::string(to_string(a.stream)) + "." +
         std::string(to_string(a.band));
}

SpectralAsset parse_asset(std::string_view text) {
  text = trim(text);
  for (const auto& a : kRoutableAssets)
    if (to_string(a) == text) return a;
  if (text == to_string(kLocalNirAsset))
    throw std::invalid_argument("EPR2.NIR900 is pinned to site E and cannot be routed");
  throw std::invalid_argument("unknown spectral asset '" + std::string(text) + "'");
}

std::string_view to_string(MapId id) {
  static constexpr std::array<std::string_view, 6> names{"I", "II", "III", "IV", "V", "VI"};
  return names[static_cast<std::size_t>(id) - 1];
}

std::optional<MapId> parse_map_id(std::string_view text) {
  text = trim(text);
  for (MapId id : kBuiltinMaps)
    if (to_string(id) == text) return id;
  return std::nullopt;
}

void DistributionMap::assign(const SpectralAsset& a, Site s) {
  assignment[asset_index(a)] = s;
  if (a.source == Source::EPR2) epr2_active = true;
}

std::size_t DistributionMap::assets_at(Site s) const {
  return static_cast<std::size_t>(
      std::count(assignment.begin(), assignment.end(), std::optional<Site>(s)));
}

void apply_assignment(DistributionMap& map, std::string_view line) {
  auto arrow = line.find("->");
  if (arrow == std::string_view::npos)
    throw std::invalid_argument("assignment '" + std::string(line) + "' lacks '->'");
  auto asset = parse_asset(line.substr(0, arrow));
  auto site = parse_site(line.substr(arrow + 2));
  map.assign(asset, site);
}

DistributionMap map_from_lines(std::optional<std::string> id, const std::vector<std::string>& lines) {
  DistributionMap map;
  map.id = std::move(id);
  for (const auto& line : lines) {
    for (auto part : split(line, ','))
      if (!trim(part).empty()) apply_assignment(map, part);
  }
  return map;
}

std::vector<std::string> map_to_lines(const DistributionMap& map) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < kRoutableAssets.size(); ++i)
    if (map.assignment[i])
      out.push_back(to_string(kRoutableAssets[i]) + " -> " + std::string(to_string(*map.assignment[i])));
  return out;
}

std::string_view to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::SameBandCollision: return "same-band collision";
    case ViolationKind::DanglingStream: return "dangling stream";
    case ViolationKind::SelfLink: return "self link";
    case ViolationKind::NonEdgeSite: return "non-edge site";
    case ViolationKind::Epr2Unassigned: return "EPR2 active but O asset unassigned";
    case ViolationKind::Epr2Inactive: return "O asset assigned while EPR2 inactive";
  }
  return "unknown";
}

bool ValidationReport::has(ViolationKind k) const {
  return std::any_of(violations.begin(), violations.end(), [k](const Violation& v) { return v.kind == k; });
}

std::string ValidationReport::summary() const {
  if (ok()) return "valid";
  std::ostringstream os;
  for (std::size_t i = 0; i < violations.size(); ++i) {
    if (i) os << "; ";
    os << violations[i].message;
  }
  return os.str();
}

InvalidMapError::InvalidMapError(ValidationReport report)
    : std::invalid_argument("invalid distribution map: " + report.summary()), report_(std::move(report)) {}

std::string EntangledLink::sites() const {
  return std::string(to_string(site_a)) + "-" + std::string(to_string(site_b));
}

std::string EntangledLink::label() const { return sites() + ":" + to_string(key()); }

DistributionMap builtin_map(MapId id) {
  for (const auto& def : builtin_defs())
    if (def.id == id) return map_from_lines(std::string(to_string(id)), def.lines);
  throw std::invalid_argument("unknown built-in map");
}

DistributionMap builtin_map(std::string_view id) {
  auto parsed = parse_map_id(id);
  if (!parsed) throw std::invalid_argument("unknown built-in map '" + std::string(id) + "'");
  return builtin_map(*parsed);
}

ValidationReport validate_map(const DistributionMap& map) {
  ValidationReport report;
  auto add = [&](ViolationKind kind, std::optional<SpectralAsset> asset, std::optional<Site> site,
                 std::string msg) { report.violations.push_back({kind, asset, site, std::move(msg)}); };

  for (std::size_t i = 0; i < kRoutableAssets.size(); ++i) {
    const auto& site = map.assignment[i];
    if (site && !is_edge(*site))
      add(ViolationKind::NonEdgeSite, kRoutableAssets[i], site,
          to_string(kRoutableAssets[i]) + " assigned to non-edge site " + std::string(to_string(*site)));
  }

  for (Site s : kEdgeSites) {
    for (Band b : {Band::O, Band::C, Band::L}) {
      std::vector<SpectralAsset> here;
      for (std::size_t i = 0; i < kRoutableAssets.size(); ++i)
        if (map.assignment[i] == s && kRoutableAssets[i].band == b) here.push_back(kRoutableAssets[i]);
      if (here.size() > 1)
        add(ViolationKind::SameBandCollision, here[1], s,
            "same-band collision at " + std::string(to_string(s)) + " (" + to_string(here[0]) + ", " +
                to_string(here[1]) + ")");
    }
  }

  for (Stream st : {Stream::S1, Stream::S2}) {
    SpectralAsset c{Source::EPR1, st, Band::C}, l{Source::EPR1, st, Band::L};
    auto sc = map.site_of(c), sl = map.site_of(l);
    if (sc.has_value() != sl.has_value()) {
      const auto& placed = sc ? c : l;
      add(ViolationKind::DanglingStream, placed, sc ? sc : sl,
          "dangling stream EPR1." + std::string(to_string(st)) + " (only " + to_string(placed) + " assigned)");
    } else if (sc && *sc == *sl) {
      add(ViolationKind::SelfLink, c, sc,
          "self link: both photons of EPR1." + std::string(to_string(st)) + " at " +
              std::string(to_string(*sc)));
    }
  }

  const SpectralAsset o = kRoutableAssets[4];
  if (map.epr2_active && !map.site_of(o))
    add(ViolationKind::Epr2Unassigned, o, std::nullopt, "EPR2 active but EPR2.O is not assigned");
  if (!map.epr2_active && map.site_of(o))
    add(ViolationKind::Epr2Inactive, o, map.site_of(o), "EPR2.O assigned while EPR2 is inactive");

  return report;
}

void require_valid(const DistributionMap& map) {
  auto report = validate_map(map);
  if (!report.ok()) throw InvalidMapError(std::move(report));
}

std::vector<EntangledLink> links_of(const DistributionMap& map) {
  require_valid(map);
  std::vector<EntangledLink> links;
  for (Stream st : {Stream::S1, Stream::S2}) {
    auto sc = map.site_of({Source::EPR1, st, Band::C});
    if (!sc) continue;
    auto sl = *map.site_of({Source::EPR1, st, Band::L});
    Site a = *sc, b = sl;
    if (site_order(b) < site_order(a)) std::swap(a, b);
    links.push_back({a, b, Source::EPR1, st});
  }
  if (map.epr2_active) links.push_back({Site::E, *map.site_of(kRoutableAssets[4]), Source::EPR2, Stream::Single});
  return links;
}

}  // namespace eprnet
