#pragma once

// Sites, wavebands, spectral assets and distribution maps of the overlay.

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace eprnet {

enum class Site : std::uint8_t { A, B, C, D, E };

inline constexpr std::array<Site, 4> kEdgeSites{Site::A, Site::B, Site::C, Site::D};
inline constexpr std::array<Site, 5> kAllSites{Site::A, Site::B, Site::C, Site::D, Site::E};

constexpr bool is_edge(Site s) { return s != Site::E; }

enum class Band : std::uint8_t { O, S, C, L, NIR900 };
enum class BandRole : std::uint8_t { Quantum, Control, LocalDetection };

constexpr BandRole role_of(Band b) {
  switch (b) {
    case Band::S: return BandRole::Control;
    case Band::NIR900: return BandRole::LocalDetection;
    default: return BandRole::Quantum;
  }
}

enum class Source : std::uint8_t { EPR1, EPR2 };
enum class Stream : std::uint8_t { S1, S2, Single };

std::string_view to_string(Site s);
std::string_view to_string(Band b);
std::string_view to_string(Source s);
std::string_view to_string(Stream s);
Site parse_site(std::string_view text);
Band parse_band(std::string_view text);

/// Identifies one photon-pair stream: (EPR1,s1), (EPR1,s2) or (EPR2,single).
struct StreamKey {
  Source source;
  Stream stream;
  auto operator<=>(const StreamKey&) const = default;
};

inline constexpr std::array<StreamKey, 3> kStreams{
    StreamKey{Source::EPR1, Stream::S1}, StreamKey{Source::EPR1, Stream::S2},
    StreamKey{Source::EPR2, Stream::Single}};

std::string to_string(StreamKey k);
StreamKey parse_stream(std::string_view text);  // "EPR1.s1", "EPR2"
std::size_t stream_index(StreamKey k);

struct SpectralAsset {
  Source source;
  Stream stream;
  Band band;

  StreamKey key() const { return {source, stream}; }
  auto operator<=>(const SpectralAsset&) const = default;
};

/// The five routable assets, in canonical order (also their wire index).
inline constexpr std::array<SpectralAsset, 5> kRoutableAssets{
    SpectralAsset{Source::EPR1, Stream::S1, Band::C},
    SpectralAsset{Source::EPR1, Stream::S1, Band::L},
    SpectralAsset{Source::EPR1, Stream::S2, Band::C},
    SpectralAsset{Source::EPR1, Stream::S2, Band::L},
    SpectralAsset{Source::EPR2, Stream::Single, Band::O}};

/// EPR2's short-wavelength partner; detected locally at E and never routed.
inline constexpr SpectralAsset kLocalNirAsset{Source::EPR2, Stream::Single, Band::NIR900};

std::size_t asset_index(const SpectralAsset& a);  // throws for non-routable assets
std::string to_string(const SpectralAsset& a);
SpectralAsset parse_asset(std::string_view text);  // "EPR1.s1.C", "EPR2.O"

enum class MapId : std::uint8_t { I = 1, II, III, IV, V, VI };
inline constexpr std::array<MapId, 6> kBuiltinMaps{MapId::I,  MapId::II, MapId::III,
                                                   MapId::IV, MapId::V,  MapId::VI};
std::string_view to_string(MapId id);
std::optional<MapId> parse_map_id(std::string_view text);

struct DistributionMap {
  std::optional<std::string> id;
  std::array<std::optional<Site>, kRoutableAssets.size()> assignment{};
  bool epr2_active = false;

  std::optional<Site> site_of(const SpectralAsset& a) const { return assignment[asset_index(a)]; }
  void assign(const SpectralAsset& a, Site s);
  void unassign(const SpectralAsset& a) { assignment[asset_index(a)].reset(); }
  std::string label() const { return id.value_or("custom"); }
  std::size_t assets_at(Site s) const;

  bool operator==(const DistributionMap&) const = default;
};

/// Parses "EPR1.s1.C -> A" and applies it to `map` (EPR2.O also sets epr2_active).
void apply_assignment(DistributionMap& map, std::string_view line);
DistributionMap map_from_lines(std::optional<std::string> id, const std::vector<std::string>& lines);
std::vector<std::string> map_to_lines(const DistributionMap& map);

enum class ViolationKind : std::uint8_t {
  SameBandCollision,
  DanglingStream,
  SelfLink,
  NonEdgeSite,
  Epr2Unassigned,
  Epr2Inactive,
};
std::string_view to_string(ViolationKind k);

struct Violation {
  ViolationKind kind;
  std::optional<SpectralAsset> asset;
  std::optional<Site> site;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  bool has(ViolationKind k) const;
  std::string summary() const;
};

class InvalidMapError : public std::invalid_argument {
 public:
  explicit InvalidMapError(ValidationReport report);
  const ValidationReport& report() const { return report_; }

 private:
  ValidationReport report_;
};

struct EntangledLink {
  Site site_a;
  Site site_b;
  Source source;
  Stream stream;

  StreamKey key() const { return {source, stream}; }
  std::string sites() const;  // "A-D", "E-B"
  std::string label() const;  // "A-D:EPR1.s1"
  auto operator<=>(const EntangledLink&) const = default;
};

DistributionMap builtin_map(MapId id);
DistributionMap builtin_map(std::string_view id);
ValidationReport validate_map(const DistributionMap& map);
void require_valid(const DistributionMap& map);

/// One link per assigned EPR1 stream, plus E-x when EPR2 is routed. Ordered s1, s2, EPR2.
std::vector<EntangledLink> links_of(const DistributionMap& map);

}  // namespace eprnet
