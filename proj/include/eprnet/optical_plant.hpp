#pragma once

// Fibers, the reconfigurable node and per-asset loss budgets.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "eprnet/core_model.hpp"

namespace eprnet {

/// Group delay of standard single-mode fiber, s/km.
inline constexpr double kFiberDelayPerKm = 4.896e-6;

double db_to_transmittance(double loss_db);

struct FiberSpan {
  std::string name;
  double length_km = 0.0;
  std::map<Band, double> attenuation_db_per_km;

  void check() const;
};

/// G.652 attenuation defaults (dB/km). Typical datasheet values; not measured on the testbed.
std::map<Band, double> default_attenuation();

double fiber_loss(const FiberSpan& span, Band band);

enum class TraversalRule : std::uint8_t {
  // Single pass when both EPR1 streams serve the same site pair, fold-back otherwise.
  SharedSitePair,
  AlwaysFoldBack,
  AlwaysSinglePass,
};

std::string_view to_string(TraversalRule r);
TraversalRule parse_traversal_rule(std::string_view text);

struct NodeConfig {
  int switch_ports = 8;
  double loss_min_db = 2.2;
  double loss_max_db = 3.8;
  // Fiber-to-fiber node loss for one pass and for a fold-back (two passes).
  double single_pass_loss_db = 2.2;
  double foldback_loss_db = 3.5;
  double response_time_s = 0.005;
  double traversal_delay_s = 5e-9;
  TraversalRule rule = TraversalRule::SharedSitePair;

  void check() const;
};

struct PlantConfig {
  FiberSpan feeder{"feeder", 12.8, default_attenuation()};
  FiberSpan drop{"drop", 4.3, default_attenuation()};
  NodeConfig node;

  void check() const;
};

struct PathSegment {
  enum class Kind : std::uint8_t { Fiber, NodeTraversal };
  Kind kind;
  std::string label;
  double loss_db = 0.0;
  double delay_s = 0.0;
};

struct ChannelPath {
  SpectralAsset asset;
  Site destination;
  std::vector<PathSegment> segments;
  double total_loss_db = 0.0;
  double delay_s = 0.0;
  int node_traversals = 0;

  void append(PathSegment seg);
  double transmittance() const { return db_to_transmittance(total_loss_db); }
  double node_loss_db() const;
};

/// The zero-length path of EPR2's NIR partner into the local detector at E.
ChannelPath local_nir_path();

/// Node passes an asset takes under the configured rule (0 when unassigned).
int node_traversals_for(const DistributionMap& map, const SpectralAsset& asset, const NodeConfig& node);

/// One path per assigned asset, in canonical asset order.
std::vector<ChannelPath> compile_paths(const DistributionMap& map, const PlantConfig& plant);

/// The two arms of `link`: (C, L) for an EPR1 stream, (local NIR, O) for EPR2.
std::pair<ChannelPath, ChannelPath> link_paths(const DistributionMap& map, const PlantConfig& plant,
                                               const EntangledLink& link);

using Permutation = std::vector<int>;

bool is_bijection(const Permutation& p);

/// Switch setting realizing `map`: asset inputs 0..4 onto per-site drop ports 2*site + slot.
Permutation switch_permutation(const DistributionMap& map, int ports);

struct ReconfigurationEvent {
  std::string map_label;
  double start_s = 0.0;
  double outage_s = 0.0;
  double end_s() const { return start_s + outage_s; }
};

/// Mutable switch state, owned by one simulation clock.
class NodeModel {
 public:
  explicit NodeModel(NodeConfig config);

  const NodeConfig& config() const { return config_; }
  const Permutation& permutation() const { return permutation_; }
  const std::optional<DistributionMap>& active_map() const { return map_; }

  /// Installs `new_map`; on error the node is left unchanged.
  ReconfigurationEvent reconfigure(const DistributionMap& new_map, double at_time_s);

  /// Transmittance scale at time t: zero inside the last outage window.
  bool in_outage(double t) const;

 private:
  NodeConfig config_;
  Permutation permutation_;
  std::optional<DistributionMap> map_;
  std::optional<ReconfigurationEvent> last_;
};

}  // namespace eprnet
