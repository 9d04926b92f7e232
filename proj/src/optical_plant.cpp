#include "eprnet/optical_plant.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace eprnet {

double db_to_transmittance(double loss_db) {
  if (!(loss_db >= 0.0)) throw std::invalid_argument("loss must be non-negative dB");
  return std::pow(10.0, -loss_db / 10.0);
}

void FiberSpan::check() const {
  if (!(length_km > 0.0)) throw std::invalid_argument("fiber span '" + name + "' must have positive length");
  for (const auto& [band, att] : attenuation_db_per_km)
    if (!(att >= 0.0))
      throw std::invalid_argument("fiber span '" + name + "' has negative attenuation in " +
                                  std::string(to_string(band)));
}

std::map<Band, double> default_attenuation() {
  return {{Band::O, 0.33}, {Band::S, 0.22}, {Band::C, 0.20}, {Band::L, 0.21}};
}

double fiber_loss(const FiberSpan& span, Band band) {
  auto it = span.attenuation_db_per_km.find(band);
  if (it == span.attenuation_db_per_km.end())
    throw std::invalid_argument("fiber span '" + span.name + "' has no attenuation for band " +
                                std::string(to_string(band)));
  return span.length_km * it->second;
}

std::string_view to_string(TraversalRule r) {
  switch (r) {
    case TraversalRule::SharedSitePair: return "shared-site-pair";
    case TraversalRule::AlwaysFoldBack: return "always-foldback";
    case TraversalRule::AlwaysSinglePass: return "always-single";
  }
  return "?";
}

TraversalRule parse_traversal_rule(std::string_view text) {
  for (auto r : {TraversalRule::SharedSitePair, TraversalRule::AlwaysFoldBack, TraversalRule::AlwaysSinglePass})
    if (to_string(r) == text) return r;
  throw std::invalid_argument("unknown traversal rule '" + std::string(text) + "'");
}

void NodeConfig::check() const {
  if (switch_ports != 2 * static_cast<int>(kEdgeSites.size()))
    throw std::invalid_argument("node switch must have 8 ports (two per edge drop)");
  if (!(loss_min_db >= 0.0 && loss_min_db <= loss_max_db))
    throw std::invalid_argument("node loss range must satisfy 0 <= min <= max");
  auto in_range = [&](double v) { return v >= loss_min_db && v <= loss_max_db; };
  if (!in_range(single_pass_loss_db) || !in_range(foldback_loss_db))
    throw std::invalid_argument("node fiber-to-fiber loss outside configured [min, max]");
  if (!(response_time_s >= 0.0)) throw std::invalid_argument("switch response time must be >= 0");
  if (!(traversal_delay_s >= 0.0)) throw std::invalid_argument("traversal delay must be >= 0");
}

void PlantConfig::check() const {
  feeder.check();
  drop.check();
  node.check();
}

void ChannelPath::append(PathSegment seg) {
  if (!(seg.loss_db >= 0.0)) throw std::invalid_argument("segment loss must be non-negative");
  total_loss_db += seg.loss_db;
  delay_s += seg.delay_s;
  if (seg.kind == PathSegment::Kind::NodeTraversal) ++node_traversals;
  segments.push_back(std::move(seg));
}

double ChannelPath::node_loss_db() const {
  double sum = 0.0;
  for (const auto& s : segments)
    if (s.kind == PathSegment::Kind::NodeTraversal) sum += s.loss_db;
  return sum;
}

ChannelPath local_nir_path() { return ChannelPath{kLocalNirAsset, Site::E, {}, 0.0, 0.0, 0}; }

int node_traversals_for(const DistributionMap& map, const SpectralAsset& asset, const NodeConfig& node) {
  if (!map.site_of(asset)) return 0;
  if (asset.source == Source::EPR2) return 1;
  switch (node.rule) {
    case TraversalRule::AlwaysFoldBack: return 2;
    case TraversalRule::AlwaysSinglePass: return 1;
    case TraversalRule::SharedSitePair: break;
  }
  auto sites_of = [&](Stream st) {
    std::set<Site> s;
    for (Band b : {Band::C, Band::L})
      if (auto site = map.site_of({Source::EPR1, st, b})) s.insert(*site);
    return s;
  };
  auto s1 = sites_of(Stream::S1), s2 = sites_of(Stream::S2);
  return (!s1.empty() && s1 == s2) ? 1 : 2;
}

std::vector<ChannelPath> compile_paths(const DistributionMap& map, const PlantConfig& plant) {
  require_valid(map);
  plant.check();
  std::vector<ChannelPath> paths;
  for (const auto& asset : kRoutableAssets) {
    auto site = map.site_of(asset);
    if (!site) continue;
    ChannelPath path{asset, *site, {}, 0.0, 0.0, 0};
    path.append({PathSegment::Kind::Fiber, plant.feeder.name, fiber_loss(plant.feeder, asset.band),
                 plant.feeder.length_km * kFiberDelayPerKm});
    const int passes = node_traversals_for(map, asset, plant.node);
    const double node_total = passes == 1 ? plant.node.single_pass_loss_db : plant.node.foldback_loss_db;
    for (int p = 0; p < passes; ++p)
      path.append({PathSegment::Kind::NodeTraversal, "node pass " + std::to_string(p + 1), node_total / passes,
                   plant.node.traversal_delay_s});
    path.append({PathSegment::Kind::Fiber, plant.drop.name + " " + std::string(to_string(*site)),
                 fiber_loss(plant.drop, asset.band), plant.drop.length_km * kFiberDelayPerKm});
    paths.push_back(std::move(path));
  }
  return paths;
}

std::pair<ChannelPath, ChannelPath> link_paths(const DistributionMap& map, const PlantConfig& plant,
                                               const EntangledLink& link) {
  const auto paths = compile_paths(map, plant);
  auto find = [&](const SpectralAsset& a) {
    for (const auto& p : paths)
      if (p.asset == a) return p;
    throw std::invalid_argument("asset " + to_string(a) + " is not routed by map " + map.label());
  };
  if (link.source == Source::EPR2) return {local_nir_path(), find(kRoutableAssets[4])};
  return {find({link.source, link.stream, Band::C}), find({link.source, link.stream, Band::L})};
}

bool is_bijection(const Permutation& p) {
  std::vector<bool> seen(p.size(), false);
  for (int v : p) {
    if (v < 0 || static_cast<std::size_t>(v) >= p.size() || seen[v]) return false;
    seen[v] = true;
  }
  return true;
}

Permutation switch_permutation(const DistributionMap& map, int ports) {
  Permutation perm(static_cast<std::size_t>(ports), -1);
  std::vector<bool> used(perm.size(), false);
  std::array<int, 4> slots{};
  for (std::size_t i = 0; i < kRoutableAssets.size(); ++i) {
    auto site = map.assignment[i];
    if (!site) continue;
    auto s = static_cast<std::size_t>(*site);
    if (slots[s] >= 2)
      throw std::invalid_argument("switch port capacity exceeded at site " + std::string(to_string(*site)));
    int out = 2 * static_cast<int>(s) + slots[s]++;
    perm[i] = out;
    used[static_cast<std::size_t>(out)] = true;
  }
  // Idle inputs take the remaining outputs in order.
  std::size_t next = 0;
  for (auto& p : perm) {
    if (p >= 0) continue;
    while (used[next]) ++next;
    p = static_cast<int>(next);
    used[next] = true;
  }
  return perm;
}

NodeModel::NodeModel(NodeConfig config) : config_(config) {
  config_.check();
  permutation_.resize(static_cast<std::size_t>(config_.switch_ports));
  for (std::size_t i = 0; i < permutation_.size(); ++i) permutation_[i] = static_cast<int>(i);
}

ReconfigurationEvent NodeModel::reconfigure(const DistributionMap& new_map, double at_time_s) {
  require_valid(new_map);
  auto perm = switch_permutation(new_map, config_.switch_ports);
  ReconfigurationEvent ev{new_map.label(), at_time_s, config_.response_time_s};
  permutation_ = std::move(perm);
  map_ = new_map;
  last_ = ev;
  return ev;
}

bool NodeModel::in_outage(double t) const { return last_ && t >= last_->start_s && t < last_->end_s(); }

}  // namespace eprnet
