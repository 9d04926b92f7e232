#include "eprnet/calibration.hpp"

#include <yaml-cpp/yaml.h>

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <sstream>

namespace eprnet {
namespace {

constexpr double kDbToNeper = 0.23025850929940457;  // ln(10)/10

struct Term {
  double log_base;  // ln of the unit-brightness rate without fold-back excess
  bool foldback;
  double log_rate;
  double weight;
};

EntangledLink find_link(const DistributionMap& map, const RateTarget& t) {
  for (const auto& l : links_of(map))
    if (l.sites() == t.sites && l.key() == t.stream) return l;
  throw CalibrationError("map " + t.map + " has no link " + t.sites + " on " + to_string(t.stream));
}

std::string describe(const RateTarget& t) { return t.map + " " + t.sites + " " + to_string(t.stream); }

}  // namespace

std::vector<RateTarget> parse_targets(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw std::invalid_argument(std::string("targets file is not valid YAML: ") + e.what());
  }
  const auto list = root.IsMap() ? root["targets"] : root;
  if (!list || !list.IsSequence()) throw std::invalid_argument("targets file must hold a list of targets");
  std::vector<RateTarget> out;
  for (const auto& n : list) {
    if (!n["map"] || !n["link"] || !n["stream"] || !n["rate"])
      throw std::invalid_argument("each target needs map, link, stream and rate");
    out.push_back({n["map"].as<std::string>(), n["link"].as<std::string>(), parse_stream(n["stream"].as<std::string>()),
                   n["rate"].as<double>()});
  }
  return out;
}

std::vector<RateTarget> load_targets(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read targets " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_targets(ss.str());
}

double invert_brightness(double rate, double transmittance_a, double transmittance_b, double pair_efficiency) {
  const double denom = pair_efficiency * transmittance_a * transmittance_b;
  if (!(denom > 0.0)) throw CalibrationError("zero transmission or efficiency; brightness is unbounded");
  if (!(rate >= 0.0)) throw CalibrationError("negative target rate implies negative brightness");
  return rate / denom;
}

double predicted_rate(const Scenario& scenario, const RateTarget& target, const PairStreamModel& sources) {
  const auto map = scenario.resolve_map(target.map);
  const auto link = find_link(map, target);
  const auto [pa, pb] = link_paths(map, scenario.plant, link);
  return expected_coincidences(sources.at(target.stream), pa, pb, scenario.detector(pa.destination),
                               scenario.detector(pb.destination), scenario.analysis.counting.window_s)
      .true_rate;
}

std::pair<double, double> link_node_loss(const Scenario& scenario, const RateTarget& target) {
  const auto map = scenario.resolve_map(target.map);
  const auto [pa, pb] = link_paths(map, scenario.plant, find_link(map, target));
  return {pa.node_loss_db(), pb.node_loss_db()};
}

bool CalibrationResult::within_tolerance() const {
  return std::none_of(residuals.begin(), residuals.end(), [](const auto& r) { return r.flagged; });
}

nlohmann::json CalibrationResult::to_json() const {
  nlohmann::json j;
  for (const auto& s : sources.streams)
    j["sources"][to_string(s.key)] = {{"brightness_pps", s.brightness_pps},
                                      {"foldback_excess_db", s.foldback_excess_db}};
  j["residuals"] = nlohmann::json::array();
  for (const auto& r : residuals)
    j["residuals"].push_back({{"map", r.target.map},
                              {"link", r.target.sites},
                              {"stream", to_string(r.target.stream)},
                              {"target", r.target.rate},
                              {"predicted", r.predicted},
                              {"relative", r.relative},
                              {"used_in_fit", r.used_in_fit},
                              {"flagged", r.flagged}});
  j["within_tolerance"] = within_tolerance();
  return j;
}

CalibrationResult calibrate_brightness(std::span<const RateTarget> fit_targets, const Scenario& scenario,
                                       std::span<const RateTarget> check_targets) {
  std::array<std::vector<Term>, kStreams.size()> groups;
  for (const auto& t : fit_targets) {
    if (!(t.rate > 0.0) || !std::isfinite(t.rate))
      throw CalibrationError("target " + describe(t) + " has rate " + std::to_string(t.rate) +
                             "; only a negative or zero brightness could produce it");
    const auto map = scenario.resolve_map(t.map);
    const auto link = find_link(map, t);
    const auto [pa, pb] = link_paths(map, scenario.plant, link);
    StreamModel unit{t.stream, 1.0, 0.0};
    const double base = expected_coincidences(unit, pa, pb, scenario.detector(pa.destination),
                                              scenario.detector(pb.destination), scenario.analysis.counting.window_s)
                            .true_rate;
    if (!(base > 0.0)) throw CalibrationError("link " + describe(t) + " has zero transmission");
    const bool fb = pa.node_traversals >= 2 || pb.node_traversals >= 2;
    groups[stream_index(t.stream)].push_back({std::log(base), fb, std::log(t.rate), t.rate});
  }

  CalibrationResult result;
  result.sources = scenario.sources;
  for (std::size_t k = 0; k < groups.size(); ++k) {
    const auto& g = groups[k];
    if (g.empty()) throw CalibrationError("targets do not cover stream " + to_string(kStreams[k]));
    auto& model = result.sources.streams[k];
    const bool any_fb = std::any_of(g.begin(), g.end(), [](const Term& t) { return t.foldback; });
    const bool any_sp = std::any_of(g.begin(), g.end(), [](const Term& t) { return !t.foldback; });
    if (any_fb && any_sp) {
      Eigen::Matrix2d m = Eigen::Matrix2d::Zero();
      Eigen::Vector2d v = Eigen::Vector2d::Zero();
      for (const auto& t : g) {
        Eigen::Vector2d row(1.0, t.foldback ? -kDbToNeper : 0.0);
        m += t.weight * row * row.transpose();
        v += t.weight * (t.log_rate - t.log_base) * row;
      }
      const Eigen::Vector2d sol = m.ldlt().solve(v);
      model.brightness_pps = std::exp(sol[0]);
      model.foldback_excess_db = sol[1];
      const double per_arm = scenario.plant.node.foldback_loss_db + sol[1] / 2.0;
      if (per_arm < scenario.plant.node.loss_min_db)
        throw CalibrationError("fold-back targets of " + to_string(kStreams[k]) + " imply a per-arm node loss of " +
                               std::to_string(per_arm) + " dB, below the node minimum of " +
                               std::to_string(scenario.plant.node.loss_min_db) + " dB");
    } else {
      double num = 0.0, den = 0.0;
      for (const auto& t : g) {
        const double excess = t.foldback ? model.foldback_excess_db * kDbToNeper : 0.0;
        num += t.weight * (t.log_rate - t.log_base + excess);
        den += t.weight;
      }
      model.brightness_pps = std::exp(num / den);
    }
  }

  auto add = [&](const RateTarget& t, bool used) {
    TargetResidual r{t, predicted_rate(scenario, t, result.sources), 0.0, used, false};
    r.relative = r.predicted / t.rate - 1.0;
    r.flagged = std::abs(r.relative) > 0.10;
    result.residuals.push_back(r);
  };
  for (const auto& t : fit_targets) add(t, true);
  for (const auto& t : check_targets) add(t, false);
  return result;
}

}  // namespace eprnet
