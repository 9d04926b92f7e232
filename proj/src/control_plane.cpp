#include "eprnet/control_plane.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>

namespace eprnet {
namespace {

enum : std::uint8_t { kPayloadBuiltin = 0x01, kPayloadExplicit = 0x02 };
constexpr std::size_t kHeaderBytes = 8;  // magic(2) version(1) sequence(4) type(1)

std::vector<std::uint8_t> encode_payload(const AMCInstruction& instr) {
  std::vector<std::uint8_t> p;
  if (const auto* id = std::get_if<MapId>(&instr.payload)) {
    p.push_back(static_cast<std::uint8_t>(*id));
    return p;
  }
  const auto& map = std::get<DistributionMap>(instr.payload);
  p.push_back(map.epr2_active ? 1 : 0);
  std::uint8_t n = 0;
  for (const auto& s : map.assignment) n += s ? 1 : 0;
  p.push_back(n);
  for (std::size_t i = 0; i < map.assignment.size(); ++i) {
    if (!map.assignment[i]) continue;
    p.push_back(static_cast<std::uint8_t>(i));
    p.push_back(static_cast<std::uint8_t>(*map.assignment[i]));
  }
  const std::string label = map.id.value_or("");
  if (label.size() > 255) throw FrameError(FrameErrorCode::OversizedPayload, "map label too long");
  p.push_back(static_cast<std::uint8_t>(label.size()));
  p.insert(p.end(), label.begin(), label.end());
  return p;
}

DistributionMap decode_explicit(std::span<const std::uint8_t> p) {
  auto malformed = [] { return FrameError(FrameErrorCode::MalformedPayload, "malformed explicit-map payload"); };
  if (p.size() < 3) throw malformed();
  DistributionMap map;
  if (p[0] > 1) throw malformed();
  const std::size_t n = p[1];
  if (n > kRoutableAssets.size() || p.size() < 2 + 2 * n + 1) throw malformed();
  for (std::size_t k = 0; k < n; ++k) {
    const auto asset = p[2 + 2 * k], site = p[3 + 2 * k];
    if (asset >= kRoutableAssets.size() || site > static_cast<std::uint8_t>(Site::E)) throw malformed();
    if (map.assignment[asset]) throw malformed();
    map.assignment[asset] = static_cast<Site>(site);
  }
  map.epr2_active = p[0] & 1;
  const std::size_t label_at = 2 + 2 * n;
  const std::size_t len = p[label_at];
  if (p.size() != label_at + 1 + len) throw malformed();
  if (len) map.id = std::string(p.begin() + static_cast<long>(label_at + 1), p.end());
  return map;
}

}  // namespace

std::uint16_t crc16_ccitt_false(std::span<const std::uint8_t> bytes) {
  std::uint16_t crc = 0xFFFF;
  for (auto b : bytes) {
    crc ^= static_cast<std::uint16_t>(b << 8);
    for (int i = 0; i < 8; ++i) crc = (crc & 0x8000) ? static_cast<std::uint16_t>((crc << 1) ^ 0x1021) : static_cast<std::uint16_t>(crc << 1);
  }
  return crc;
}

DistributionMap AMCInstruction::resolve() const {
  if (const auto* id = std::get_if<MapId>(&payload)) return builtin_map(*id);
  return std::get<DistributionMap>(payload);
}

std::string_view to_string(FrameErrorCode c) {
  switch (c) {
    case FrameErrorCode::Truncated: return "truncated";
    case FrameErrorCode::BadMagic: return "bad-magic";
    case FrameErrorCode::UnsupportedVersion: return "unsupported-version";
    case FrameErrorCode::CrcMismatch: return "crc-mismatch";
    case FrameErrorCode::UnknownPayloadType: return "unknown-payload-type";
    case FrameErrorCode::MalformedPayload: return "malformed-payload";
    case FrameErrorCode::InvalidMap: return "invalid-map";
    case FrameErrorCode::OversizedPayload: return "oversized-payload";
  }
  return "?";
}

FrameError::FrameError(FrameErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

std::vector<std::uint8_t> encode_instruction(const AMCInstruction& instr) {
  try {
    require_valid(instr.resolve());
  } catch (const InvalidMapError& e) {
    throw FrameError(FrameErrorCode::InvalidMap, e.what());
  }
  auto payload = encode_payload(instr);
  if (payload.size() > kMaxPayloadBytes)
    throw FrameError(FrameErrorCode::OversizedPayload,
                     "payload of " + std::to_string(payload.size()) + " bytes exceeds " +
                         std::to_string(kMaxPayloadBytes));
  std::vector<std::uint8_t> f{kFrameMagic0, kFrameMagic1, kFrameVersion};
  for (int shift = 24; shift >= 0; shift -= 8) f.push_back(static_cast<std::uint8_t>(instr.sequence >> shift));
  f.push_back(std::holds_alternative<MapId>(instr.payload) ? kPayloadBuiltin : kPayloadExplicit);
  f.insert(f.end(), payload.begin(), payload.end());
  const auto crc = crc16_ccitt_false(f);
  f.push_back(static_cast<std::uint8_t>(crc >> 8));
  f.push_back(static_cast<std::uint8_t>(crc & 0xff));
  return f;
}

AMCInstruction decode_instruction(std::span<const std::uint8_t> frame) {
  if (frame.size() < kHeaderBytes + 2) throw FrameError(FrameErrorCode::Truncated, "frame too short");
  if (frame[0] != kFrameMagic0 || frame[1] != kFrameMagic1) throw FrameError(FrameErrorCode::BadMagic, "bad magic");
  if (frame[2] != kFrameVersion)
    throw FrameError(FrameErrorCode::UnsupportedVersion, "version " + std::to_string(frame[2]));
  const auto body = frame.first(frame.size() - 2);
  const std::uint16_t wire_crc = static_cast<std::uint16_t>((frame[frame.size() - 2] << 8) | frame.back());
  if (crc16_ccitt_false(body) != wire_crc) throw FrameError(FrameErrorCode::CrcMismatch, "checksum mismatch");

  AMCInstruction instr;
  instr.sequence = (std::uint32_t{frame[3]} << 24) | (std::uint32_t{frame[4]} << 16) | (std::uint32_t{frame[5]} << 8) |
                   std::uint32_t{frame[6]};
  const auto payload = body.subspan(kHeaderBytes);
  if (payload.size() > kMaxPayloadBytes) throw FrameError(FrameErrorCode::OversizedPayload, "payload too large");
  switch (frame[7]) {
    case kPayloadBuiltin: {
      if (payload.size() != 1 || payload[0] < 1 || payload[0] > 6)
        throw FrameError(FrameErrorCode::MalformedPayload, "bad built-in map number");
      instr.payload = static_cast<MapId>(payload[0]);
      break;
    }
    case kPayloadExplicit: instr.payload = decode_explicit(payload); break;
    default: throw FrameError(FrameErrorCode::UnknownPayloadType, "payload type " + std::to_string(frame[7]));
  }
  try {
    require_valid(instr.resolve());
  } catch (const InvalidMapError& e) {
    throw FrameError(FrameErrorCode::InvalidMap, e.what());
  }
  return instr;
}

std::string_view to_string(AmcMode m) {
  switch (m) {
    case AmcMode::Off: return "off";
    case AmcMode::Gated: return "gated";
    case AmcMode::Continuous: return "continuous";
  }
  return "?";
}

AmcMode parse_amc_mode(std::string_view text) {
  for (auto m : {AmcMode::Off, AmcMode::Gated, AmcMode::Continuous})
    if (to_string(m) == text) return m;
  throw std::invalid_argument("unknown AMC mode '" + std::string(text) + "'");
}

bool GatingSchedule::active_at(double t) const {
  switch (mode) {
    case AmcMode::Off: return false;
    case AmcMode::Continuous: return true;
    case AmcMode::Gated: break;
  }
  return std::any_of(active_windows.begin(), active_windows.end(),
                     [t](const GateWindow& w) { return t >= w.start_s && t < w.end_s(); });
}

GatingSchedule gated_schedule(std::span<const double> send_times_s, double duration_on_wire_s) {
  GatingSchedule s{AmcMode::Gated, {}};
  for (double t : send_times_s) s.active_windows.push_back({t, duration_on_wire_s});
  return s;
}

std::map<Band, double> default_raman_coefficients() {
  return {{Band::O, 20.0}, {Band::C, 200.0}, {Band::L, 150.0}, {Band::NIR900, 0.0}};
}

void RamanModel::check() const {
  if (!(launch_power_mw >= 0.0)) throw std::invalid_argument("AMC launch power must be >= 0");
  for (const auto& [band, c] : coefficient)
    if (!(c >= 0.0))
      throw std::invalid_argument("Raman coefficient for " + std::string(to_string(band)) + " must be >= 0");
}

double raman_noise_rate(const RamanModel& model, double copropagation_km, Band band) {
  if (!(copropagation_km >= 0.0)) throw std::invalid_argument("co-propagation length must be >= 0");
  model.check();
  auto it = model.coefficient.find(band);
  const double coeff = it == model.coefficient.end() ? 0.0 : it->second;
  return coeff * model.launch_power_mw * copropagation_km;
}

std::map<Band, double> amc_impact(const GatingSchedule& schedule, const RamanModel& model, const PlantConfig& plant,
                                  double acquisition_s) {
  if (!(acquisition_s > 0.0)) throw std::invalid_argument("acquisition must be positive");
  double duty = 0.0;
  switch (schedule.mode) {
    case AmcMode::Off: duty = 0.0; break;
    case AmcMode::Continuous: duty = 1.0; break;
    case AmcMode::Gated: {
      auto w = schedule.active_windows;
      std::sort(w.begin(), w.end(), [](const auto& a, const auto& b) { return a.start_s < b.start_s; });
      double on = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i].start_s < 0.0 || w[i].end_s() > acquisition_s + 1e-12)
          throw std::invalid_argument("gate window outside the acquisition span");
        if (i && w[i].start_s < w[i - 1].end_s()) throw std::invalid_argument("overlapping AMC gate windows");
        on += w[i].duration_s;
      }
      duty = on / acquisition_s;
      break;
    }
  }
  std::map<Band, double> out;
  for (Band b : {Band::O, Band::C, Band::L})
    out[b] = duty * raman_noise_rate(model, plant.feeder.length_km, b);
  return out;
}

std::string to_json_line(const InstructionLogEntry& e) {
  nlohmann::json j{{"time", e.time_s}, {"sequence", e.sequence}, {"map", e.map}, {"outcome", e.outcome}};
  return j.dump();
}

}  // namespace eprnet
