#pragma once

// Auxiliary management and control (AMC) channel: instruction frames,
// temporal gating and the co-propagation Raman background.
//
// Frame layout (big-endian):
//   0x51 0x4E | version (1) | sequence (4) | payload type (1) | payload (N) | CRC-16/CCITT-FALSE (2)
// The CRC covers every preceding byte. Payload types:
//   0x01 built-in map: one byte, map number 1..6
//   0x02 explicit map: flags (bit0 = EPR2 active) | count | count x (asset index, site index)
//        | label length | label bytes

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "eprnet/core_model.hpp"
#include "eprnet/optical_plant.hpp"

namespace eprnet {

inline constexpr std::uint8_t kFrameMagic0 = 0x51;
inline constexpr std::uint8_t kFrameMagic1 = 0x4E;
inline constexpr std::uint8_t kFrameVersion = 1;
inline constexpr std::size_t kMaxPayloadBytes = 64;
inline constexpr double kDefaultInstructionDuration = 1.6e-3;

std::uint16_t crc16_ccitt_false(std::span<const std::uint8_t> bytes);

struct AMCInstruction {
  std::uint32_t sequence = 0;
  std::variant<MapId, DistributionMap> payload = MapId::I;
  double duration_on_wire_s = kDefaultInstructionDuration;

  DistributionMap resolve() const;
  bool operator==(const AMCInstruction& o) const { return sequence == o.sequence && payload == o.payload; }
};

enum class FrameErrorCode : std::uint8_t {
  Truncated,
  BadMagic,
  UnsupportedVersion,
  CrcMismatch,
  UnknownPayloadType,
  MalformedPayload,
  InvalidMap,
  OversizedPayload,
};
std::string_view to_string(FrameErrorCode c);

class FrameError : public std::runtime_error {
 public:
  FrameError(FrameErrorCode code, const std::string& what);
  FrameErrorCode code() const { return code_; }

 private:
  FrameErrorCode code_;
};

std::vector<std::uint8_t> encode_instruction(const AMCInstruction& instr);
AMCInstruction decode_instruction(std::span<const std::uint8_t> frame);

enum class AmcMode : std::uint8_t { Off, Gated, Continuous };
std::string_view to_string(AmcMode m);
AmcMode parse_amc_mode(std::string_view text);

struct GateWindow {
  double start_s = 0.0;
  double duration_s = 0.0;
  double end_s() const { return start_s + duration_s; }
};

struct GatingSchedule {
  AmcMode mode = AmcMode::Gated;
  std::vector<GateWindow> active_windows;

  bool active_at(double t) const;
};

/// One window per instruction transmission, nothing else.
GatingSchedule gated_schedule(std::span<const double> send_times_s, double duration_on_wire_s);

/// Synthetic S-band pump coefficients, counts/(s km mW) at the detector.
std::map<Band, double> default_raman_coefficients();

struct RamanModel {
  std::map<Band, double> coefficient = default_raman_coefficients();
  double launch_power_mw = 1.0;

  void check() const;
};

double raman_noise_rate(const RamanModel& model, double copropagation_km, Band band);

/// Time-averaged added background per quantum band over the acquisition.
std::map<Band, double> amc_impact(const GatingSchedule& schedule, const RamanModel& model, const PlantConfig& plant,
                                  double acquisition_s);

struct InstructionLogEntry {
  double time_s = 0.0;
  std::uint32_t sequence = 0;
  std::string map;
  std::string outcome;
};
std::string to_json_line(const InstructionLogEntry& e);

}  // namespace eprnet
