#include <doctest.h>

#include <nlohmann/json.hpp>
#include <random>

#include "eprnet/control_plane.hpp"

using namespace eprnet;
using doctest::Approx;

namespace {

using Bytes = std::vector<std::uint8_t>;

// Bitwise reference: poly 0x1021, init 0xFFFF, no reflection, no final xor.
std::uint16_t crc_reference(const Bytes& data) {
  std::uint16_t crc = 0xFFFF;
  for (auto byte : data) {
    crc ^= static_cast<std::uint16_t>(byte << 8);
    for (int i = 0; i < 8; ++i) crc = (crc & 0x8000) ? static_cast<std::uint16_t>((crc << 1) ^ 0x1021) : crc << 1;
  }
  return crc;
}

Bytes frame_of(std::uint8_t type, const Bytes& payload, std::uint8_t version = 1) {
  Bytes f{0x51, 0x4E, version, 0, 0, 0, 9, type};
  for (auto b : payload) f.push_back(b);
  const auto crc = crc_reference(f);
  f.push_back(static_cast<std::uint8_t>(crc >> 8));
  f.push_back(static_cast<std::uint8_t>(crc & 0xFF));
  return f;
}

FrameErrorCode error_of(const Bytes& f) {
  try {
    decode_instruction(f);
  } catch (const FrameError& e) {
    return e.code();
  }
  FAIL("frame decoded");
  return FrameErrorCode::Truncated;
}

Bytes hex(std::string_view s) {
  Bytes out;
  for (std::size_t i = 0; i < s.size(); i += 2)
    out.push_back(static_cast<std::uint8_t>(std::stoi(std::string(s.substr(i, 2)), nullptr, 16)));
  return out;
}

AMCInstruction random_instruction(std::mt19937_64& rng) {
  AMCInstruction in;
  in.sequence = static_cast<std::uint32_t>(rng());
  if (rng() % 2) {
    in.payload = kBuiltinMaps[rng() % 6];
    return in;
  }
  for (;;) {
    DistributionMap m;
    for (std::size_t i = 0; i < 5; ++i)
      if (rng() % 4) m.assignment[i] = kEdgeSites[rng() % 4];
    m.epr2_active = m.assignment[4].has_value();
    if (!validate_map(m).ok()) continue;
    if (rng() % 3) {
      std::string label(1 + rng() % 19, 'x');
      for (auto& c : label) c = static_cast<char>('a' + rng() % 26);
      m.id = label;
    }
    in.payload = m;
    return in;
  }
}

}  // namespace

TEST_CASE("CRC-16/CCITT-FALSE check value and reference agreement") {
  const std::string check = "123456789";
  const Bytes b(check.begin(), check.end());
  CHECK(crc16_ccitt_false(b) == 0x29B1);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    Bytes d(rng() % 80);
    for (auto& x : d) x = static_cast<std::uint8_t>(rng());
    REQUIRE(crc16_ccitt_false(d) == crc_reference(d));
  }
}

TEST_CASE("golden frames") {
  CHECK(encode_instruction({1, MapId::I}) == hex("514e010000000101013bf6"));
  CHECK(encode_instruction({2, MapId::II}) == hex("514e0100000002010252c5"));
  const auto iv = hex("514e0100000004010480a3");
  CHECK(encode_instruction({4, MapId::IV}) == iv);
  const auto decoded = decode_instruction(iv);
  CHECK(decoded.sequence == 4);
  CHECK(decoded.resolve() == builtin_map(MapId::IV));
}

TEST_CASE("round-trip over 10000 random instructions") {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 10000; ++i) {
    const auto in = random_instruction(rng);
    const auto out = decode_instruction(encode_instruction(in));
    REQUIRE(out == in);
    REQUIRE(out.resolve() == in.resolve());
  }
}

TEST_CASE("any single bit flip in the payload or checksum is rejected") {
  std::mt19937_64 rng(3);
  for (int n = 0; n < 50; ++n) {
    const auto f = encode_instruction(random_instruction(rng));
    for (std::size_t byte = 7; byte < f.size(); ++byte)
      for (int bit = 0; bit < 8; ++bit) {
        auto g = f;
        g[byte] ^= static_cast<std::uint8_t>(1u << bit);
        REQUIRE(error_of(g) == FrameErrorCode::CrcMismatch);
      }
  }
}

TEST_CASE("decode errors carry distinct codes") {
  auto good = encode_instruction({7, MapId::III});
  CHECK(error_of(Bytes(good.begin(), good.begin() + 5)) == FrameErrorCode::Truncated);
  auto magic = good;
  magic[0] = 0x00;
  CHECK(error_of(magic) == FrameErrorCode::BadMagic);
  CHECK(error_of(frame_of(0x01, {3}, 2)) == FrameErrorCode::UnsupportedVersion);
  CHECK(error_of(frame_of(0x07, {3})) == FrameErrorCode::UnknownPayloadType);
  CHECK(error_of(frame_of(0x01, {9})) == FrameErrorCode::MalformedPayload);
  // Explicit payload: s1.C -> A with its partner unassigned.
  CHECK(error_of(frame_of(0x02, {0, 1, 0, 0, 0})) == FrameErrorCode::InvalidMap);
  CHECK(error_of(frame_of(0x02, Bytes(70, 0))) == FrameErrorCode::OversizedPayload);
  CHECK(frame_of(0x01, {3}) == encode_instruction({9, MapId::III}));
}

TEST_CASE("encoder rejects invalid maps and oversized payloads") {
  DistributionMap dangling;
  dangling.assign({Source::EPR1, Stream::S1, Band::C}, Site::A);
  try {
    encode_instruction({1, dangling});
    FAIL("expected rejection");
  } catch (const FrameError& e) {
    CHECK(e.code() == FrameErrorCode::InvalidMap);
  }
  auto big = builtin_map(MapId::IV);
  big.id = std::string(60, 'L');
  try {
    encode_instruction({1, big});
    FAIL("expected rejection");
  } catch (const FrameError& e) {
    CHECK(e.code() == FrameErrorCode::OversizedPayload);
  }
  big.id = std::string(49, 'L');
  CHECK(decode_instruction(encode_instruction({1, big})).resolve() == big);
}

TEST_CASE("Raman noise is linear in power and length") {
  RamanModel m;
  CHECK(raman_noise_rate(m, 12.8, Band::C) == Approx(200.0 * 12.8));
  m.launch_power_mw = 0.0;
  CHECK(raman_noise_rate(m, 12.8, Band::C) == 0.0);
  RamanModel one, two;
  two.launch_power_mw = 2.0;
  for (Band b : {Band::O, Band::C, Band::L}) {
    CHECK(raman_noise_rate(two, 7.0, b) == Approx(2.0 * raman_noise_rate(one, 7.0, b)));
    CHECK(raman_noise_rate(one, 14.0, b) == Approx(2.0 * raman_noise_rate(one, 7.0, b)));
  }
  CHECK(raman_noise_rate(one, 12.8, Band::C) >= 10.0 * 100.0);
  RamanModel neg;
  neg.launch_power_mw = -1.0;
  CHECK_THROWS_AS(neg.check(), std::invalid_argument);
}

TEST_CASE("AMC impact scales with the gate duty") {
  const PlantConfig plant;
  const RamanModel raman;
  const std::vector<double> sends{0.0};
  const auto gated = gated_schedule(sends, 1.6e-3);
  CHECK(gated.active_windows.size() == 1);
  CHECK(gated.active_at(1e-3));
  CHECK_FALSE(gated.active_at(2e-3));
  const auto g = amc_impact(gated, raman, plant, 10.0);
  const auto c = amc_impact({AmcMode::Continuous, {}}, raman, plant, 10.0);
  const auto o = amc_impact({AmcMode::Off, {}}, raman, plant, 10.0);
  for (Band b : {Band::O, Band::C, Band::L}) {
    CHECK(g.at(b) == Approx(c.at(b) * 1.6e-4));
    CHECK(o.at(b) == 0.0);
  }
  std::vector<double> many;
  for (int k = 0; k < 6; ++k) many.push_back(10.0 * k);
  const auto cycle = amc_impact(gated_schedule(many, 1.6e-3), raman, plant, 60.0);
  CHECK(cycle.at(Band::C) <= c.at(Band::C) * (6 * 1.6e-3 / 60.0) * (1 + 1e-12));
}

TEST_CASE("AMC impact rejects overlapping or out-of-range windows") {
  const PlantConfig plant;
  GatingSchedule s{AmcMode::Gated, {{0.0, 1.6e-3}, {1e-3, 1.6e-3}}};
  CHECK_THROWS_AS(amc_impact(s, RamanModel{}, plant, 10.0), std::invalid_argument);
  GatingSchedule late{AmcMode::Gated, {{9.999, 1.6e-3}}};
  CHECK_THROWS_AS(amc_impact(late, RamanModel{}, plant, 10.0), std::invalid_argument);
}

TEST_CASE("AMC modes and instruction log lines") {
  for (auto m : {AmcMode::Off, AmcMode::Gated, AmcMode::Continuous}) CHECK(parse_amc_mode(to_string(m)) == m);
  CHECK_THROWS_AS(parse_amc_mode("sometimes"), std::invalid_argument);
  const auto j = nlohmann::json::parse(to_json_line({1.5, 3, "IV", "applied"}));
  CHECK(j["time"] == 1.5);
  CHECK(j["sequence"] == 3);
  CHECK(j["map"] == "IV");
  CHECK(j["outcome"] == "applied");
}
