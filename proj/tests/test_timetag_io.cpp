#include <doctest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "eprnet/timetag_io.hpp"

using namespace eprnet;

namespace {

std::vector<TimetagStream> sample(bool labels) {
  std::mt19937_64 rng(17);
  std::exponential_distribution<double> gap(5e3);
  std::vector<TimetagStream> out;
  const std::pair<const char*, Site> ids[] = {{"A.C", Site::A}, {"C.L", Site::C}, {"E.NIR900", Site::E}};
  for (const auto& [id, site] : ids) {
    TimetagStream s{id, site, 0.0, 2.0, {}, {}};
    for (double t = gap(rng); t < 2.0; t += gap(rng)) {
      s.timestamps.push_back(t);
      if (labels) s.labels.push_back(rng() % 2 ? "H" : "V45");
    }
    out.push_back(std::move(s));
  }
  return out;
}

void check_equal(const std::vector<TimetagStream>& a, const std::vector<TimetagStream>& b) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].detector == b[i].detector);
    CHECK(a[i].site == b[i].site);
    CHECK(a[i].start_s == b[i].start_s);
    CHECK(a[i].end_s == b[i].end_s);
    CHECK(a[i].timestamps == b[i].timestamps);
    CHECK(a[i].labels == b[i].labels);
  }
}

}  // namespace

TEST_CASE("CSV round-trip is exact") {
  for (bool labels : {false, true}) {
    const auto in = sample(labels);
    std::stringstream ss;
    write_timetags_csv(ss, in);
    check_equal(in, read_timetags_csv(ss));
  }
}

TEST_CASE("binary round-trip is exact") {
  for (bool labels : {false, true}) {
    const auto in = sample(labels);
    check_equal(in, decode_timetags_binary(encode_timetags_binary(in)));
  }
}

TEST_CASE("file round-trip picks the format from the extension") {
  const auto dir = std::filesystem::temp_directory_path() / "eprnet_timetag_test";
  std::filesystem::create_directories(dir);
  const auto in = sample(true);
  for (const char* name : {"tags.csv", "tags.bin"}) {
    save_timetags(dir / name, in);
    check_equal(in, load_timetags(dir / name));
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("malformed timetag input is rejected") {
  std::stringstream bad_header("t,d,s\n1,A.C,A,\n");
  CHECK_THROWS_AS(read_timetags_csv(bad_header), std::invalid_argument);
  std::stringstream bad_row("timestamp_s,detector,site,analyzer_label\n1.0,A.C\n");
  CHECK_THROWS_AS(read_timetags_csv(bad_row), std::invalid_argument);
  auto bytes = encode_timetags_binary(sample(false));
  bytes.resize(bytes.size() - 3);
  CHECK_THROWS_AS(decode_timetags_binary(bytes), std::invalid_argument);
  CHECK_THROWS_AS(decode_timetags_binary({1, 2, 3}), std::invalid_argument);
}
