#include "eprnet/timetag_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace eprnet {
namespace {

constexpr std::array<std::uint8_t, 4> kBinaryMagic{'E', 'P', 'T', 'T'};
constexpr std::uint8_t kBinaryVersion = 1;

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::invalid_argument("bad number '" + std::string(s) + "' in timetag file");
  return v;
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

void put_str(std::vector<std::uint8_t>& out, const std::string& s) {
  if (s.size() > 255) throw std::invalid_argument("timetag string field longer than 255 bytes");
  out.push_back(static_cast<std::uint8_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& b, std::size_t pos, std::size_t end) : b_(b), pos_(pos), end_(end) {}
  std::uint8_t u8() {
    need(1);
    return b_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(b_[pos_] | (b_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(bits);
  }
  std::string str() {
    auto n = u8();
    need(n);
    std::string s(b_.begin() + static_cast<long>(pos_), b_.begin() + static_cast<long>(pos_ + n));
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == end_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > end_) throw std::invalid_argument("truncated timetag record");
  }
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_, end_;
};

// Collects tags per detector in first-seen order.
struct Collector {
  std::vector<TimetagStream> streams;
  std::map<std::string, std::size_t> index;

  TimetagStream& get(const std::string& detector, Site site) {
    auto [it, inserted] = index.try_emplace(detector, streams.size());
    if (inserted) {
      streams.push_back({});
      streams.back().detector = detector;
      streams.back().site = site;
    }
    return streams[it->second];
  }
};

void finish(Collector& c, double start, double end, bool have_span) {
  for (auto& s : c.streams) {
    bool any_label = std::any_of(s.labels.begin(), s.labels.end(), [](const std::string& l) { return !l.empty(); });
    if (!any_label) s.labels.clear();
    if (have_span) {
      s.start_s = start;
      s.end_s = end;
    } else if (!s.timestamps.empty()) {
      s.start_s = s.timestamps.front();
      s.end_s = s.timestamps.back();
    }
  }
}

}  // namespace

void write_timetags_csv(std::ostream& os, const std::vector<TimetagStream>& streams) {
  double start = 0.0, end = 0.0;
  if (!streams.empty()) {
    start = streams.front().start_s;
    end = streams.front().end_s;
    for (const auto& s : streams) {
      start = std::min(start, s.start_s);
      end = std::max(end, s.end_s);
    }
  }
  os << "# span_s," << format_double(start) << "," << format_double(end) << "\n";
  os << "timestamp_s,detector,site,analyzer_label\n";
  for (const auto& s : streams) {
    for (std::size_t i = 0; i < s.timestamps.size(); ++i) {
      os << format_double(s.timestamps[i]) << "," << s.detector << "," << to_string(s.site) << ","
         << (s.labels.empty() ? std::string() : s.labels[i]) << "\n";
    }
  }
}

std::vector<TimetagStream> read_timetags_csv(std::istream& is) {
  Collector c;
  double start = 0.0, end = 0.0;
  bool have_span = false, header_seen = false;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.rfind("# span_s,", 0) == 0) {
      auto rest = std::string_view(line).substr(9);
      auto comma = rest.find(',');
      start = parse_double(rest.substr(0, comma));
      end = parse_double(rest.substr(comma + 1));
      have_span = true;
      continue;
    }
    if (line[0] == '#') continue;
    if (!header_seen) {
      if (line != "timestamp_s,detector,site,analyzer_label")
        throw std::invalid_argument("unexpected timetag CSV header: " + line);
      header_seen = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (line.back() == ',') f.emplace_back();
    if (f.size() != 4) throw std::invalid_argument("timetag CSV row needs 4 fields: " + line);
    auto& s = c.get(f[1], parse_site(f[2]));
    s.timestamps.push_back(parse_double(f[0]));
    s.labels.push_back(f[3]);
  }
  finish(c, start, end, have_span);
  return std::move(c.streams);
}

std::vector<std::uint8_t> encode_timetags_binary(const std::vector<TimetagStream>& streams) {
  std::vector<std::uint8_t> out(kBinaryMagic.begin(), kBinaryMagic.end());
  out.push_back(kBinaryVersion);
  double start = streams.empty() ? 0.0 : streams.front().start_s;
  double end = streams.empty() ? 0.0 : streams.front().end_s;
  for (const auto& s : streams) {
    start = std::min(start, s.start_s);
    end = std::max(end, s.end_s);
  }
  put_f64(out, start);
  put_f64(out, end);
  std::vector<std::uint8_t> body;
  for (const auto& s : streams) {
    for (std::size_t i = 0; i < s.timestamps.size(); ++i) {
      body.clear();
      put_f64(body, s.timestamps[i]);
      body.push_back(static_cast<std::uint8_t>(s.site));
      put_str(body, s.detector);
      put_str(body, s.labels.empty() ? std::string() : s.labels[i]);
      put_u16(out, static_cast<std::uint16_t>(body.size()));
      out.insert(out.end(), body.begin(), body.end());
    }
  }
  return out;
}

std::vector<TimetagStream> decode_timetags_binary(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 21 || !std::equal(kBinaryMagic.begin(), kBinaryMagic.end(), bytes.begin()))
    throw std::invalid_argument("not a binary timetag file");
  if (bytes[4] != kBinaryVersion) throw std::invalid_argument("unsupported binary timetag version");
  Reader head(bytes, 5, bytes.size());
  const double start = head.f64(), end = head.f64();
  Collector c;
  std::size_t pos = head.pos();
  while (pos < bytes.size()) {
    Reader len(bytes, pos, bytes.size());
    const std::size_t n = len.u16();
    Reader rec(bytes, len.pos(), len.pos() + n);
    if (len.pos() + n > bytes.size()) throw std::invalid_argument("truncated timetag record");
    const double t = rec.f64();
    const auto site = rec.u8();
    if (site > static_cast<std::uint8_t>(Site::E)) throw std::invalid_argument("bad site in timetag record");
    auto detector = rec.str();
    auto label = rec.str();
    if (!rec.done()) throw std::invalid_argument("timetag record length mismatch");
    auto& s = c.get(detector, static_cast<Site>(site));
    s.timestamps.push_back(t);
    s.labels.push_back(std::move(label));
    pos = len.pos() + n;
  }
  finish(c, start, end, true);
  return std::move(c.streams);
}

void save_timetags(const std::filesystem::path& path, const std::vector<TimetagStream>& streams) {
  if (path.extension() == ".csv") {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    write_timetags_csv(os, streams);
    return;
  }
  auto bytes = encode_timetags_binary(streams);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<TimetagStream> load_timetags(const std::filesystem::path& path) {
  if (path.extension() == ".csv") {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path.string());
    return read_timetags_csv(is);
  }
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_timetags_binary(bytes);
}

}  // namespace eprnet
