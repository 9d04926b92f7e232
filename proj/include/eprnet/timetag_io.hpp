#pragma once

// Timetag export/import: CSV and a length-prefixed binary record format.
// Both layouts are described in docs/formats.md.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "eprnet/photon_stats.hpp"

namespace eprnet {

void write_timetags_csv(std::ostream& os, const std::vector<TimetagStream>& streams);
std::vector<TimetagStream> read_timetags_csv(std::istream& is);

std::vector<std::uint8_t> encode_timetags_binary(const std::vector<TimetagStream>& streams);
std::vector<TimetagStream> decode_timetags_binary(const std::vector<std::uint8_t>& bytes);

void save_timetags(const std::filesystem::path& path, const std::vector<TimetagStream>& streams);
std::vector<TimetagStream> load_timetags(const std::filesystem::path& path);

}  // namespace eprnet
