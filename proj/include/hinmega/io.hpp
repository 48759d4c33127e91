#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace hinmega::io {

// Shared on-disk container for dense float payloads: a short text header
// (kind, key/value fields) followed by raw row-major float64.
//
//   hinmega-block <kind> 1
//   <key>\t<value>
//   ...
//   end_header
//   <payload doubles, native little-endian>
//
// Values may contain tabs (used for id lists); keys may not.
struct BlockHeader {
  std::string kind;
  std::vector<std::pair<std::string, std::string>> fields;

  void set(std::string key, std::string value);
  const std::string* find(std::string_view key) const;
  const std::string& require(std::string_view key) const;  // throws InputError
};

void write_block(std::ostream& out, const BlockHeader& header,
                 std::span<const double> payload);
void write_block_file(const std::filesystem::path& path, const BlockHeader& header,
                      std::span<const double> payload);

BlockHeader read_block(std::istream& in, std::vector<double>& payload);
BlockHeader read_block_file(const std::filesystem::path& path,
                            std::vector<double>& payload);

// Split a string on a delimiter; no trimming, empty fields preserved.
std::vector<std::string> split(std::string_view text, char delim);

std::string read_text_file(const std::filesystem::path& path);

// Fixed-format float text used everywhere a double is printed to a file, so
// identical runs produce identical bytes.
std::string format_double(double value);

}  // namespace hinmega::io
