#include "hinmega/io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "hinmega/common.hpp"

namespace hinmega::io {

void BlockHeader::set(std::string key, std::string value) {
  for (auto& [k, v] : fields) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  fields.emplace_back(std::move(key), std::move(value));
}

const std::string* BlockHeader::find(std::string_view key) const {
  for (const auto& [k, v] : fields) {
    if (k == key) return &v;
  }
  return nullptr;
}

const std::string& BlockHeader::require(std::string_view key) const {
  if (const std::string* v = find(key)) return *v;
  throw InputError("block header missing field '" + std::string(key) + "'");
}

void write_block(std::ostream& out, const BlockHeader& header,
                 std::span<const double> payload) {
  out << "hinmega-block " << header.kind << " 1\n";
  for (const auto& [k, v] : header.fields) out << k << '\t' << v << '\n';
  out << "payload\t" << payload.size() << '\n';
  out << "end_header\n";
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(double)));
  if (!out) throw InputError("failed to write block payload");
}

void write_block_file(const std::filesystem::path& path, const BlockHeader& header,
                      std::span<const double> payload) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open for writing: " + path.string());
  write_block(out, header, payload);
}

BlockHeader read_block(std::istream& in, std::vector<double>& payload) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("empty block stream");
  std::istringstream magic(line);
  std::string tag, kind, version;
  magic >> tag >> kind >> version;
  if (tag != "hinmega-block" || version != "1")
    throw InputError("not a hinmega block (bad magic line)");

  BlockHeader header;
  header.kind = kind;
  std::size_t count = 0;
  bool have_count = false;
  while (std::getline(in, line)) {
    if (line == "end_header") break;
    const auto sep = line.find('\t');
    if (sep == std::string::npos)
      throw InputError("malformed block header line: " + line);
    std::string key = line.substr(0, sep);
    std::string value = line.substr(sep + 1);
    if (key == "payload") {
      count = static_cast<std::size_t>(std::stoull(value));
      have_count = true;
    } else {
      header.fields.emplace_back(std::move(key), std::move(value));
    }
  }
  if (!have_count) throw InputError("block header missing payload size");
  payload.resize(count);
  in.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (static_cast<std::size_t>(in.gcount()) != count * sizeof(double))
    throw InputError("truncated block payload");
  return header;
}

BlockHeader read_block_file(const std::filesystem::path& path,
                            std::vector<double>& payload) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open file: " + path.string());
  return read_block(in, payload);
}

std::vector<std::string> split(std::string_view text, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(delim, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(text.substr(start));
      break;
    }
    out.emplace_back(text.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

}  // namespace hinmega::io
