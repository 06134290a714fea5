#include "multiexit/common/csv.hpp"

#include <sstream>

#include "multiexit/common/hash.hpp"

namespace multiexit {

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header, int schema_version)
    : out_(path), width_(header.size()) {
  if (!out_) {
    throw ParseError("cannot open for writing: " + path);
  }
  out_ << "# schema-version: " << schema_version << "\n";
  for (std::size_t i = 0; i < header.size(); ++i) {
    out_ << header[i] << (i + 1 < header.size() ? "," : "\n");
  }
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != width_) {
    throw ContractError("csv row width mismatch");
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    out_ << cells[i] << (i + 1 < cells.size() ? "," : "\n");
  }
}

void CsvWriter::close() { out_.close(); }

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open: " + path);
  }
  CsvTable table;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (!have_header) {
      table.header = std::move(cells);
      have_header = true;
    } else {
      table.rows.push_back(std::move(cells));
    }
  }
  return table;
}

}  // namespace multiexit
