#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "multiexit/common/errors.hpp"

namespace multiexit {

// Round-trippable float formatting (%.17g) so rewritten artifacts stay
// bit-identical across reruns.
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Every CSV artifact starts with a schema-version comment followed by a
// header row.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header, int schema_version = 1);
  void row(const std::vector<std::string>& cells);
  void close();

 private:
  std::ofstream out_;
  std::size_t width_ = 0;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// Reads a CSV written by CsvWriter (or a plain header+rows file). Lines
// starting with '#' are skipped.
CsvTable read_csv(const std::string& path);

}  // namespace multiexit
