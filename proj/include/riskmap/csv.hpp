#pragma once

#include <string>
#include <vector>

#include "riskmap/common.hpp"

namespace riskmap::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;            // -1 if absent
  int require_column(const std::string& name, const std::string& file) const;
};

// Comma-separated, first line is the header. Fields are not quoted; the file
// formats in this project never embed commas.
Table read_csv(const std::string& path);
void write_csv(const std::string& path, const Table& table);

}  // namespace riskmap::csv
