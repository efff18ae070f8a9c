#include "riskmap/csv.hpp"

#include <fstream>

namespace riskmap::csv {

int Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

int Table::require_column(const std::string& name, const std::string& file) const {
  const int c = column(name);
  if (c < 0) throw Error("missing column '" + name + "' in " + file);
  return c;
}

Table read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw Error("empty file " + path);
  for (auto& h : split(line, ',')) t.header.push_back(trim(h));
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split(line, ',');
    if (fields.size() != t.header.size())
      throw Error(path + ":" + std::to_string(lineno) + ": expected " +
                  std::to_string(t.header.size()) + " fields, got " +
                  std::to_string(fields.size()));
    for (auto& f : fields) f = trim(f);
    t.rows.push_back(std::move(fields));
  }
  return t;
}

void write_csv(const std::string& path, const Table& table) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << join(table.header, ",") << "\n";
  for (const auto& row : table.rows) out << join(row, ",") << "\n";
  if (!out) throw Error("write failed for " + path);
}

}  // namespace riskmap::csv
