#include "csv.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "sta/errors.hpp"

namespace sta::cli {

std::string format_number(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  if (table.columns.size() != table.header.size()) throw ConfigError("CSV header and column count differ");
  const std::size_t rows = table.rows();
  for (const auto& col : table.columns) {
    if (col.size() != rows) throw ConfigError("CSV columns have different lengths");
  }
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  for (std::size_t j = 0; j < table.header.size(); ++j) out << (j ? "," : "") << table.header[j];
  out << '\n';
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < table.columns.size(); ++j) out << (j ? "," : "") << format_number(table.columns[j][i]);
    out << '\n';
  }
  if (!out) throw ConfigError("write failed for " + path.string());
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty CSV file " + path.string());
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) table.header.push_back(cell);
  }
  table.columns.resize(table.header.size());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t j = 0;
    while (std::getline(ss, cell, ',')) {
      if (j >= table.columns.size()) throw ConfigError("CSV row wider than its header in " + path.string());
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str()) throw ConfigError("non-numeric CSV cell '" + cell + "' in " + path.string());
      table.columns[j++].push_back(v);
    }
    if (j != table.columns.size()) throw ConfigError("short CSV row in " + path.string());
  }
  return table;
}

}  // namespace sta::cli
