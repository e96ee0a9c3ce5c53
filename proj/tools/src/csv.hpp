#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace sta::cli {

/// Numeric table stored column-wise.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
};

/// Writes a header line and one row per index; numbers use 17 significant
/// digits so that reading the file back reproduces every value bit for bit.
void write_csv(const std::filesystem::path& path, const CsvTable& table);

/// Parses a file written by write_csv (all cells numeric).
CsvTable read_csv(const std::filesystem::path& path);

/// "%.17g" rendering of one value.
std::string format_number(double value);

}  // namespace sta::cli
