#pragma once

// Minimal reader for the project's own unquoted CSV files.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace enshare::csv {

struct Table {
  std::string schema_name;  // from an optional leading "#schema,<name>,<version>" row
  int schema_version = 0;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::string source;  // file name, for error messages

  std::size_t column(std::string_view name) const;
};

std::vector<std::string> split(std::string_view line, char sep = ',');
Table read(const std::filesystem::path& path);

double to_double(const std::string& field, const Table& table, std::size_t row);
std::int64_t to_int(const std::string& field, const Table& table, std::size_t row);

}  // namespace enshare::csv
