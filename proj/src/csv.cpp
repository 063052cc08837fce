#include "enshare/csv.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>

#include <fmt/core.h>

#include "enshare/domain.hpp"

namespace enshare::csv {

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::size_t Table::column(std::string_view name) const {
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (header[k] == name) return k;
  }
  throw Error(fmt::format("{}: missing column '{}'", source, name));
}

Table read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(fmt::format("cannot open '{}'", path.string()));
  Table t;
  t.source = path.filename().string();
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!have_header && line.rfind("#schema", 0) == 0) {
      const auto parts = split(line);
      if (parts.size() != 3) throw Error(fmt::format("{}: malformed schema row", t.source));
      t.schema_name = parts[1];
      t.schema_version = std::atoi(parts[2].c_str());
      continue;
    }
    if (!have_header) {
      t.header = split(line);
      have_header = true;
      continue;
    }
    auto fields = split(line);
    if (fields.size() != t.header.size()) {
      throw Error(fmt::format("{}: row {} has {} fields, expected {}", t.source, t.rows.size() + 1,
                              fields.size(), t.header.size()));
    }
    t.rows.push_back(std::move(fields));
  }
  if (!have_header) throw Error(fmt::format("{}: no header row", t.source));
  return t;
}

double to_double(const std::string& field, const Table& table, std::size_t row) {
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (field.empty() || end != field.c_str() + field.size()) {
    throw Error(fmt::format("{}: row {}: '{}' is not a number", table.source, row + 1, field));
  }
  return v;
}

std::int64_t to_int(const std::string& field, const Table& table, std::size_t row) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw Error(fmt::format("{}: row {}: '{}' is not an integer", table.source, row + 1, field));
  }
  return v;
}

}  // namespace enshare::csv
