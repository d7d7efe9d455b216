#include "annotruth/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include <fmt/core.h>

#include "annotruth/error.hpp"

namespace annotruth {

namespace {

std::string_view trim_cr(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

std::string locus(const CsvTable& table, const CsvRow& row) {
  return fmt::format("{}:{}", table.source.string(), row.line);
}

}  // namespace

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw DataError(
      fmt::format("{}: missing column '{}'", source.string(), name));
}

std::vector<std::string> split_fields(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    const auto piece = line.substr(
        start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    out.emplace_back(trim_cr(piece));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

CsvTable read_csv(const std::filesystem::path& path,
                  std::initializer_list<std::string_view> columns,
                  HeaderPolicy policy) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));

  const std::vector<std::string> expected(columns.begin(), columns.end());
  CsvTable table;
  table.source = path;
  bool header_seen = false;
  if (policy == HeaderPolicy::optional) table.header = expected;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim_cr(line);
    if (view.empty() || view.front() == '#') continue;
    auto fields = split_fields(view);
    if (!header_seen) {
      header_seen = true;
      if (policy == HeaderPolicy::any) {
        table.header = std::move(fields);
        continue;
      }
      if (fields == expected) {
        table.header = std::move(fields);
        continue;
      }
      if (policy == HeaderPolicy::mandatory) {
        throw DataError(fmt::format("{}:{}: expected header '{}', found '{}'",
                                    path.string(), line_no, join(expected, ","),
                                    std::string(view)));
      }
    }
    if (fields.size() != table.header.size()) {
      throw DataError(fmt::format("{}:{}: expected {} fields, found {}",
                                  path.string(), line_no, table.header.size(),
                                  fields.size()));
    }
    table.rows.push_back({line_no, std::move(fields)});
  }
  if (!header_seen && policy != HeaderPolicy::optional) {
    throw DataError(fmt::format("{}: missing header row", path.string()));
  }
  return table;
}

double parse_double(const CsvTable& table, const CsvRow& row, std::size_t col) {
  const std::string& s = row.fields.at(col);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size() ||
      !std::isfinite(value)) {
    throw DataError(fmt::format("{}: column '{}': '{}' is not a number",
                                locus(table, row), table.header.at(col), s));
  }
  return value;
}

long long parse_int(const CsvTable& table, const CsvRow& row, std::size_t col) {
  const std::string& s = row.fields.at(col);
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    throw DataError(fmt::format("{}: column '{}': '{}' is not an integer",
                                locus(table, row), table.header.at(col), s));
  }
  return value;
}

std::string format_double(double value) { return fmt::format("{}", value); }

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace annotruth
