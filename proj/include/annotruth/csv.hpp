#pragma once

#include <cstddef>
#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace annotruth {

// Minimal comma-separated tables. Fields never contain commas, quotes or
// newlines, so no quoting is supported. Lines starting with `#` are comments
// (artifact provenance headers) and blank lines are ignored.

enum class HeaderPolicy { mandatory, optional, any };

struct CsvRow {
  std::size_t line = 0;  // 1-based line number in the source file
  std::vector<std::string> fields;
};

struct CsvTable {
  std::filesystem::path source;
  std::vector<std::string> header;
  std::vector<CsvRow> rows;

  // Index of a column in the header; throws DataError when absent.
  std::size_t column(std::string_view name) const;
};

std::vector<std::string> split_fields(std::string_view line, char sep = ',');

// Parses `path`. With `mandatory`, the first non-comment line must equal
// `columns` exactly; with `optional`, a header equal to `columns` is skipped
// if present; with `any`, the first line is taken as the header and
// `columns` is ignored. Every data row must have as many fields as the
// header. Errors are DataError carrying `file:line`.
CsvTable read_csv(const std::filesystem::path& path,
                  std::initializer_list<std::string_view> columns,
                  HeaderPolicy policy = HeaderPolicy::mandatory);

// Strict numeric parsing of one field; errors name the file, line and column.
double parse_double(const CsvTable& table, const CsvRow& row, std::size_t col);
long long parse_int(const CsvTable& table, const CsvRow& row, std::size_t col);

// Shortest representation that round-trips exactly.
std::string format_double(double value);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace annotruth
