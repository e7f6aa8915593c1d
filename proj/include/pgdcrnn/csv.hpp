#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace pgdcrnn::csv {

using Row = std::vector<std::string>;

/// Parsed CSV file: header plus data rows. Quoting is not supported; the
/// formats read here never need it.
struct Table {
  Row header;
  std::vector<Row> rows;
  /// 1-based line number in the source file for each row, for diagnostics.
  std::vector<std::size_t> lines;

  /// Column index for `name`; throws a data error if absent.
  std::size_t column(std::string_view name) const;
};

Row split_line(std::string_view line);

/// Reads a CSV file. Blank lines are skipped; a trailing '\r' is stripped.
/// Every row must have as many fields as the header.
Table read_file(const std::string &path);

/// Parses a double; throws a data error naming `context` on failure.
double parse_double(std::string_view text, const std::string &context);
long long parse_int(std::string_view text, const std::string &context);

/// Formats a double so that parsing it back yields the same bits.
std::string format_double(double v);

}  // namespace pgdcrnn::csv
