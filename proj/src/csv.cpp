#include "pgdcrnn/csv.hpp"

#include <charconv>
#include <fstream>

#include "pgdcrnn/error.hpp"

namespace pgdcrnn::csv {

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw_data("missing CSV column '" + std::string(name) + "'");
}

Row split_line(std::string_view line) {
  Row out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

Table read_file(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw_data("cannot open '" + path + "'");
  Table table;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    Row row = split_line(line);
    if (!have_header) {
      // Tolerate a UTF-8 byte order mark.
      if (row[0].size() >= 3 && row[0].compare(0, 3, "\xEF\xBB\xBF") == 0) row[0].erase(0, 3);
      table.header = std::move(row);
      have_header = true;
      continue;
    }
    if (row.size() != table.header.size()) {
      throw_data(path + ":" + std::to_string(lineno) + ": expected " +
                 std::to_string(table.header.size()) + " fields, got " +
                 std::to_string(row.size()));
    }
    table.rows.push_back(std::move(row));
    table.lines.push_back(lineno);
  }
  if (!have_header) throw_data("'" + path + "' is empty");
  return table;
}

double parse_double(std::string_view text, const std::string &context) {
  double v = 0.0;
  const auto *end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw_data(context + ": not a number: '" + std::string(text) + "'");
  }
  return v;
}

long long parse_int(std::string_view text, const std::string &context) {
  long long v = 0;
  const auto *end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw_data(context + ": not an integer: '" + std::string(text) + "'");
  }
  return v;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace pgdcrnn::csv
