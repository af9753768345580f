#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace rlsched {

// Plain comma-separated table with a header row; cells never contain commas.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const;  // throws ParseError when absent
  const std::string& cell(std::size_t row, std::string_view name) const;
  double number(std::size_t row, std::string_view name) const;
};

void write_csv_table(std::ostream& out, const CsvTable& table);
CsvTable read_csv_table(std::istream& in);

// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

}  // namespace rlsched
