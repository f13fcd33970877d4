#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace mmsi::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column, or -1.
  int column(std::string_view name) const;
};

// Comma separated, optional double quotes, first line is the header. Every row
// must have as many fields as the header.
Table read(std::istream& in);

std::vector<std::string> split_line(std::string_view line);

std::string trim(std::string_view s);

// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);

}  // namespace mmsi::csv
