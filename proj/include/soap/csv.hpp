#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace soap::csv {

/// Quotes the field (RFC 4180) when it holds a comma, quote or newline.
std::string field(std::string_view s);

/// Shortest text that parses back to exactly `v`.
std::string number(double v);

std::vector<std::string> parse_line(std::string_view line);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name; throws kFormatError if absent.
  std::size_t column(std::string_view name) const;
};

/// Parses a whole CSV document (first line is the header). Throws
/// kFormatError on rows whose width differs from the header.
Table parse(std::string_view text, const std::string& source);
Table read(const std::string& path);

double to_double(const std::string& s, const std::string& context);

}  // namespace soap::csv
