#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace backfire::csv {

struct Record {
    std::size_t line = 0;  ///< 1-based physical line on which the record starts
    std::vector<std::string> fields;
};

/// RFC 4180 reader: quoted fields, doubled quotes, embedded newlines, CRLF.
/// A leading UTF-8 byte-order mark is skipped. Blank lines are ignored.
std::vector<Record> parse(std::string_view text, char delimiter = ',');

/// Quote a field if it contains the delimiter, a quote, or a line break.
std::string escape(std::string_view field, char delimiter = ',');

/// Shortest round-trip representation of a double.
std::string format_double(double v);

}  // namespace backfire::csv
