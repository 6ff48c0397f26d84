#ifndef TECHINFER_TEXT_HPP
#define TECHINFER_TEXT_HPP

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace techinfer::text {

/// Splits one CSV record (RFC 4180 quoting, no embedded newlines).
/// Returns nullopt on an unterminated quote.
std::optional<std::vector<std::string>> split_csv_record(std::string_view line);

/// Quotes a field only when it contains a comma, quote or whitespace edge.
std::string csv_field(std::string_view value);

/// Shortest decimal that round-trips to the same double; always carries a
/// decimal point or exponent ("0.0", "1.5", "1e+300").
std::string format_double(double value);

/// Strips a trailing '\r' (CRLF input) and a leading UTF-8 BOM when `first`.
std::string_view normalize_line(std::string_view line, bool first);

std::string_view trim(std::string_view value);

/// Comma-separated list, empty items dropped.
std::vector<std::string> split_list(std::string_view value);

}  // namespace techinfer::text

#endif
