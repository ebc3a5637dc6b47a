#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kselect::csv {

// Comma-separated, '.' decimal separator, mandatory header row. Fields that
// contain a comma, quote or newline are double-quoted with "" escapes
// (kernel labels such as "CSR,TM" need this); numbers are never quoted.

struct Record {
    std::size_t line = 0; ///< 1-based line where the record starts
    std::vector<std::string> fields;
};

struct Document {
    Record header;
    std::vector<Record> rows;

    /// Index of the header column named `name`, if any.
    std::optional<std::size_t> column(std::string_view name) const;
};

/// Parses a whole document. Blank lines are skipped. Throws ParseError on an
/// unterminated quote, a missing header, or a row whose field count differs
/// from the header's.
Document parse(std::string_view text);

/// Renders one record, quoting fields as needed, terminated by '\n'.
std::string format_record(const std::vector<std::string>& fields);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_real(double value);

/// Strict decimal parse of a finite real; the whole field must be consumed.
std::optional<double> parse_real(std::string_view text);

/// Strict parse of a non-negative integer.
std::optional<std::uint64_t> parse_count(std::string_view text);

} // namespace kselect::csv
