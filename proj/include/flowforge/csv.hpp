#pragma once

#include <cstddef>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace flowforge::csv {

/// Appends `field` to `out`, quoting per RFC 4180 when it contains a comma,
/// double quote, CR or LF.
void append_field(std::string& out, std::string_view field);

/// Joins fields with commas and terminates the row with LF.
std::string format_row(const std::vector<std::string>& fields);

/// RFC 4180 reader. Accepts LF or CRLF row endings and quoted fields that
/// span lines.
class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    /// Reads the next row into `fields`. Returns false at end of input.
    bool next(std::vector<std::string>& fields);

    /// 1-based line number where the last returned row started.
    std::size_t line() const { return row_line_; }

private:
    std::istream& in_;
    std::size_t next_line_ = 1;
    std::size_t row_line_ = 0;
};

}  // namespace flowforge::csv
