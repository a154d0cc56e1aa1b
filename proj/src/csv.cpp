#include "flowforge/csv.hpp"

#include <stdexcept>

namespace flowforge::csv {

void append_field(std::string& out, std::string_view field)
{
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) {
        out.append(field);
        return;
    }
    out.push_back('"');
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
}

std::string format_row(const std::vector<std::string>& fields)
{
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out.push_back(',');
        append_field(out, fields[i]);
    }
    out.push_back('\n');
    return out;
}

bool Reader::next(std::vector<std::string>& fields)
{
    fields.clear();
    int c = in_.get();
    if (c == std::char_traits<char>::eof()) return false;
    row_line_ = next_line_;

    std::string field;
    bool quoted = false;
    for (;; c = in_.get()) {
        if (c == std::char_traits<char>::eof()) {
            if (quoted) throw std::runtime_error("unterminated quoted field at line " + std::to_string(row_line_));
            fields.push_back(std::move(field));
            return true;
        }
        const char ch = static_cast<char>(c);
        if (quoted) {
            if (ch == '"') {
                if (in_.peek() == '"') {
                    in_.get();
                    field.push_back('"');
                } else {
                    quoted = false;
                }
            } else {
                if (ch == '\n') ++next_line_;
                field.push_back(ch);
            }
            continue;
        }
        if (ch == '"' && field.empty()) {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (ch == '\n') {
            ++next_line_;
            fields.push_back(std::move(field));
            return true;
        } else if (ch == '\r' && in_.peek() == '\n') {
            // CRLF: the LF ends the row on the next iteration.
        } else {
            field.push_back(ch);
        }
    }
}

}  // namespace flowforge::csv
