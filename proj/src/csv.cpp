#include "kselect/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>

#include "kselect/error.hpp"

namespace kselect::csv {

std::optional<std::size_t> Document::column(std::string_view name) const
{
    for (std::size_t i = 0; i < header.fields.size(); ++i) {
        if (header.fields[i] == name) {
            return i;
        }
    }
    return std::nullopt;
}

namespace {

bool is_blank(const Record& r)
{
    return r.fields.size() == 1 && r.fields.front().empty();
}

} // namespace

Document parse(std::string_view text)
{
    std::vector<Record> records;
    Record current;
    std::string field;
    std::size_t line = 1;
    current.line = 1;
    bool in_quotes = false;
    bool field_was_quoted = false;

    auto end_record = [&] {
        current.fields.push_back(std::move(field));
        field.clear();
        if (!is_blank(current)) {
            records.push_back(std::move(current));
        }
        current = Record{};
        field_was_quoted = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') {
                    ++line;
                }
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
        case '"':
            if (!field.empty() || field_was_quoted) {
                throw ParseError("unexpected quote inside unquoted field", line);
            }
            in_quotes = true;
            field_was_quoted = true;
            break;
        case ',':
            current.fields.push_back(std::move(field));
            field.clear();
            field_was_quoted = false;
            break;
        case '\r':
            break;
        case '\n':
            end_record();
            ++line;
            current.line = line;
            break;
        default:
            if (field_was_quoted) {
                throw ParseError("text after closing quote", line);
            }
            field.push_back(c);
        }
    }
    if (in_quotes) {
        throw ParseError("unterminated quoted field", current.line);
    }
    if (!field.empty() || !current.fields.empty() || field_was_quoted) {
        end_record();
    }

    if (records.empty()) {
        throw ParseError("missing header row", 1);
    }
    Document doc;
    doc.header = std::move(records.front());
    for (std::size_t i = 1; i < records.size(); ++i) {
        if (records[i].fields.size() != doc.header.fields.size()) {
            throw ParseError("expected " + std::to_string(doc.header.fields.size()) + " fields, found " +
                                 std::to_string(records[i].fields.size()),
                             records[i].line);
        }
        doc.rows.push_back(std::move(records[i]));
    }
    return doc;
}

std::string format_record(const std::vector<std::string>& fields)
{
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i > 0) {
            out.push_back(',');
        }
        const std::string& f = fields[i];
        if (f.find_first_of(",\"\n\r") == std::string::npos) {
            out += f;
            continue;
        }
        out.push_back('"');
        for (char c : f) {
            if (c == '"') {
                out.push_back('"');
            }
            out.push_back(c);
        }
        out.push_back('"');
    }
    out.push_back('\n');
    return out;
}

std::string format_real(double value)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

std::optional<double> parse_real(std::string_view text)
{
    if (text.empty()) {
        return std::nullopt;
    }
    if (text.front() == '+') {
        text.remove_prefix(1);
    }
    double value = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size() || !std::isfinite(value)) {
        return std::nullopt;
    }
    return value;
}

std::optional<std::uint64_t> parse_count(std::string_view text)
{
    std::uint64_t value = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        return std::nullopt;
    }
    return value;
}

} // namespace kselect::csv
