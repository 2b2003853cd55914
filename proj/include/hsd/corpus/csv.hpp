#pragma once

#include "hsd/core/error.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace hsd::corpus {

struct CsvRecord {
    std::size_t line = 0;  // 1-based physical line where the record starts
    std::vector<std::string> fields;
};

// RFC 4180 reader: comma separated, double-quote quoting with "" escapes,
// CRLF or LF record ends, quoted fields may span lines. A leading UTF-8 BOM
// is skipped. Empty trailing lines are ignored.
inline std::vector<CsvRecord> parse_csv(std::string_view text) {
    if (text.substr(0, 3) == "\xEF\xBB\xBF") {
        text.remove_prefix(3);
    }
    std::vector<CsvRecord> records;
    CsvRecord current;
    std::string field;
    std::size_t line = 1;
    current.line = line;
    bool in_quotes = false;
    bool field_started = false;
    bool quoted_field = false;

    const auto end_field = [&] {
        current.fields.push_back(std::move(field));
        field.clear();
        field_started = false;
        quoted_field = false;
    };
    const auto end_record = [&] {
        end_field();
        if (!(current.fields.size() == 1 && current.fields[0].empty())) {
            records.push_back(std::move(current));
        }
        current = CsvRecord{};
        current.line = line;
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
                if (field_started && !quoted_field) {
                    throw ParseError("stray quote inside unquoted field at line " + std::to_string(line));
                }
                in_quotes = true;
                field_started = true;
                quoted_field = true;
                break;
            case ',':
                end_field();
                break;
            case '\r':
                if (i + 1 < text.size() && text[i + 1] == '\n') {
                    ++i;
                }
                ++line;
                end_record();
                break;
            case '\n':
                ++line;
                end_record();
                break;
            default:
                if (quoted_field) {
                    throw ParseError("text after closing quote at line " + std::to_string(line));
                }
                field_started = true;
                field.push_back(c);
        }
    }
    if (in_quotes) {
        throw ParseError("unterminated quoted field starting at line " + std::to_string(current.line));
    }
    if (field_started || !current.fields.empty()) {
        end_record();
    }
    return records;
}

inline std::string csv_escape(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) {
        return std::string(field);
    }
    std::string out = "\"";
    for (const char c : field) {
        if (c == '"') {
            out += "\"\"";
        } else {
            out += c;
        }
    }
    out += '"';
    return out;
}

}  // namespace hsd::corpus
