#ifndef COGDIAG_CSV_HPP
#define COGDIAG_CSV_HPP

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace cogdiag::csv {

struct Row {
    std::size_t line = 0;  // 1-based line on which the row starts
    std::vector<std::string> fields;
};

/// Splits CSV text into rows. Handles quoted fields (with embedded commas,
/// doubled quotes and newlines), CRLF line endings and a leading UTF-8 BOM.
/// Lines that are entirely empty are skipped.
inline std::vector<Row> read(std::string_view text) {
    if (text.starts_with("\xEF\xBB\xBF")) {
        text.remove_prefix(3);
    }
    std::vector<Row> rows;
    Row current;
    std::string field;
    std::size_t line = 1;
    current.line = 1;
    bool in_quotes = false;
    bool row_has_content = false;

    auto end_row = [&] {
        if (row_has_content || !field.empty() || !current.fields.empty()) {
            current.fields.push_back(std::move(field));
            rows.push_back(std::move(current));
        }
        current = Row{};
        field.clear();
        row_has_content = false;
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
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                in_quotes = true;
                row_has_content = true;
                break;
            case ',':
                current.fields.push_back(std::move(field));
                field.clear();
                row_has_content = true;
                break;
            case '\r':
                break;
            case '\n':
                end_row();
                ++line;
                current.line = line;
                break;
            default:
                field.push_back(c);
                row_has_content = true;
        }
    }
    end_row();
    return rows;
}

inline std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) {
        return std::string(field);
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

inline std::string join(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out.push_back(',');
        out += escape(fields[i]);
    }
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

}  // namespace cogdiag::csv

#endif  // COGDIAG_CSV_HPP
