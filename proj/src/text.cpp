#include "techinfer/text.hpp"

#include <array>
#include <charconv>
#include <cmath>

namespace techinfer::text {

std::optional<std::vector<std::string>> split_csv_record(std::string_view line) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    bool field_was_quoted = false;
    for (std::size_t pos = 0; pos < line.size(); ++pos) {
        const char ch = line[pos];
        if (quoted) {
            if (ch == '"') {
                if (pos + 1 < line.size() && line[pos + 1] == '"') {
                    current.push_back('"');
                    ++pos;
                } else {
                    quoted = false;
                }
            } else {
                current.push_back(ch);
            }
        } else if (ch == '"' && current.empty() && !field_was_quoted) {
            quoted = true;
            field_was_quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(current));
            current.clear();
            field_was_quoted = false;
        } else {
            current.push_back(ch);
        }
    }
    if (quoted) {
        return std::nullopt;
    }
    fields.push_back(std::move(current));
    return fields;
}

std::string csv_field(std::string_view value) {
    const bool needs_quotes = value.find_first_of(",\"\n\r") != std::string_view::npos ||
                              (!value.empty() && (value.front() == ' ' || value.back() == ' '));
    if (!needs_quotes) {
        return std::string(value);
    }
    std::string out = "\"";
    for (char ch : value) {
        if (ch == '"') {
            out.push_back('"');
        }
        out.push_back(ch);
    }
    out.push_back('"');
    return out;
}

std::string format_double(double value) {
    if (!std::isfinite(value)) {
        return std::isnan(value) ? "nan" : (value > 0 ? "inf" : "-inf");
    }
    std::array<char, 64> buffer{};
    auto [end, ec] = std::to_chars(buffer.data(), buffer.data() + buffer.size(), value);
    std::string out(buffer.data(), end);
    if (out.find_first_of(".e") == std::string::npos) {
        out += ".0";
    }
    return out;
}

std::string_view normalize_line(std::string_view line, bool first) {
    if (!line.empty() && line.back() == '\r') {
        line.remove_suffix(1);
    }
    if (first && line.size() >= 3 && line.substr(0, 3) == "\xEF\xBB\xBF") {
        line.remove_prefix(3);
    }
    return line;
}

std::string_view trim(std::string_view value) {
    const auto begin = value.find_first_not_of(" \t");
    if (begin == std::string_view::npos) {
        return {};
    }
    const auto end = value.find_last_not_of(" \t");
    return value.substr(begin, end - begin + 1);
}

std::vector<std::string> split_list(std::string_view value) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= value.size()) {
        auto comma = value.find(',', start);
        if (comma == std::string_view::npos) {
            comma = value.size();
        }
        auto piece = trim(value.substr(start, comma - start));
        if (!piece.empty()) {
            out.emplace_back(piece);
        }
        start = comma + 1;
    }
    return out;
}

}  // namespace techinfer::text
