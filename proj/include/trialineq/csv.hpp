#pragma once

#include <charconv>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "trialineq/error.hpp"

namespace trialineq::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers; // 1-based source line of each row
    char delimiter = ',';

    std::optional<std::size_t> column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        return std::nullopt;
    }

    std::size_t require_column(std::string_view name) const {
        if (auto c = column(name)) return *c;
        throw DataError("missing required column '" + std::string(name) + "'");
    }
};

namespace detail {

// RFC-4180 style field split; handles quoted fields and embedded delimiters.
inline std::vector<std::string> split_line(std::string_view line, char delim) {
    std::vector<std::string> out;
    std::string field;
    bool in_quotes = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"' && field.empty()) {
            in_quotes = true;
        } else if (c == delim) {
            out.push_back(std::move(field));
            field.clear();
        } else {
            field += c;
        }
    }
    out.push_back(std::move(field));
    return out;
}

inline char detect_delimiter(std::string_view header_line) {
    std::size_t commas = 0, tabs = 0;
    bool in_quotes = false;
    for (char c : header_line) {
        if (c == '"') in_quotes = !in_quotes;
        else if (!in_quotes && c == ',') ++commas;
        else if (!in_quotes && c == '\t') ++tabs;
    }
    return tabs > commas ? '\t' : ',';
}

inline void strip_cr(std::string& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
}

} // namespace detail

/// Reads a delimited table with a required header row. delimiter 0 means
/// auto-detect (comma vs tab) from the header line. Blank lines are skipped
/// but counted, so reported line numbers match the source file.
inline Table read(std::istream& in, char delimiter = '\0') {
    Table t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        detail::strip_cr(line);
        if (line.empty()) continue;
        if (t.header.empty()) {
            // strip UTF-8 BOM if present
            if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
            t.delimiter = delimiter == '\0' ? detail::detect_delimiter(line) : delimiter;
            t.header = detail::split_line(line, t.delimiter);
            continue;
        }
        t.rows.push_back(detail::split_line(line, t.delimiter));
        t.line_numbers.push_back(lineno);
    }
    if (t.header.empty()) throw DataError("empty input: no header row found");
    return t;
}

/// Shortest round-trip decimal form of a double; stable across runs, and
/// parse(format(x)) == x exactly so canonical emission is lossless.
inline std::string format_double(double v) {
    char buf[40];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
    // trim surrounding spaces
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    if (s.empty()) return std::nullopt;
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::optional<long> parse_int(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    if (s.empty()) return std::nullopt;
    long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::string quote_if_needed(std::string_view field, char delim) {
    const bool needs = field.find(delim) != std::string_view::npos ||
                       field.find('"') != std::string_view::npos ||
                       field.find('\n') != std::string_view::npos;
    if (!needs) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline void write_row(std::ostream& out, const std::vector<std::string>& fields, char delim = ',') {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out << delim;
        out << quote_if_needed(fields[i], delim);
    }
    out << '\n';
}

} // namespace trialineq::csv
