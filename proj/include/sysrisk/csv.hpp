#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sysrisk/error.hpp"

namespace sysrisk::csv {

// A parsed CSV document: header plus data rows, all as raw strings.
struct Table {
    std::string source;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Column index by name; throws ParseError naming the missing column.
    std::size_t column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw ParseError(source, 1, std::string(name), "missing required column");
    }
};

// RFC-4180 parser: quoted fields, doubled quotes, embedded separators and newlines, CRLF.
inline Table parse(std::string_view text, std::string source = "<memory>") {
    Table t;
    t.source = std::move(source);
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> rec;
    std::string field;
    bool in_quotes = false, field_started = false;
    std::size_t i = 0;
    if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xEF &&
        static_cast<unsigned char>(text[1]) == 0xBB && static_cast<unsigned char>(text[2]) == 0xBF)
        i = 3;
    auto end_record = [&] {
        const bool blank = rec.empty() && !field_started && field.empty();
        rec.push_back(std::move(field));
        field.clear();
        field_started = false;
        if (!blank) records.push_back(std::move(rec));
        rec.clear();
    };
    for (; i < text.size(); ++i) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        if (c == '"' && !field_started) {
            in_quotes = true;
            field_started = true;
        } else if (c == ',') {
            rec.push_back(std::move(field));
            field.clear();
            field_started = false;
        } else if (c == '\r') {
            if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
            end_record();
        } else if (c == '\n') {
            end_record();
        } else {
            field.push_back(c);
            field_started = true;
        }
    }
    if (in_quotes) throw ParseError(t.source, records.size() + 1, "", "unterminated quoted field");
    if (field_started || !rec.empty()) end_record();
    if (records.empty()) throw ParseError(t.source, 1, "", "empty file (header row required)");
    t.header = std::move(records.front());
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != t.header.size())
            throw ParseError(t.source, r + 1, "", "expected " + std::to_string(t.header.size()) +
                                                      " fields, found " + std::to_string(records[r].size()));
        t.rows.push_back(std::move(records[r]));
    }
    return t;
}

inline Table read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open input file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
}

// Strict float parse of a whole field. Empty fields are reported via `empty`.
inline double parse_double(const Table& t, std::size_t row, std::size_t col, bool allow_empty = false,
                           bool* empty = nullptr) {
    const std::string& s = t.rows[row][col];
    if (s.empty()) {
        if (allow_empty) {
            if (empty) *empty = true;
            return std::nan("");
        }
        throw ParseError(t.source, row + 2, t.header[col], "empty value");
    }
    if (empty) *empty = false;
    double v = 0;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    if (*b == '+') ++b;
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e || !std::isfinite(v))
        throw ParseError(t.source, row + 2, t.header[col], "not a finite number: '" + s + "'");
    return v;
}

// Shortest round-trip representation; deterministic across runs.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

inline std::string quote(std::string_view s) {
    if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

class Writer {
public:
    explicit Writer(std::ostream& os) : os_(os) {}

    template <class... Cells>
    void row(const Cells&... cells) {
        bool first = true;
        ((write_cell(cells, first)), ...);
        os_ << '\n';
    }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << quote(cells[i]);
        os_ << '\n';
    }

private:
    void sep(bool& first) {
        if (!first) os_ << ',';
        first = false;
    }
    void write_cell(const std::string& s, bool& first) { sep(first), os_ << quote(s); }
    void write_cell(const char* s, bool& first) { sep(first), os_ << quote(s); }
    void write_cell(double v, bool& first) { sep(first), os_ << format_double(v); }
    void write_cell(int v, bool& first) { sep(first), os_ << v; }
    void write_cell(long v, bool& first) { sep(first), os_ << v; }
    void write_cell(std::size_t v, bool& first) { sep(first), os_ << v; }

    std::ostream& os_;
};

}  // namespace sysrisk::csv
