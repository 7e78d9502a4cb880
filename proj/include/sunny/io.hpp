#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "sunny/errors.hpp"

namespace sunny {

inline std::string_view trim(std::string_view s) {
    const char* ws = " \t\r\n";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

/// Splits on a single character; fields are not trimmed.
inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(s.substr(start));
            break;
        }
        out.emplace_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

/// Splits on runs of spaces/tabs, dropping empty tokens.
inline std::vector<std::string> split_ws(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
        std::size_t start = i;
        while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
        if (i > start) out.emplace_back(s.substr(start, i - start));
    }
    return out;
}

inline std::optional<std::int64_t> try_parse_int(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::optional<double> try_parse_double(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::int64_t parse_int(std::string_view s, std::size_t line = 0) {
    auto v = try_parse_int(s);
    if (!v) throw ParseError("expected integer, got '" + std::string(s) + "'", line);
    return *v;
}

inline double parse_double(std::string_view s, std::size_t line = 0) {
    auto v = try_parse_double(s);
    if (!v) throw ParseError("expected number, got '" + std::string(s) + "'", line);
    return *v;
}

/// Shortest representation that round-trips through from_chars.
inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

/// [A-Za-z_][A-Za-z0-9_.-]*  — variable, solver and instance names.
inline bool is_identifier(std::string_view s) {
    if (s.empty()) return false;
    auto head = [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
    };
    auto tail = [&](char c) {
        return head(c) || (c >= '0' && c <= '9') || c == '.' || c == '-';
    };
    if (!head(s[0])) return false;
    for (char c : s.substr(1))
        if (!tail(c)) return false;
    return true;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file: " + path);
    out << content;
    if (!out) throw Error("write failed: " + path);
}

/// Splits text into lines; accepts both \n and \r\n endings.
inline std::vector<std::string> to_lines(std::string_view text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto pos = text.find('\n', start);
        if (pos == std::string_view::npos) {
            if (start < text.size()) out.emplace_back(text.substr(start));
            break;
        }
        std::string_view line = text.substr(start, pos - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        out.emplace_back(line);
        start = pos + 1;
    }
    return out;
}

}  // namespace sunny
