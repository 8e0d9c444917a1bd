#pragma once

// Shortest round-trip decimal formatting and small CSV helpers.

#include <array>
#include <charconv>
#include <fstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "fluxlase/error.hpp"

namespace fluxlase::io {

/// Shortest decimal string that parses back to exactly `v`.
inline std::string format_double(double v) {
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (res.ec != std::errc{}) throw Error("format_double: conversion failed");
    return std::string(buf.data(), res.ptr);
}

inline double parse_double(std::string_view s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw Error("parse_double: not a number: '" + std::string(s) + "'");
    return v;
}

/// Opens a file for writing and reports the path on failure.
inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    return out;
}

inline void finish_output(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out) throw Error("write to '" + path + "' failed");
}

class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header)
        : path_(path), out_(open_output(path)) {
        row_strings(header);
    }

    void row(const std::vector<double>& values) {
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) out_ << ',';
            out_ << format_double(values[i]);
        }
        out_ << '\n';
    }

    void row_strings(const std::vector<std::string>& values) {
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) out_ << ',';
            out_ << values[i];
        }
        out_ << '\n';
    }

    void close() { finish_output(out_, path_); }

private:
    std::string path_;
    std::ofstream out_;
};

/// Splits one CSV line on commas (no quoting; our files never need it).
inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        cells.emplace_back(line.substr(start, comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return cells;
}

}  // namespace fluxlase::io
