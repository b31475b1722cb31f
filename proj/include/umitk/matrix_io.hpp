#pragma once

#include "umitk/common.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace umitk {

struct NamedMatrix {
    Matrix values;                         // vertices x subjects
    std::vector<std::string> subject_ids;  // one per column
};

namespace detail {

inline double parse_double(const std::string& tok, const std::string& context) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    require(end != tok.c_str() && end != nullptr && *end == '\0',
            "cannot parse number '" + tok + "' in " + context);
    return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

// CSV feature format: header line of subject ids, then one row of values per
// vertex. Values are written with %.17g so the CSV and binary loaders agree
// bit-exactly after a round trip.

inline NamedMatrix load_matrix_csv(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open feature CSV: " + path);
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "feature CSV empty: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    NamedMatrix result;
    result.subject_ids = detail::split_csv_line(line);
    const Index n = static_cast<Index>(result.subject_ids.size());
    require(n > 0, "feature CSV has no columns: " + path);
    std::vector<double> data;
    Index rows = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto toks = detail::split_csv_line(line);
        require(static_cast<Index>(toks.size()) == n,
                "feature CSV row " + std::to_string(rows) + " has " +
                    std::to_string(toks.size()) + " fields, expected " + std::to_string(n));
        for (const auto& t : toks)
            data.push_back(detail::parse_double(t, path + " row " + std::to_string(rows)));
        ++rows;
    }
    require(rows > 0, "feature CSV has no data rows: " + path);
    result.values.resize(rows, n);
    for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < n; ++c) result.values(r, c) = data[static_cast<std::size_t>(r * n + c)];
    return result;
}

inline void save_matrix_csv(const NamedMatrix& m, const std::string& path) {
    require(static_cast<Index>(m.subject_ids.size()) == m.values.cols(),
            "subject id count does not match matrix columns");
    std::ofstream out(path);
    require(out.good(), "cannot write feature CSV: " + path);
    for (Index c = 0; c < m.values.cols(); ++c)
        out << (c ? "," : "") << m.subject_ids[static_cast<std::size_t>(c)];
    out << "\n";
    for (Index r = 0; r < m.values.rows(); ++r) {
        for (Index c = 0; c < m.values.cols(); ++c)
            out << (c ? "," : "") << detail::format_double(m.values(r, c));
        out << "\n";
    }
    require(out.good(), "write failed: " + path);
}

// Binary feature format for large matrices: 8-byte magic "UMITKB1\n",
// uint64 rows, uint64 cols (little endian), then rows*cols doubles
// column-major. Subject ids ride in a sidecar "<path>.ids" text file.

constexpr char kMatrixMagic[8] = {'U', 'M', 'I', 'T', 'K', 'B', '1', '\n'};

inline void save_matrix_bin(const NamedMatrix& m, const std::string& path) {
    require(static_cast<Index>(m.subject_ids.size()) == m.values.cols(),
            "subject id count does not match matrix columns");
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "cannot write feature binary: " + path);
    out.write(kMatrixMagic, 8);
    const std::uint64_t r = static_cast<std::uint64_t>(m.values.rows());
    const std::uint64_t c = static_cast<std::uint64_t>(m.values.cols());
    out.write(reinterpret_cast<const char*>(&r), 8);
    out.write(reinterpret_cast<const char*>(&c), 8);
    out.write(reinterpret_cast<const char*>(m.values.data()),
              static_cast<std::streamsize>(sizeof(double) * r * c));
    require(out.good(), "write failed: " + path);
    std::ofstream ids(path + ".ids");
    require(ids.good(), "cannot write id sidecar: " + path + ".ids");
    for (const auto& id : m.subject_ids) ids << id << "\n";
    require(ids.good(), "write failed: " + path + ".ids");
}

inline NamedMatrix load_matrix_bin(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open feature binary: " + path);
    char magic[8];
    in.read(magic, 8);
    require(in.good() && std::memcmp(magic, kMatrixMagic, 8) == 0,
            "bad magic in feature binary: " + path);
    std::uint64_t r = 0, c = 0;
    in.read(reinterpret_cast<char*>(&r), 8);
    in.read(reinterpret_cast<char*>(&c), 8);
    require(in.good() && r > 0 && c > 0 && r < (1ull << 32) && c < (1ull << 32),
            "bad dimensions in feature binary: " + path);
    NamedMatrix m;
    m.values.resize(static_cast<Index>(r), static_cast<Index>(c));
    in.read(reinterpret_cast<char*>(m.values.data()),
            static_cast<std::streamsize>(sizeof(double) * r * c));
    require(in.good(), "feature binary truncated: " + path);
    std::ifstream ids(path + ".ids");
    if (ids.good()) {
        std::string line;
        while (std::getline(ids, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            m.subject_ids.push_back(line);
        }
        while (!m.subject_ids.empty() && m.subject_ids.back().empty()) m.subject_ids.pop_back();
    }
    if (m.subject_ids.empty())
        for (std::uint64_t i = 0; i < c; ++i) m.subject_ids.push_back("col" + std::to_string(i));
    require(m.subject_ids.size() == c, "id sidecar length does not match columns: " + path);
    return m;
}

inline bool has_suffix(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

/// Dispatch on extension: ".bin" is binary, anything else CSV.
inline NamedMatrix load_matrix(const std::string& path) {
    return has_suffix(path, ".bin") ? load_matrix_bin(path) : load_matrix_csv(path);
}

inline void save_matrix(const NamedMatrix& m, const std::string& path) {
    if (has_suffix(path, ".bin"))
        save_matrix_bin(m, path);
    else
        save_matrix_csv(m, path);
}

}  // namespace umitk
