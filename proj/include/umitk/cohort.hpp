#pragma once

#include "umitk/common.hpp"
#include "umitk/matrix_io.hpp"
#include "umitk/mesh.hpp"

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace umitk {

enum class Group { AD, MCI, CU };
enum class Amyloid { positive, negative };
enum class Timepoint { baseline, m24 };

inline std::string to_string(Group g) {
    switch (g) {
        case Group::AD: return "AD";
        case Group::MCI: return "MCI";
        default: return "CU";
    }
}
inline std::string to_string(Amyloid a) { return a == Amyloid::positive ? "positive" : "negative"; }
inline std::string to_string(Timepoint t) { return t == Timepoint::baseline ? "baseline" : "m24"; }

inline Group parse_group(const std::string& s) {
    if (s == "AD") return Group::AD;
    if (s == "MCI") return Group::MCI;
    if (s == "CU") return Group::CU;
    throw InputError("unknown group '" + s + "' (expected AD, MCI or CU)");
}
inline Amyloid parse_amyloid(const std::string& s) {
    if (s == "positive" || s == "pos" || s == "+") return Amyloid::positive;
    if (s == "negative" || s == "neg" || s == "-") return Amyloid::negative;
    throw InputError("unknown amyloid status '" + s + "'");
}
inline Timepoint parse_timepoint(const std::string& s) {
    if (s == "baseline" || s == "bl") return Timepoint::baseline;
    if (s == "m24") return Timepoint::m24;
    throw InputError("unknown timepoint '" + s + "' (expected baseline or m24)");
}

struct CohortRow {
    std::string subject_id;
    Group group = Group::CU;
    Amyloid amyloid = Amyloid::negative;
    Timepoint timepoint = Timepoint::baseline;
    std::map<std::string, double> scores;  // MMSE, CDR-SB, ADAS-Cog11, AVLT-Total
    int feature_column = -1;
};

struct CohortTable {
    std::vector<CohortRow> rows;

    std::vector<int> columns_of(Group g, Timepoint t) const {
        std::vector<int> cols;
        for (const auto& r : rows)
            if (r.group == g && r.timepoint == t) cols.push_back(r.feature_column);
        return cols;
    }
    std::vector<const CohortRow*> rows_of(Group g, Timepoint t) const {
        std::vector<const CohortRow*> out;
        for (const auto& r : rows)
            if (r.group == g && r.timepoint == t) out.push_back(&r);
        return out;
    }
};

static const std::vector<std::string> kScoreNames = {"MMSE", "CDR-SB", "ADAS-Cog11", "AVLT-Total"};

/// Cohort CSV: header "subject_id,group,amyloid,timepoint,column[,<scores...>]";
/// score fields may be empty. (subject_id, timepoint) must be unique and the
/// column references must cover the feature matrix exactly once each.
inline CohortTable load_cohort_csv(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open cohort CSV: " + path);
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "cohort CSV empty: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = detail::split_csv_line(line);
    require(header.size() >= 5 && header[0] == "subject_id" && header[1] == "group" &&
                header[2] == "amyloid" && header[3] == "timepoint" && header[4] == "column",
            "cohort CSV header must start with subject_id,group,amyloid,timepoint,column");
    CohortTable table;
    std::set<std::pair<std::string, std::string>> seen;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = detail::split_csv_line(line);
        require(f.size() == header.size(), "cohort CSV line " + std::to_string(lineno) + " has " +
                                               std::to_string(f.size()) + " fields, expected " +
                                               std::to_string(header.size()));
        CohortRow row;
        row.subject_id = f[0];
        row.group = parse_group(f[1]);
        row.amyloid = parse_amyloid(f[2]);
        row.timepoint = parse_timepoint(f[3]);
        row.feature_column = static_cast<int>(
            detail::parse_double(f[4], path + " line " + std::to_string(lineno)));
        for (std::size_t c = 5; c < header.size(); ++c)
            if (!f[c].empty())
                row.scores[header[c]] =
                    detail::parse_double(f[c], path + " line " + std::to_string(lineno));
        const auto key = std::make_pair(row.subject_id, to_string(row.timepoint));
        require(seen.insert(key).second, "duplicate (subject, timepoint) at line " +
                                             std::to_string(lineno) + ": " + row.subject_id + "," +
                                             to_string(row.timepoint));
        table.rows.push_back(row);
    }
    require(!table.rows.empty(), "cohort CSV has no rows: " + path);
    return table;
}

inline void save_cohort_csv(const CohortTable& table, const std::string& path) {
    std::ofstream out(path);
    require(out.good(), "cannot write cohort CSV: " + path);
    out << "subject_id,group,amyloid,timepoint,column";
    for (const auto& s : kScoreNames) out << "," << s;
    out << "\n";
    char buf[40];
    for (const auto& r : table.rows) {
        out << r.subject_id << "," << to_string(r.group) << "," << to_string(r.amyloid) << ","
            << to_string(r.timepoint) << "," << r.feature_column;
        for (const auto& s : kScoreNames) {
            out << ",";
            auto it = r.scores.find(s);
            if (it != r.scores.end()) {
                std::snprintf(buf, sizeof(buf), "%.17g", it->second);
                out << buf;
            }
        }
        out << "\n";
    }
    require(out.good(), "write failed: " + path);
}

struct LoadedCohort {
    NamedMatrix features;
    CohortTable table;
    TriangleMesh mesh;
};

/// Loads and cross-validates the three inputs: feature columns and cohort
/// rows must be in bijection, and the matrix rows must match the mesh.
inline LoadedCohort load_cohort(const std::string& features_path, const std::string& cohort_path,
                                const std::string& mesh_path) {
    LoadedCohort lc;
    lc.features = load_matrix(features_path);
    lc.table = load_cohort_csv(cohort_path);
    lc.mesh = load_mesh(mesh_path);
    require(lc.features.values.rows() == lc.mesh.vertex_count,
            "feature matrix has " + std::to_string(lc.features.values.rows()) +
                " rows but mesh has " + std::to_string(lc.mesh.vertex_count) + " vertices");
    require(static_cast<Index>(lc.table.rows.size()) == lc.features.values.cols(),
            "cohort has " + std::to_string(lc.table.rows.size()) + " rows but feature matrix has " +
                std::to_string(lc.features.values.cols()) + " columns");
    std::set<int> used;
    for (const auto& r : lc.table.rows) {
        require(r.feature_column >= 0 &&
                    r.feature_column < static_cast<int>(lc.features.values.cols()),
                "cohort row " + r.subject_id + "/" + to_string(r.timepoint) +
                    " references feature column " + std::to_string(r.feature_column) +
                    " outside [0," + std::to_string(lc.features.values.cols()) + ")");
        require(used.insert(r.feature_column).second,
                "feature column " + std::to_string(r.feature_column) +
                    " referenced by more than one cohort row");
    }
    int nonpositive = 0;
    for (Index c = 0; c < lc.features.values.cols(); ++c)
        for (Index r = 0; r < lc.features.values.rows(); ++r)
            if (!(lc.features.values(r, c) > 0.0)) ++nonpositive;
    if (nonpositive > 0)
        std::fprintf(stderr,
                     "warning: %d nonpositive feature entries (features are expected to be "
                     "strictly positive distances)\n",
                     nonpositive);
    return lc;
}

/// Extracts the feature submatrix of one (group, timepoint) cell, columns in
/// cohort order.
inline NamedMatrix submatrix(const NamedMatrix& features, const CohortTable& table, Group g,
                             Timepoint t) {
    const auto rows = table.rows_of(g, t);
    require(!rows.empty(), "no cohort rows for " + to_string(g) + "/" + to_string(t));
    NamedMatrix out;
    out.values.resize(features.values.rows(), static_cast<Index>(rows.size()));
    for (std::size_t j = 0; j < rows.size(); ++j) {
        out.values.col(static_cast<Index>(j)) = features.values.col(rows[j]->feature_column);
        out.subject_ids.push_back(rows[j]->subject_id);
    }
    return out;
}

}  // namespace umitk
