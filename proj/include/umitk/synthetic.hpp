#pragma once

#include "umitk/cohort.hpp"
#include "umitk/common.hpp"
#include "umitk/mesh.hpp"
#include "umitk/rng.hpp"
#include "umitk/stats.hpp"

#include <Eigen/QR>
#include <nlohmann/json.hpp>

#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace umitk {

/// Closed regular quad-grid torus triangulation: rows*cols vertices, every
/// vertex has exactly 6 neighbors, every edge exactly 2 triangles. Used by
/// the synthetic generator because it gives an exact vertex count and
/// uniform one-rings. Positions embed the torus in 3D for overlay viewers.
inline TriangleMesh make_torus_grid(int rows, int cols) {
    require(rows >= 3 && cols >= 3, "torus grid needs rows, cols >= 3");
    TriangleMesh mesh;
    mesh.vertex_count = rows * cols;
    mesh.positions.resize(static_cast<std::size_t>(mesh.vertex_count));
    const double two_pi = 6.283185307179586476925286766559;
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            const double u = two_pi * i / rows;
            const double v = two_pi * j / cols;
            const double R = 2.0, r = 1.0;
            mesh.positions[static_cast<std::size_t>(i * cols + j)] = {
                (R + r * std::cos(v)) * std::cos(u), (R + r * std::cos(v)) * std::sin(u),
                r * std::sin(v)};
        }
    }
    auto at = [&](int i, int j) { return ((i + rows) % rows) * cols + ((j + cols) % cols); };
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            mesh.triangles.push_back({at(i, j), at(i + 1, j), at(i + 1, j + 1)});
            mesh.triangles.push_back({at(i, j), at(i + 1, j + 1), at(i, j + 1)});
        }
    }
    build_one_ring(mesh);
    return mesh;
}

/// Mesh with no triangles: every one-ring is the singleton {q}, which makes
/// the group shrink collapse to scalar soft-thresholding.
inline TriangleMesh make_pointcloud_mesh(int vertex_count) {
    TriangleMesh mesh;
    mesh.vertex_count = vertex_count;
    build_one_ring(mesh);
    return mesh;
}

/// Vertices within `radius` one-ring hops of `center` (BFS).
inline std::vector<int> patch_vertices(const TriangleMesh& mesh, int center, int radius) {
    require(center >= 0 && center < mesh.vertex_count, "patch center out of range");
    std::vector<int> dist(static_cast<std::size_t>(mesh.vertex_count), -1);
    std::deque<int> queue{center};
    dist[static_cast<std::size_t>(center)] = 0;
    std::vector<int> out;
    while (!queue.empty()) {
        const int q = queue.front();
        queue.pop_front();
        out.push_back(q);
        if (dist[static_cast<std::size_t>(q)] == radius) continue;
        for (int nb : mesh.one_ring[static_cast<std::size_t>(q)]) {
            if (dist[static_cast<std::size_t>(nb)] < 0) {
                dist[static_cast<std::size_t>(nb)] = dist[static_cast<std::size_t>(q)] + 1;
                queue.push_back(nb);
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

// ---------------------------------------------------------------------------
// Planted low-rank + patch-sparse instance (solver oracle)
// ---------------------------------------------------------------------------

struct PlantedSpec {
    int n = 60;
    int rank = 5;
    double sparse_col_fraction = 0.05;  // columns carrying one contiguous patch
    int patch_radius = 2;
    double sparse_amp = 1.5;
    double noise_rel = 0.01;  // sigma = noise_rel * max|L0|
    std::uint64_t seed = 0;
};

struct PlantedInstance {
    Matrix A, L0, S0, N0;
    std::vector<std::pair<Index, Index>> support;  // (row, col) of planted sparse entries
    double noise_sigma = 0.0;
};

inline PlantedInstance plant_lowrank_sparse(const TriangleMesh& mesh, const PlantedSpec& spec) {
    const Index m = mesh.vertex_count;
    const Index n = spec.n;
    require(spec.rank >= 1 && spec.rank <= std::min<Index>(m, n), "planted rank out of range");
    Rng rng(spec.seed, 0xA11CE);

    Matrix G(m, spec.rank);
    for (Index j = 0; j < spec.rank; ++j)
        for (Index i = 0; i < m; ++i) G(i, j) = rng.normal();
    const Matrix U0 = Eigen::HouseholderQR<Matrix>(G).householderQ() * Matrix::Identity(m, spec.rank);

    // Singular spectrum spread over a factor ~5 keeps the instance well
    // conditioned while clearly above the noise floor.
    Vector sv(spec.rank);
    for (Index i = 0; i < spec.rank; ++i)
        sv(i) = std::sqrt(static_cast<double>(m) * static_cast<double>(n)) *
                (static_cast<double>(spec.rank - i) / spec.rank) * 0.5;
    Matrix W(spec.rank, n);
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < spec.rank; ++i) W(i, j) = rng.normal();
    const Matrix Wq =
        (Eigen::HouseholderQR<Matrix>(W.transpose()).householderQ() * Matrix::Identity(n, spec.rank))
            .transpose();

    PlantedInstance inst;
    inst.L0 = U0 * sv.asDiagonal() * Wq;

    inst.S0 = Matrix::Zero(m, n);
    const int n_sparse = static_cast<int>(std::lround(spec.sparse_col_fraction * n));
    const auto cols = rng.sample_without_replacement(static_cast<int>(n), n_sparse);
    for (int c : cols) {
        const int center = static_cast<int>(rng.below(static_cast<std::uint64_t>(m)));
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        for (int q : patch_vertices(mesh, center, spec.patch_radius)) {
            const double a = sign * spec.sparse_amp * (1.0 + 0.2 * rng.normal());
            inst.S0(q, c) = a;
            inst.support.emplace_back(q, c);
        }
    }

    inst.noise_sigma = spec.noise_rel * inst.L0.cwiseAbs().maxCoeff();
    inst.N0.resize(m, n);
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < m; ++i) inst.N0(i, j) = rng.normal(0.0, inst.noise_sigma);

    inst.A = inst.L0 + inst.S0 + inst.N0;
    return inst;
}

// ---------------------------------------------------------------------------
// Synthetic cohort (ROI / UMI / statistics oracle)
// ---------------------------------------------------------------------------

struct SyntheticSpec {
    int mesh_rows = 20, mesh_cols = 25;  // m = rows * cols
    int n_ad = 60, n_cu = 60, n_mci = 40;
    int rank = 5;  // group-common rank of the CU low-rank component
    int patch_count = 3;
    int patch_radius = 2;
    double atrophy_depth_pct = 15.0;      // AD feature loss on ROI patches, percent of base
    double atrophy_sd_frac = 0.35;        // per-subject spread of the depth (0 = uniform)
    double mci_positive_fraction = 0.5;   // MCI subjects carrying atrophy (survival marker)
    double mci_atrophy_fraction = 0.6;    // their depth relative to AD depth
    double sparse_subject_fraction = 0.3; // subjects carrying an individual outlier patch
    double sparse_amp = 1.2;
    double noise_sigma = 0.25;
    double base_level = 8.0;       // mm-scale positive baseline feature level
    double coeff_scale = 0.3;      // subject variability along the shared basis
    bool flat_coefficients = false;  // equal basis amplitudes instead of 1/(1+k) decay
    double drift_pct_ad = 6.0, drift_pct_mci = 3.5, drift_pct_cu = 1.5;  // 24-month loss, percent
    double drift_sd_frac = 0.35;   // per-subject spread of the drift
    double baseline_hazard = 0.04;           // events per month, marker negative
    double marker_log_hr = std::log(4.0);
    double followup_months = 18.0;
    std::uint64_t seed = 1;
};

struct GroundTruth {
    std::vector<bool> roi;                       // planted atrophy vertices
    std::map<std::string, int> l0_rank;          // per group
    std::map<std::string, Matrix> l0;            // per group, baseline
    std::vector<bool> mci_marker;                // per MCI subject
    double marker_log_hr = 0.0;
};

struct SyntheticCohort {
    TriangleMesh mesh;
    NamedMatrix features;  // all subjects x timepoints, columns per cohort table
    CohortTable table;
    std::vector<SurvivalRecord> survival;  // MCI subjects, marker = planted truth
    GroundTruth truth;
};

namespace detail {

inline Matrix smooth_basis(int rows, int cols, int count, Rng& rng) {
    const Index m = static_cast<Index>(rows) * cols;
    Matrix F(m, count);
    const double two_pi = 6.283185307179586476925286766559;
    for (int k = 0; k < count; ++k) {
        const double a = 1.0 + static_cast<double>(rng.below(3));
        const double b = 1.0 + static_cast<double>(rng.below(3));
        const double phase = rng.uniform(0.0, two_pi);
        const double mix = rng.uniform(-1.0, 1.0);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j)
                F(static_cast<Index>(i) * cols + j, k) =
                    std::cos(two_pi * (a * i / rows + b * j / cols) + phase) +
                    mix * std::sin(two_pi * (b * i / rows - a * j / cols));
    }
    return F;
}

}  // namespace detail

inline SyntheticCohort generate_synthetic(const SyntheticSpec& spec) {
    require(spec.n_ad >= 2 && spec.n_cu >= 2, "synthetic: AD and CU need >= 2 subjects");
    require(spec.rank >= 2, "synthetic: rank must be >= 2 (base profile plus variation)");
    require(spec.atrophy_depth_pct >= 0.0 && spec.atrophy_depth_pct < 100.0,
            "synthetic: atrophy depth must lie in [0,100)");
    SyntheticCohort out;
    out.mesh = make_torus_grid(spec.mesh_rows, spec.mesh_cols);
    const Index m = out.mesh.vertex_count;
    Rng rng(spec.seed, 0xC0110);

    // Planted ROI: distinct non-overlapping patches.
    out.truth.roi.assign(static_cast<std::size_t>(m), false);
    std::set<int> taken;
    int placed = 0;
    const int max_attempts = 200 + 400 * spec.patch_count;
    for (int attempt = 0; attempt < max_attempts && placed < spec.patch_count; ++attempt) {
        const int center = static_cast<int>(rng.below(static_cast<std::uint64_t>(m)));
        const auto verts = patch_vertices(out.mesh, center, spec.patch_radius);
        bool clash = false;
        for (int q : verts)
            if (taken.count(q)) clash = true;
        if (clash) continue;
        for (int q : verts) {
            taken.insert(q);
            out.truth.roi[static_cast<std::size_t>(q)] = true;
        }
        ++placed;
    }
    require(placed == spec.patch_count,
            "synthetic: could not place " + std::to_string(spec.patch_count) +
                " non-overlapping patches of radius " + std::to_string(spec.patch_radius) +
                " on " + std::to_string(m) + " vertices");

    Vector roi_vec = Vector::Zero(m);
    for (Index q = 0; q < m; ++q)
        if (out.truth.roi[static_cast<std::size_t>(q)]) roi_vec(q) = 1.0;

    // Shared smooth basis, orthonormalized together with the constant vector
    // so the group-common component has exactly `rank` directions.
    Matrix Braw(m, spec.rank);
    Braw.col(0).setOnes();
    Braw.rightCols(spec.rank - 1) = detail::smooth_basis(spec.mesh_rows, spec.mesh_cols,
                                                         spec.rank - 1, rng);
    Matrix B = Eigen::HouseholderQR<Matrix>(Braw).householderQ() * Matrix::Identity(m, spec.rank);
    if (B(0, 0) < 0.0) B.col(0) = -B.col(0);  // keep the base direction positive
    const double sqm = std::sqrt(static_cast<double>(m));

    struct GroupPlan {
        Group group;
        int n;
        double depth_pct;  // mean atrophy on the ROI (baseline)
        double drift_pct;  // additional loss at m24
        Amyloid amyloid;
    };
    const std::vector<GroupPlan> plans = {
        {Group::AD, spec.n_ad, spec.atrophy_depth_pct, spec.drift_pct_ad, Amyloid::positive},
        {Group::CU, spec.n_cu, 0.0, spec.drift_pct_cu, Amyloid::negative},
        {Group::MCI, spec.n_mci, spec.atrophy_depth_pct * spec.mci_atrophy_fraction,
         spec.drift_pct_mci, Amyloid::positive},
    };

    const Index total_cols = 2 * static_cast<Index>(spec.n_ad + spec.n_cu + spec.n_mci);
    out.features.values.resize(m, total_cols);
    out.features.subject_ids.resize(static_cast<std::size_t>(total_cols));
    Index next_col = 0;

    for (const auto& plan : plans) {
        if (plan.n == 0) continue;
        Rng grng(spec.seed, 0x9000 + static_cast<std::uint64_t>(plan.group));
        const std::string gname = to_string(plan.group);

        // Group-common structure: base level along the constant direction plus
        // decaying variation along the smooth basis.
        Matrix coeffs(spec.rank, plan.n);
        for (Index j = 0; j < plan.n; ++j) {
            coeffs(0, j) = spec.base_level * sqm;  // constant direction (B col 0 = 1/sqrt(m))
            for (Index k = 1; k < spec.rank; ++k) {
                const double decay = spec.flat_coefficients ? 1.0 : 1.0 + static_cast<double>(k);
                coeffs(k, j) = grng.normal(0.0, spec.coeff_scale * sqm / decay);
            }
        }
        Matrix l0 = B * coeffs;

        // Atrophy: per-subject percent deficit of the base level on the ROI.
        std::vector<double> depth(static_cast<std::size_t>(plan.n), plan.depth_pct);
        if (plan.group == Group::MCI) {
            out.truth.mci_marker.assign(static_cast<std::size_t>(plan.n), false);
            for (Index j = 0; j < plan.n; ++j) {
                const bool positive = grng.uniform() < spec.mci_positive_fraction;
                out.truth.mci_marker[static_cast<std::size_t>(j)] = positive;
                if (!positive) depth[static_cast<std::size_t>(j)] = 0.0;
            }
        }
        for (auto& d : depth)
            if (d != 0.0) d *= std::max(0.0, 1.0 + spec.atrophy_sd_frac * grng.normal());
        for (Index j = 0; j < plan.n; ++j)
            if (depth[static_cast<std::size_t>(j)] != 0.0)
                l0.col(j) -= (depth[static_cast<std::size_t>(j)] / 100.0 * spec.base_level) * roi_vec;

        out.truth.l0[gname] = l0;
        int rank_truth = spec.rank;
        for (double d : depth)
            if (d != 0.0) {
                ++rank_truth;
                break;
            }
        out.truth.l0_rank[gname] = rank_truth;

        // Individual outlier patches and noise; then the m24 follow-up with a
        // progressive loss on the ROI.
        Matrix baseline = l0;
        for (Index j = 0; j < plan.n; ++j) {
            if (grng.uniform() < spec.sparse_subject_fraction) {
                const int center = static_cast<int>(grng.below(static_cast<std::uint64_t>(m)));
                const double sign = grng.uniform() < 0.5 ? -1.0 : 1.0;
                for (int q : patch_vertices(out.mesh, center, spec.patch_radius))
                    baseline(q, j) += sign * spec.sparse_amp * (1.0 + 0.2 * grng.normal());
            }
            for (Index i = 0; i < m; ++i) baseline(i, j) += grng.normal(0.0, spec.noise_sigma);
        }

        Matrix m24 = baseline;
        for (Index j = 0; j < plan.n; ++j) {
            const double drift = plan.drift_pct / 100.0 * spec.base_level *
                                 std::max(0.0, 1.0 + spec.drift_sd_frac * grng.normal());
            m24.col(j) -= drift * roi_vec;
            for (Index i = 0; i < m; ++i) m24(i, j) += grng.normal(0.0, spec.noise_sigma * 0.3);
        }

        for (Index j = 0; j < plan.n; ++j) {
            char sid[32];
            std::snprintf(sid, sizeof(sid), "%s%03d", gname.c_str(), static_cast<int>(j));
            const double sev = depth[static_cast<std::size_t>(j)] / 15.0;
            for (Timepoint tp : {Timepoint::baseline, Timepoint::m24}) {
                CohortRow row;
                row.subject_id = sid;
                row.group = plan.group;
                row.amyloid = plan.amyloid;
                row.timepoint = tp;
                row.feature_column = static_cast<int>(next_col);
                const double prog = tp == Timepoint::m24 ? plan.drift_pct / 10.0 : 0.0;
                row.scores["MMSE"] = 28.5 - 5.0 * sev - prog + grng.normal(0.0, 0.8);
                row.scores["CDR-SB"] = 0.5 + 4.0 * sev + 0.6 * prog + grng.normal(0.0, 0.5);
                row.scores["ADAS-Cog11"] = 8.0 + 14.0 * sev + 2.0 * prog + grng.normal(0.0, 1.5);
                row.scores["AVLT-Total"] = 44.0 - 14.0 * sev - 2.0 * prog + grng.normal(0.0, 3.0);
                out.table.rows.push_back(row);
                out.features.values.col(next_col) =
                    tp == Timepoint::baseline ? baseline.col(j) : m24.col(j);
                out.features.subject_ids[static_cast<std::size_t>(next_col)] =
                    std::string(sid) + "/" + to_string(tp);
                ++next_col;
            }
        }

        if (plan.group == Group::MCI) {
            Rng srng(spec.seed, 0x50C1A1);
            for (Index j = 0; j < plan.n; ++j) {
                const bool marker = out.truth.mci_marker[static_cast<std::size_t>(j)];
                const double hazard =
                    spec.baseline_hazard * std::exp(marker ? spec.marker_log_hr : 0.0);
                const double event_time = srng.exponential(hazard);
                double censor_time = spec.followup_months;
                if (srng.uniform() < 0.15) censor_time = srng.uniform(0.3, 1.0) * spec.followup_months;
                SurvivalRecord rec;
                rec.marker_positive = marker;
                rec.event = event_time <= censor_time;
                rec.time = std::min(event_time, censor_time);
                out.survival.push_back(rec);
            }
        }
    }
    out.truth.marker_log_hr = spec.marker_log_hr;
    return out;
}

/// Writes a generated cohort to a directory: mesh.txt, features.(csv|bin),
/// cohort.csv, survival.csv (if any MCI), truth.json and the true-ROI
/// overlay. Ground-truth L0 matrices stay in memory only (truth.json records
/// their ranks).
inline void save_synthetic(const SyntheticCohort& sc, const std::string& dir,
                           const std::string& fmt = "csv") {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    save_mesh(sc.mesh, (fs::path(dir) / "mesh.txt").string());
    const std::string ext = fmt == "bin" ? ".bin" : ".csv";
    save_matrix(sc.features, (fs::path(dir) / ("features" + ext)).string());
    save_cohort_csv(sc.table, (fs::path(dir) / "cohort.csv").string());
    if (!sc.survival.empty()) {
        std::ofstream out(fs::path(dir) / "survival.csv");
        require(out.good(), "cannot write survival.csv");
        out << "subject_id,time,event,marker_true\n";
        char buf[40];
        int j = 0;
        for (const auto& rec : sc.survival) {
            std::snprintf(buf, sizeof(buf), "%.17g", rec.time);
            char sid[32];
            std::snprintf(sid, sizeof(sid), "MCI%03d", j++);
            out << sid << "," << buf << "," << (rec.event ? 1 : 0) << ","
                << (rec.marker_positive ? 1 : 0) << "\n";
        }
        require(out.good(), "write failed: survival.csv");
    }
    {
        nlohmann::json truth;
        truth["l0_rank"] = sc.truth.l0_rank;
        truth["marker_log_hr"] = sc.truth.marker_log_hr;
        std::vector<int> roi;
        for (std::size_t q = 0; q < sc.truth.roi.size(); ++q)
            if (sc.truth.roi[q]) roi.push_back(static_cast<int>(q));
        truth["roi_vertices"] = roi;
        truth["mci_marker"] = sc.truth.mci_marker;
        std::ofstream out(fs::path(dir) / "truth.json");
        require(out.good(), "cannot write truth.json");
        out << truth.dump(2) << "\n";
    }
    Vector roi_vec = Vector::Zero(sc.mesh.vertex_count);
    for (Index q = 0; q < roi_vec.size(); ++q)
        if (sc.truth.roi[static_cast<std::size_t>(q)]) roi_vec(q) = 1.0;
    save_overlay(sc.mesh, roi_vec, (fs::path(dir) / "roi_truth_overlay.txt").string());
}

/// Standalone survival simulation (exponential model, administrative plus
/// light random censoring); used by the Cox calibration oracles.
inline std::vector<SurvivalRecord> simulate_survival(int n, double marker_fraction,
                                                     double baseline_hazard, double log_hr,
                                                     double followup, std::uint64_t seed) {
    require(n >= 2, "simulate_survival: need >= 2 subjects");
    std::vector<SurvivalRecord> recs;
    recs.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Rng rng(seed, static_cast<std::uint64_t>(i) + 0x5EED);
        SurvivalRecord r;
        r.marker_positive = rng.uniform() < marker_fraction;
        const double hazard = baseline_hazard * std::exp(r.marker_positive ? log_hr : 0.0);
        const double event_time = rng.exponential(hazard);
        double censor_time = followup;
        if (rng.uniform() < 0.15) censor_time = rng.uniform(0.3, 1.0) * followup;
        r.event = event_time <= censor_time;
        r.time = std::min(event_time, censor_time);
        recs.push_back(r);
    }
    return recs;
}

}  // namespace umitk
