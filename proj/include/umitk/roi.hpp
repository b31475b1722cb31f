#pragma once

#include "umitk/common.hpp"
#include "umitk/mesh.hpp"
#include "umitk/rng.hpp"
#include "umitk/solver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace umitk {

struct GroupSample {
    Matrix matrix;  // vertices x subjects
    std::string label;
    std::vector<std::string> subject_ids;

    void validate() const {
        require(matrix.cols() >= 2, "group '" + label + "' needs at least 2 subjects");
        require(subject_ids.empty() ||
                    static_cast<Index>(subject_ids.size()) == matrix.cols(),
                "group '" + label + "': subject id count mismatch");
    }
};

enum class RoiMethod { permutation, fdr };

struct RoiMask {
    std::vector<bool> selected;
    Vector p_values;
    double threshold = 0.0;  // p threshold (permutation) or q (fdr)
    RoiMethod method = RoiMethod::permutation;

    int count() const {
        return static_cast<int>(std::count(selected.begin(), selected.end(), true));
    }
    std::vector<int> vertices() const {
        std::vector<int> v;
        for (std::size_t q = 0; q < selected.size(); ++q)
            if (selected[q]) v.push_back(static_cast<int>(q));
        return v;
    }
};

struct StabilityMap {
    std::vector<int> counts;
    int n_folds = 0;
};

namespace detail {

// Pooled-variance two-sample t from per-group sums and sums of squares.
// Zero pooled variance: equal means give t = 0, otherwise +-inf.
inline double t_from_sums(double sa, double ssa, double na, double sb, double ssb, double nb) {
    const double diff = sa / na - sb / nb;
    double sp2 = (ssa - sa * sa / na) + (ssb - sb * sb / nb);
    if (sp2 < 0.0) sp2 = 0.0;  // fp cancellation guard
    sp2 /= (na + nb - 2.0);
    const double scale = (ssa + ssb) / (na + nb);
    if (sp2 <= scale * 1e-28) {
        if (diff == 0.0) return 0.0;
        if (sp2 == 0.0)
            return diff > 0 ? std::numeric_limits<double>::infinity()
                            : -std::numeric_limits<double>::infinity();
    }
    return diff / std::sqrt(sp2 * (1.0 / na + 1.0 / nb));
}

}  // namespace detail

/// Pooled-variance two-sample t statistic per vertex (rows are vertices,
/// columns subjects).
inline Vector two_sample_t(const Matrix& a, const Matrix& b) {
    require(a.rows() == b.rows(), "two_sample_t: vertex count mismatch");
    require(a.cols() >= 2 && b.cols() >= 2, "two_sample_t: each group needs >= 2 subjects");
    const double na = static_cast<double>(a.cols());
    const double nb = static_cast<double>(b.cols());
    Vector t(a.rows());
    for (Index v = 0; v < a.rows(); ++v) {
        const double sa = a.row(v).sum();
        const double ssa = a.row(v).array().square().sum();
        const double sb = b.row(v).sum();
        const double ssb = b.row(v).array().square().sum();
        t(v) = detail::t_from_sums(sa, ssa, na, sb, ssb, nb);
    }
    return t;
}

/// Monte Carlo permutation t-test. Whole-subject relabelings are drawn once
/// per permutation (substream `Rng(seed, perm)`) and shared across vertices;
/// p = (1 + #{ |t_perm| >= |t_obs| }) / (n_perm + 1), so p is never zero.
inline Vector permutation_t_test(const GroupSample& group_a, const GroupSample& group_b,
                                 int n_perm, std::uint64_t seed) {
    group_a.validate();
    group_b.validate();
    require(group_a.matrix.rows() == group_b.matrix.rows(),
            "permutation_t_test: vertex count mismatch");
    require(n_perm >= 1, "permutation_t_test: n_perm must be >= 1");
    const Index m = group_a.matrix.rows();
    const Index na = group_a.matrix.cols();
    const Index nb = group_b.matrix.cols();
    const Index n = na + nb;

    Matrix pooled(m, n);
    pooled.leftCols(na) = group_a.matrix;
    pooled.rightCols(nb) = group_b.matrix;
    const Matrix pooled_sq = pooled.array().square().matrix();
    const Vector row_sum = pooled.rowwise().sum();
    const Vector row_sumsq = pooled_sq.rowwise().sum();

    Vector t_obs(m);
    {
        Vector za = Vector::Zero(n);
        za.head(na).setOnes();
        const Vector sa = pooled * za;
        const Vector ssa = pooled_sq * za;
        for (Index v = 0; v < m; ++v)
            t_obs(v) = std::abs(detail::t_from_sums(
                sa(v), ssa(v), static_cast<double>(na), row_sum(v) - sa(v),
                row_sumsq(v) - ssa(v), static_cast<double>(nb)));
    }

    std::vector<int> exceed(static_cast<std::size_t>(m), 0);
    const Index block = 256;  // permutations batched into GEMMs
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (Index start = 0; start < n_perm; start += block) {
        const Index bsize = std::min<Index>(block, n_perm - start);
        Matrix Z = Matrix::Zero(n, bsize);
        for (Index j = 0; j < bsize; ++j) {
            Rng rng(seed, static_cast<std::uint64_t>(start + j) + 1);
            std::iota(idx.begin(), idx.end(), 0);
            rng.shuffle(idx);
            for (Index i = 0; i < na; ++i) Z(idx[static_cast<std::size_t>(i)], j) = 1.0;
        }
        const Matrix SA = pooled * Z;
        const Matrix SSA = pooled_sq * Z;
        for (Index j = 0; j < bsize; ++j) {
            for (Index v = 0; v < m; ++v) {
                const double t = detail::t_from_sums(
                    SA(v, j), SSA(v, j), static_cast<double>(na), row_sum(v) - SA(v, j),
                    row_sumsq(v) - SSA(v, j), static_cast<double>(nb));
                if (std::abs(t) >= t_obs(v)) ++exceed[static_cast<std::size_t>(v)];
            }
        }
    }

    Vector p(m);
    for (Index v = 0; v < m; ++v)
        p(v) = (1.0 + exceed[static_cast<std::size_t>(v)]) / (static_cast<double>(n_perm) + 1.0);
    return p;
}

/// Strict threshold selection: vertex q is in the ROI iff p(q) < threshold.
inline RoiMask select_roi(const Vector& p_values, double threshold) {
    require(threshold > 0.0 && threshold < 1.0 + 1e-12, "select_roi: threshold outside (0,1]");
    RoiMask mask;
    mask.p_values = p_values;
    mask.threshold = threshold;
    mask.method = RoiMethod::permutation;
    mask.selected.resize(static_cast<std::size_t>(p_values.size()));
    for (Index q = 0; q < p_values.size(); ++q)
        mask.selected[static_cast<std::size_t>(q)] = p_values(q) < threshold;
    return mask;
}

/// Benjamini-Hochberg step-up at rate q: find the largest k with
/// p_(k) <= k*q/V and select everything at or below that order statistic.
inline RoiMask fdr_select(const Vector& p_values, double q) {
    require(q > 0.0 && q < 1.0, "fdr_select: q outside (0,1)");
    const Index v_count = p_values.size();
    std::vector<Index> order(static_cast<std::size_t>(v_count));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](Index a, Index b) { return p_values(a) < p_values(b); });
    double cutoff = -1.0;
    for (Index k = v_count; k >= 1; --k) {
        const double pk = p_values(order[static_cast<std::size_t>(k - 1)]);
        if (pk <= static_cast<double>(k) * q / static_cast<double>(v_count)) {
            cutoff = pk;
            break;
        }
    }
    RoiMask mask;
    mask.p_values = p_values;
    mask.threshold = q;
    mask.method = RoiMethod::fdr;
    mask.selected.resize(static_cast<std::size_t>(v_count));
    for (Index i = 0; i < v_count; ++i)
        mask.selected[static_cast<std::size_t>(i)] = cutoff >= 0.0 && p_values(i) <= cutoff;
    return mask;
}

/// Configuration of one ROI-extraction pass (used directly and per fold).
struct RoiPipelineConfig {
    SolverConfig solver;
    bool on_low_rank = true;  // false: test the raw feature rows instead
    int n_perm = 5000;
    double p_threshold = 1e-5;
    RoiMethod method = RoiMethod::permutation;
    double q = 1e-4;
};

/// One ROI extraction: optionally decompose each group and test the low-rank
/// components, then select by permutation p-values or BH-FDR.
inline RoiMask extract_roi(const GroupSample& group_a, const GroupSample& group_b,
                           const TriangleMesh& mesh, const RoiPipelineConfig& cfg,
                           std::uint64_t seed) {
    GroupSample a = group_a, b = group_b;
    if (cfg.on_low_rank) {
        a.matrix = decompose(group_a.matrix, mesh, cfg.solver).L;
        b.matrix = decompose(group_b.matrix, mesh, cfg.solver).L;
    }
    const Vector p = permutation_t_test(a, b, cfg.n_perm, seed);
    return cfg.method == RoiMethod::permutation ? select_roi(p, cfg.p_threshold)
                                                : fdr_select(p, cfg.q);
}

/// Fold-stability counting: n_folds times, subsample `fraction` of each
/// group's subjects (without replacement, stratified, substream
/// `Rng(seed, fold)`), rerun the ROI extraction, and count per-vertex
/// selections.
inline StabilityMap stability_folds(const GroupSample& group_a, const GroupSample& group_b,
                                    int n_folds, double fraction, const TriangleMesh& mesh,
                                    const RoiPipelineConfig& cfg, std::uint64_t seed) {
    group_a.validate();
    group_b.validate();
    require(n_folds >= 1, "stability_folds: n_folds must be >= 1");
    require(fraction > 0.0 && fraction <= 1.0, "stability_folds: fraction outside (0,1]");
    StabilityMap map;
    map.n_folds = n_folds;
    map.counts.assign(static_cast<std::size_t>(group_a.matrix.rows()), 0);
    for (int fold = 0; fold < n_folds; ++fold) {
        Rng rng(seed, static_cast<std::uint64_t>(fold) + 0x10001);
        const auto take = [&](const GroupSample& g) {
            const int n = static_cast<int>(g.matrix.cols());
            const int k = std::max(2, static_cast<int>(std::floor(fraction * n)));
            const auto cols = rng.sample_without_replacement(n, k);
            GroupSample sub;
            sub.label = g.label;
            sub.matrix.resize(g.matrix.rows(), k);
            for (int j = 0; j < k; ++j) sub.matrix.col(j) = g.matrix.col(cols[static_cast<std::size_t>(j)]);
            return sub;
        };
        RoiMask mask;
        try {
            mask = extract_roi(take(group_a), take(group_b), mesh, cfg,
                               Rng(seed, static_cast<std::uint64_t>(fold) + 0x20002).next_u64());
        } catch (const std::exception& e) {
            throw NumericError("stability fold " + std::to_string(fold) + ": " + e.what());
        }
        for (std::size_t q = 0; q < mask.selected.size(); ++q)
            if (mask.selected[q]) ++map.counts[q];
    }
    return map;
}

// --- serialization ----------------------------------------------------------

inline void save_roi_csv(const RoiMask& mask, const std::string& path) {
    std::ofstream out(path);
    require(out.good(), "cannot write ROI CSV: " + path);
    out << "vertex,p,selected\n";
    char buf[40];
    for (Index q = 0; q < mask.p_values.size(); ++q) {
        std::snprintf(buf, sizeof(buf), "%.17g", mask.p_values(q));
        out << q << "," << buf << "," << (mask.selected[static_cast<std::size_t>(q)] ? 1 : 0)
            << "\n";
    }
    require(out.good(), "write failed: " + path);
}

inline RoiMask load_roi_csv(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open ROI CSV: " + path);
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "ROI CSV empty: " + path);
    std::vector<double> p;
    std::vector<bool> sel;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        int vertex = 0, s = 0;
        double pv = 0.0;
        require(std::sscanf(line.c_str(), "%d,%lf,%d", &vertex, &pv, &s) == 3,
                "bad ROI CSV line: " + line);
        require(vertex == static_cast<int>(p.size()), "ROI CSV vertices out of order: " + line);
        p.push_back(pv);
        sel.push_back(s != 0);
    }
    RoiMask mask;
    mask.p_values = Eigen::Map<const Vector>(p.data(), static_cast<Index>(p.size()));
    mask.selected = sel;
    return mask;
}

inline void save_stability_csv(const StabilityMap& map, const std::string& path) {
    std::ofstream out(path);
    require(out.good(), "cannot write stability CSV: " + path);
    out << "vertex,count\n";
    for (std::size_t q = 0; q < map.counts.size(); ++q) out << q << "," << map.counts[q] << "\n";
    require(out.good(), "write failed: " + path);
}

}  // namespace umitk
