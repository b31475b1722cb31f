#pragma once

#include "umitk/cohort.hpp"
#include "umitk/common.hpp"
#include "umitk/matrix_io.hpp"
#include "umitk/mesh.hpp"
#include "umitk/roi.hpp"
#include "umitk/solver.hpp"
#include "umitk/stats.hpp"
#include "umitk/synthetic.hpp"
#include "umitk/umi.hpp"

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace umitk {

// ---------------------------------------------------------------------------
// Hashing (manifest reproducibility)
// ---------------------------------------------------------------------------

inline std::string sha256_bytes(const void* data, std::size_t size) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    EVP_DigestUpdate(ctx, data, size);
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

inline std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot hash missing file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string bytes = ss.str();
    return sha256_bytes(bytes.data(), bytes.size());
}

// ---------------------------------------------------------------------------
// Flat sectioned key-value config
// ---------------------------------------------------------------------------

/// "[section]" headers and "key = value" lines; '#' starts a comment. Keys
/// are addressed as "section.key".
class IniConfig {
public:
    static IniConfig parse_file(const std::string& path) {
        std::ifstream in(path);
        require(in.good(), "cannot open config: " + path);
        std::ostringstream ss;
        ss << in.rdbuf();
        return parse(ss.str());
    }

    static IniConfig parse(const std::string& text) {
        IniConfig cfg;
        std::istringstream in(text);
        std::string line, section;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                require(line.back() == ']', "config line " + std::to_string(lineno) +
                                                ": unterminated section header");
                section = trim(line.substr(1, line.size() - 2));
                continue;
            }
            const auto eq = line.find('=');
            require(eq != std::string::npos,
                    "config line " + std::to_string(lineno) + ": expected key = value");
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            require(!key.empty(), "config line " + std::to_string(lineno) + ": empty key");
            cfg.values_[section.empty() ? key : section + "." + key] = value;
        }
        return cfg;
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get(const std::string& key, const std::string& fallback = {}) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    std::string get_required(const std::string& key) const {
        auto it = values_.find(key);
        require(it != values_.end(), "config is missing required key '" + key + "'");
        return it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : detail::parse_double(it->second, "config key " + key);
    }

    long long get_int(const std::string& key, long long fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        return static_cast<long long>(detail::parse_double(it->second, "config key " + key));
    }

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    static std::string trim(const std::string& s) {
        const auto a = s.find_first_not_of(" \t\r\n");
        if (a == std::string::npos) return {};
        const auto b = s.find_last_not_of(" \t\r\n");
        return s.substr(a, b - a + 1);
    }

    std::map<std::string, std::string> values_;
};

// ---------------------------------------------------------------------------
// Solver diagnostics
// ---------------------------------------------------------------------------

inline nlohmann::json decomposition_diagnostics(const DecompositionResult& res) {
    nlohmann::json j;
    j["converged"] = res.converged;
    j["iterations"] = res.iters;
    j["lambda"] = res.config.lambda;
    j["alpha"] = res.config.alpha;
    j["tau"] = res.config.tau;
    j["epsilon"] = res.config.epsilon;
    j["rank_budget"] = res.config.rank_budget;
    j["delta"] = res.stats.delta;
    j["sigma_l"] = res.stats.sigma_l;
    j["m"] = res.stats.m;
    j["n"] = res.stats.n;
    j["svd"] = {{"init_calls", res.svd_counts.init_calls},
                {"loop_calls", res.svd_counts.loop_calls},
                {"loop_full_calls", res.svd_counts.loop_full_calls},
                {"loop_max_min_dim", res.svd_counts.loop_max_min_dim}};
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& rec : res.history)
        hist.push_back({{"iter", rec.iter},
                        {"objective", rec.objective},
                        {"residual", rec.residual},
                        {"rank_estimate", rec.rank_estimate},
                        {"sparse_norm", rec.sparse_norm},
                        {"step", rec.step},
                        {"beta", rec.beta}});
    j["history"] = hist;
    return j;
}

inline void write_json(const nlohmann::json& j, const std::string& path) {
    std::ofstream out(path);
    require(out.good(), "cannot write " + path);
    out << j.dump(2) << "\n";
    require(out.good(), "write failed: " + path);
}

// ---------------------------------------------------------------------------
// Lambda sensitivity sweep
// ---------------------------------------------------------------------------

struct SweepConfig {
    static std::vector<double> default_grid() {
        std::vector<double> g;
        for (int i = 3; i <= 14; ++i) g.push_back(i / 1000.0);
        return g;
    }

    std::vector<double> grid = default_grid();  // 0.003 .. 0.014 step 0.001
    SolverConfig solver;
    int n_perm = 500;
    double p_threshold = 0.01;
    int reps = 3;
    double holdout_fraction = 0.1;
    std::uint64_t seed = 0;
    // Decompose per-vertex-centered data and add the pooled mean back before
    // template building. Recommended: without centering, the constant
    // baseline profile dominates the spectrum and the beta_0 = 1.25/sigma_L
    // schedule starts the nuclear threshold far above every other direction.
    bool center_rows = false;
};

struct SweepPoint {
    double lambda = 0.0;
    int rank_pos = 0, rank_neg = 0;       // effective rank of V per group
    double snorm_pos = 0.0, snorm_neg = 0.0;
    double holdout_error = 0.0;           // mean misclassification at the ROC cutoff
};

/// Reproduces the lambda sensitivity study: for each grid value, decompose
/// both groups and record rank/sparse-norm; then repeatedly hold out a
/// fraction of each group, train ROI + template on the rest, score the
/// holdout with raw features and record the classification error at the
/// nearest-point ROC cutoff.
inline std::vector<SweepPoint> sweep_lambda(const Matrix& group_pos, const Matrix& group_neg,
                                            const TriangleMesh& mesh, const SweepConfig& cfg) {
    require(!cfg.grid.empty(), "sweep_lambda: empty grid");
    require(cfg.reps >= 1, "sweep_lambda: reps must be >= 1");
    const auto pooled_mean = [](const Matrix& a, const Matrix& b) {
        Vector mu = (a.rowwise().sum() + b.rowwise().sum()) /
                    static_cast<double>(a.cols() + b.cols());
        return mu;
    };
    std::vector<SweepPoint> points;
    for (std::size_t gi = 0; gi < cfg.grid.size(); ++gi) {
        SolverConfig solver = cfg.solver;
        solver.lambda = cfg.grid[gi];
        SweepPoint pt;
        pt.lambda = solver.lambda;

        {
            Matrix a = group_pos, b = group_neg;
            if (cfg.center_rows) {
                const Vector mu = pooled_mean(a, b);
                a.colwise() -= mu;
                b.colwise() -= mu;
            }
            const auto full_pos = decompose(a, mesh, solver);
            const auto full_neg = decompose(b, mesh, solver);
            pt.rank_pos = effective_rank(full_pos.V, full_pos.stats.delta);
            pt.rank_neg = effective_rank(full_neg.V, full_neg.stats.delta);
            pt.snorm_pos = full_pos.S.template lpNorm<1>();
            pt.snorm_neg = full_neg.S.template lpNorm<1>();
        }

        double err_sum = 0.0;
        for (int rep = 0; rep < cfg.reps; ++rep) {
            Rng rng(cfg.seed, gi * 1000 + static_cast<std::uint64_t>(rep) + 1);
            const auto split = [&](const Matrix& g) {
                const int n = static_cast<int>(g.cols());
                const int k = std::max(1, static_cast<int>(std::lround(cfg.holdout_fraction * n)));
                const auto hold = rng.sample_without_replacement(n, k);
                std::vector<bool> is_hold(static_cast<std::size_t>(n), false);
                for (int h : hold) is_hold[static_cast<std::size_t>(h)] = true;
                Matrix train(g.rows(), n - k), test(g.rows(), k);
                int a = 0, b = 0;
                for (int j = 0; j < n; ++j)
                    (is_hold[static_cast<std::size_t>(j)] ? test.col(b++) : train.col(a++)) =
                        g.col(j);
                return std::make_pair(train, test);
            };
            auto [train_pos, test_pos] = split(group_pos);
            auto [train_neg, test_neg] = split(group_neg);
            Vector mu = Vector::Zero(group_pos.rows());
            if (cfg.center_rows) {
                mu = pooled_mean(train_pos, train_neg);
                train_pos.colwise() -= mu;
                train_neg.colwise() -= mu;
            }
            const auto dec_pos = decompose(train_pos, mesh, solver);
            const auto dec_neg = decompose(train_neg, mesh, solver);
            Matrix l_pos = dec_pos.L, l_neg = dec_neg.L;
            if (cfg.center_rows) {
                l_pos.colwise() += mu;
                l_neg.colwise() += mu;
            }
            GroupSample ga{l_pos, "pos", {}};
            GroupSample gb{l_neg, "neg", {}};
            const Vector p = permutation_t_test(ga, gb, cfg.n_perm,
                                                Rng(cfg.seed, gi * 1000 + 500 + rep).next_u64());
            const RoiMask mask = select_roi(p, cfg.p_threshold);
            AtrophyTemplate tpl;
            try {
                tpl = build_template(l_pos, l_neg, mask);
            } catch (const std::exception&) {
                // empty ROI or a degenerate control mean: no usable template
                err_sum += 0.5;
                continue;
            }
            std::vector<double> scores;
            std::vector<bool> labels;
            for (Index c = 0; c < test_pos.cols(); ++c) {
                scores.push_back(umi(test_pos.col(c), tpl).value);
                labels.push_back(true);
            }
            for (Index c = 0; c < test_neg.cols(); ++c) {
                scores.push_back(umi(test_neg.col(c), tpl).value);
                labels.push_back(false);
            }
            const auto r = roc(scores, labels, Orientation::higher_is_positive);
            const double npos = static_cast<double>(test_pos.cols());
            const double nneg = static_cast<double>(test_neg.cols());
            err_sum += ((1.0 - r.optimal_sensitivity) * npos + (1.0 - r.optimal_specificity) * nneg) /
                       (npos + nneg);
        }
        pt.holdout_error = err_sum / cfg.reps;
        points.push_back(pt);
    }
    return points;
}

inline void save_sweep_csv(const std::vector<SweepPoint>& points, const std::string& path) {
    std::ofstream out(path);
    require(out.good(), "cannot write sweep CSV: " + path);
    out << "lambda,rank_pos,rank_neg,sparse_norm_pos,sparse_norm_neg,holdout_error\n";
    char buf[160];
    for (const auto& p : points) {
        std::snprintf(buf, sizeof(buf), "%.17g,%d,%d,%.17g,%.17g,%.17g\n", p.lambda, p.rank_pos,
                      p.rank_neg, p.snorm_pos, p.snorm_neg, p.holdout_error);
        out << buf;
    }
    require(out.good(), "write failed: " + path);
}

// ---------------------------------------------------------------------------
// Full pipeline
// ---------------------------------------------------------------------------

struct PipelineResult {
    std::string output_dir;
    bool all_converged = true;
    nlohmann::json manifest;
};

/// End-to-end run driven by a config file: decompose the positive and
/// control groups, extract the ROI, build the atrophy template, score every
/// subject, run the requested statistics, and write a manifest with hashes
/// of every input and output. Identical inputs and seeds give bitwise
/// identical outputs.
inline PipelineResult run_pipeline(const std::string& config_path) {
    const IniConfig cfg = IniConfig::parse_file(config_path);
    namespace fs = std::filesystem;

    const std::string mesh_path = cfg.get_required("inputs.mesh");
    const std::string features_path = cfg.get_required("inputs.features");
    const std::string cohort_path = cfg.get_required("inputs.cohort");
    const std::string survival_path = cfg.get("inputs.survival");
    for (const auto& p : {mesh_path, features_path, cohort_path})
        require(fs::exists(p), "input file does not exist: " + p);
    if (!survival_path.empty())
        require(fs::exists(survival_path), "input file does not exist: " + survival_path);

    const std::string out_dir = cfg.get("output.dir", "umitk_out");
    fs::create_directories(out_dir);
    const std::string fmt = cfg.get("output.format", "bin");
    require(fmt == "bin" || fmt == "csv", "output.format must be bin or csv");

    nlohmann::json manifest;
    manifest["tool"] = "umitk";
    manifest["version"] = kVersion;
    manifest["config"] = cfg.values();
    manifest["config_hash"] = sha256_file(config_path);

    PipelineResult result;
    result.output_dir = out_dir;

    auto stage = [&](const std::string& name, auto&& fn) {
        try {
            fn();
        } catch (const std::exception& e) {
            std::ofstream marker(fs::path(out_dir) / "FAILED");
            marker << "stage: " << name << "\n" << e.what() << "\n";
            throw InputError("pipeline stage '" + name + "' failed: " + e.what());
        }
    };

    LoadedCohort data;
    stage("load", [&] { data = load_cohort(features_path, cohort_path, mesh_path); });
    manifest["inputs"] = {{"mesh", sha256_file(mesh_path)},
                          {"features", sha256_file(features_path)},
                          {"cohort", sha256_file(cohort_path)}};

    SolverConfig solver;
    solver.lambda = cfg.get_double("solver.lambda", -1.0);
    solver.alpha = cfg.get_double("solver.alpha", 1.1);
    solver.tau = cfg.get_double("solver.tau", 1e-3);
    solver.epsilon = cfg.get_double("solver.epsilon", -1.0);
    solver.rank_budget = static_cast<int>(cfg.get_int("solver.rank_budget", 50));
    solver.max_iters = static_cast<int>(cfg.get_int("solver.max_iters", 500));
    solver.seed = static_cast<std::uint64_t>(cfg.get_int("solver.seed", 0));

    const auto ext = fmt == "bin" ? std::string(".bin") : std::string(".csv");
    std::map<std::string, std::string> outputs;  // name -> path

    // Decompose the positive (AD baseline) and control (CU baseline) groups.
    NamedMatrix ad_base, cu_base;
    DecompositionResult dec_ad, dec_cu;
    stage("decompose", [&] {
        ad_base = submatrix(data.features, data.table, Group::AD, Timepoint::baseline);
        cu_base = submatrix(data.features, data.table, Group::CU, Timepoint::baseline);
        dec_ad = decompose(ad_base.values, data.mesh, solver);
        dec_cu = decompose(cu_base.values, data.mesh, solver);
        save_matrix({dec_ad.L, ad_base.subject_ids}, (fs::path(out_dir) / ("L_AD" + ext)).string());
        save_matrix({dec_cu.L, cu_base.subject_ids}, (fs::path(out_dir) / ("L_CU" + ext)).string());
        save_matrix({dec_ad.S, ad_base.subject_ids}, (fs::path(out_dir) / ("S_AD" + ext)).string());
        save_matrix({dec_cu.S, cu_base.subject_ids}, (fs::path(out_dir) / ("S_CU" + ext)).string());
        write_json(decomposition_diagnostics(dec_ad), (fs::path(out_dir) / "decompose_AD.json").string());
        write_json(decomposition_diagnostics(dec_cu), (fs::path(out_dir) / "decompose_CU.json").string());
        outputs["L_AD"] = (fs::path(out_dir) / ("L_AD" + ext)).string();
        outputs["L_CU"] = (fs::path(out_dir) / ("L_CU" + ext)).string();
        outputs["S_AD"] = (fs::path(out_dir) / ("S_AD" + ext)).string();
        outputs["S_CU"] = (fs::path(out_dir) / ("S_CU" + ext)).string();
        outputs["decompose_AD"] = (fs::path(out_dir) / "decompose_AD.json").string();
        outputs["decompose_CU"] = (fs::path(out_dir) / "decompose_CU.json").string();
        result.all_converged = dec_ad.converged && dec_cu.converged;
    });

    // ROI from the low-rank components.
    RoiMask mask;
    stage("roi", [&] {
        GroupSample ga{dec_ad.L, "AD", ad_base.subject_ids};
        GroupSample gb{dec_cu.L, "CU", cu_base.subject_ids};
        const int n_perm = static_cast<int>(cfg.get_int("roi.n_perm", 2000));
        const auto seed = static_cast<std::uint64_t>(cfg.get_int("roi.seed", 7));
        const Vector p = permutation_t_test(ga, gb, n_perm, seed);
        if (cfg.get("roi.method", "permutation") == "fdr")
            mask = fdr_select(p, cfg.get_double("roi.q", 1e-4));
        else
            mask = select_roi(p, cfg.get_double("roi.p_threshold", 1e-3));
        require(mask.count() > 0, "ROI selection is empty; relax roi.p_threshold");
        save_roi_csv(mask, (fs::path(out_dir) / "roi.csv").string());
        Vector sel(data.mesh.vertex_count);
        for (Index q = 0; q < sel.size(); ++q)
            sel(q) = mask.selected[static_cast<std::size_t>(q)] ? 1.0 : 0.0;
        save_overlay(data.mesh, sel, (fs::path(out_dir) / "roi_overlay.txt").string());
        save_overlay(data.mesh, mask.p_values, (fs::path(out_dir) / "p_overlay.txt").string());
        outputs["roi"] = (fs::path(out_dir) / "roi.csv").string();
        outputs["roi_overlay"] = (fs::path(out_dir) / "roi_overlay.txt").string();
        outputs["p_overlay"] = (fs::path(out_dir) / "p_overlay.txt").string();
    });

    AtrophyTemplate tpl;
    stage("template", [&] {
        tpl = build_template(dec_ad.L, dec_cu.L, mask);
        save_template(tpl, (fs::path(out_dir) / "template.json").string());
        outputs["template"] = (fs::path(out_dir) / "template.json").string();
    });

    // Score every cohort row against the template (raw features).
    std::map<std::string, std::map<std::string, double>> umi_by_subject;  // subject -> timepoint -> umi
    stage("umi", [&] {
        std::vector<UmiScore> scores;
        for (const auto& row : data.table.rows) {
            auto s = umi(data.features.values.col(row.feature_column), tpl,
                         row.subject_id + "/" + to_string(row.timepoint));
            umi_by_subject[row.subject_id][to_string(row.timepoint)] = s.value;
            scores.push_back(std::move(s));
        }
        save_umi_csv(scores, (fs::path(out_dir) / "umi_scores.csv").string());
        outputs["umi_scores"] = (fs::path(out_dir) / "umi_scores.csv").string();
    });

    stage("stats", [&] {
        nlohmann::json stats;
        const double reduction = cfg.get_double("stats.reduction", 0.25);
        const double power = cfg.get_double("stats.power", 0.8);
        const double alpha = cfg.get_double("stats.alpha", 0.05);

        for (Group g : {Group::AD, Group::MCI, Group::CU}) {
            PairedSeries series;
            for (const auto* row : data.table.rows_of(g, Timepoint::baseline)) {
                const auto& per_tp = umi_by_subject[row->subject_id];
                auto it = per_tp.find("m24");
                if (it == per_tp.end()) continue;
                series.baseline.push_back(per_tp.at("baseline"));
                series.followup.push_back(it->second);
                series.subject_ids.push_back(row->subject_id);
            }
            if (series.size() < 2) continue;
            nlohmann::json gj;
            const auto t = paired_t(series);
            gj["paired_t"] = {{"t", t.t}, {"p", t.p}, {"df", t.df}};
            gj["effect_size"] = cohens_d_paired(series);
            try {
                const auto ss = min_sample_size(series, reduction, power, alpha);
                gj["min_sample_size"] = {{"n", ss.n},
                                         {"C", ss.c},
                                         {"sigma", ss.sigma},
                                         {"mean_change", ss.mean_change},
                                         {"annual_change", ss.annual_change}};
            } catch (const NumericError& e) {
                gj["min_sample_size"] = {{"error", e.what()}};
            }
            // Correlation of UMI change with clinical score changes.
            for (const auto& score_name : kScoreNames) {
                std::vector<double> dumi, dscore;
                for (const auto* row : data.table.rows_of(g, Timepoint::baseline)) {
                    const auto* m24_row = [&]() -> const CohortRow* {
                        for (const auto* r2 : data.table.rows_of(g, Timepoint::m24))
                            if (r2->subject_id == row->subject_id) return r2;
                        return nullptr;
                    }();
                    if (!m24_row) continue;
                    auto b = row->scores.find(score_name);
                    auto f = m24_row->scores.find(score_name);
                    if (b == row->scores.end() || f == m24_row->scores.end()) continue;
                    const auto& per_tp = umi_by_subject[row->subject_id];
                    if (!per_tp.count("m24")) continue;
                    dumi.push_back(per_tp.at("m24") - per_tp.at("baseline"));
                    dscore.push_back(f->second - b->second);
                }
                if (dumi.size() >= 3 && !all_equal(dumi) && !all_equal(dscore)) {
                    const auto pr = pearson(dumi, dscore);
                    gj["pearson"][score_name] = {
                        {"r", pr.r}, {"ci", {pr.ci_lo, pr.ci_hi}}, {"p", pr.p}};
                }
            }
            stats["longitudinal"][to_string(g)] = gj;
        }

        // Baseline AD vs CU separation.
        {
            std::vector<double> scores;
            std::vector<bool> labels;
            for (const auto* row : data.table.rows_of(Group::AD, Timepoint::baseline)) {
                scores.push_back(umi_by_subject[row->subject_id].at("baseline"));
                labels.push_back(true);
            }
            for (const auto* row : data.table.rows_of(Group::CU, Timepoint::baseline)) {
                scores.push_back(umi_by_subject[row->subject_id].at("baseline"));
                labels.push_back(false);
            }
            const auto r = roc(scores, labels, Orientation::higher_is_positive);
            stats["ad_vs_cu_roc"] = {{"auc", r.auc},
                                     {"auc_ci", {r.auc_ci_lo, r.auc_ci_hi}},
                                     {"cutoff", r.optimal_cutoff},
                                     {"sensitivity", r.optimal_sensitivity},
                                     {"specificity", r.optimal_specificity}};
        }

        // Survival: classify MCI by the UMI ROC cutoff, then Cox / KM / log-rank.
        if (!survival_path.empty()) {
            std::ifstream in(survival_path);
            require(in.good(), "cannot open survival CSV: " + survival_path);
            std::string line;
            require(static_cast<bool>(std::getline(in, line)), "survival CSV empty");
            std::map<std::string, std::pair<double, bool>> by_subject;
            while (std::getline(in, line)) {
                if (!line.empty() && line.back() == '\r') line.pop_back();
                if (line.empty()) continue;
                const auto f = detail::split_csv_line(line);
                require(f.size() >= 3, "survival CSV row needs subject_id,time,event: " + line);
                by_subject[f[0]] = {detail::parse_double(f[1], "survival time"),
                                    detail::parse_double(f[2], "survival event") != 0.0};
            }
            std::vector<double> scores;
            std::vector<bool> conv;
            std::vector<std::string> ids;
            for (const auto* row : data.table.rows_of(Group::MCI, Timepoint::baseline)) {
                auto it = by_subject.find(row->subject_id);
                if (it == by_subject.end()) continue;
                scores.push_back(umi_by_subject[row->subject_id].at("baseline"));
                conv.push_back(it->second.second);
                ids.push_back(row->subject_id);
            }
            require(scores.size() >= 4, "survival analysis needs MCI subjects with records");
            const auto r = roc(scores, conv, Orientation::higher_is_positive);
            stats["mci_conversion_roc"] = {{"auc", r.auc},
                                           {"auc_ci", {r.auc_ci_lo, r.auc_ci_hi}},
                                           {"cutoff", r.optimal_cutoff}};
            std::vector<SurvivalRecord> recs;
            std::vector<SurvivalRecord> pos, neg;
            for (std::size_t i = 0; i < ids.size(); ++i) {
                SurvivalRecord rec;
                rec.time = by_subject[ids[i]].first;
                rec.event = by_subject[ids[i]].second;
                rec.marker_positive = scores[i] >= r.optimal_cutoff;
                recs.push_back(rec);
                (rec.marker_positive ? pos : neg).push_back(rec);
            }
            try {
                const auto cox = cox_univariate(recs);
                stats["cox"] = {{"beta", cox.beta},
                                {"se", cox.se},
                                {"hr", cox.hr},
                                {"hr_ci", {cox.hr_ci_lo, cox.hr_ci_hi}},
                                {"p", cox.p},
                                {"events", cox.n_events}};
            } catch (const NumericError& e) {
                stats["cox"] = {{"error", e.what()}};
            }
            const auto lr = log_rank(pos, neg);
            stats["log_rank"] = {{"chi2", lr.chi2}, {"p", lr.p}};
            auto km_csv = [&](const std::vector<SurvivalRecord>& group, const std::string& name) {
                const auto curve = kaplan_meier(group);
                std::ofstream out(fs::path(out_dir) / (name + ".csv"));
                out << "time,at_risk,events,survival,ci_lo,ci_hi\n";
                char buf[200];
                for (const auto& st : curve.steps) {
                    std::snprintf(buf, sizeof(buf), "%.17g,%d,%d,%.17g,%.17g,%.17g\n", st.time,
                                  st.at_risk, st.events, st.survival, st.ci_lo, st.ci_hi);
                    out << buf;
                }
                outputs[name] = (fs::path(out_dir) / (name + ".csv")).string();
            };
            if (!pos.empty()) km_csv(pos, "km_marker_positive");
            if (!neg.empty()) km_csv(neg, "km_marker_negative");
            manifest["inputs"]["survival"] = sha256_file(survival_path);
        }

        write_json(stats, (fs::path(out_dir) / "stats.json").string());
        outputs["stats"] = (fs::path(out_dir) / "stats.json").string();
    });

    manifest["solver"] = {{"converged_ad", dec_ad.converged},
                          {"converged_cu", dec_cu.converged},
                          {"iters_ad", dec_ad.iters},
                          {"iters_cu", dec_cu.iters},
                          {"loop_full_svd_calls", dec_ad.svd_counts.loop_full_calls +
                                                      dec_cu.svd_counts.loop_full_calls}};
    nlohmann::json out_hashes;
    for (const auto& [name, path] : outputs) out_hashes[name] = sha256_file(path);
    manifest["outputs"] = out_hashes;
    write_json(manifest, (fs::path(out_dir) / "manifest.json").string());
    result.manifest = manifest;
    return result;
}

}  // namespace umitk
