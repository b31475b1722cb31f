#pragma once

#include "umitk/common.hpp"
#include "umitk/roi.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

namespace umitk {

/// Trained atrophy template: ROI vertices, the control-group low-rank mean
/// per ROI vertex, and the AD atrophy degree D_W as percent loss relative to
/// the control mean. Both D_W and per-subject degrees D_T use the same
/// percent convention, which makes the index dimensionless and invariant to
/// a common rescaling of all features.
struct AtrophyTemplate {
    RoiMask roi;
    std::vector<int> roi_vertices;  // ascending
    Vector cu_mean;                 // per ROI vertex, > 0
    Vector dw;                      // per ROI vertex (percent)
};

struct UmiScore {
    double value = 0.0;
    std::string subject_id;
    int roi_vertex_count = 0;
};

inline AtrophyTemplate build_template(const Matrix& l_ad, const Matrix& l_cu,
                                      const RoiMask& roi) {
    require(l_ad.rows() == l_cu.rows(), "build_template: vertex count mismatch");
    require(static_cast<Index>(roi.selected.size()) == l_cu.rows(),
            "build_template: ROI does not match matrices");
    AtrophyTemplate tpl;
    tpl.roi = roi;
    tpl.roi_vertices = roi.vertices();
    require(!tpl.roi_vertices.empty(), "build_template: empty ROI");
    const Index r = static_cast<Index>(tpl.roi_vertices.size());
    tpl.cu_mean.resize(r);
    tpl.dw.resize(r);
    for (Index i = 0; i < r; ++i) {
        const Index q = tpl.roi_vertices[static_cast<std::size_t>(i)];
        const double cu = l_cu.row(q).mean();
        const double ad = l_ad.row(q).mean();
        if (!(cu > 0.0))
            throw NumericError("build_template: control low-rank mean is not positive at vertex " +
                               std::to_string(q) +
                               " (features must be strictly positive distances)");
        tpl.cu_mean(i) = cu;
        tpl.dw(i) = 100.0 * (cu - ad) / cu;
    }
    return tpl;
}

/// Per-ROI-vertex individual atrophy degree: percent deficit of the subject's
/// features relative to the control low-rank mean.
inline Vector individual_degree(const Vector& features, const AtrophyTemplate& tpl) {
    require(features.size() > 0, "individual_degree: empty feature vector");
    Vector dt(tpl.cu_mean.size());
    for (Index i = 0; i < dt.size(); ++i) {
        const Index q = tpl.roi_vertices[static_cast<std::size_t>(i)];
        require(q < features.size(), "individual_degree: feature vector does not cover ROI vertex " +
                                         std::to_string(q));
        dt(i) = 100.0 * (tpl.cu_mean(i) - features(q)) / tpl.cu_mean(i);
    }
    return dt;
}

inline UmiScore umi(const Vector& features, const AtrophyTemplate& tpl,
                    const std::string& subject_id = {}) {
    const Vector dt = individual_degree(features, tpl);
    UmiScore score;
    score.subject_id = subject_id;
    score.roi_vertex_count = static_cast<int>(tpl.roi_vertices.size());
    score.value = dt.dot(tpl.dw) / 100.0;
    return score;
}

inline std::vector<UmiScore> umi_batch(const Matrix& features,
                                       const std::vector<std::string>& subject_ids,
                                       const AtrophyTemplate& tpl) {
    std::vector<UmiScore> scores;
    scores.reserve(static_cast<std::size_t>(features.cols()));
    for (Index c = 0; c < features.cols(); ++c)
        scores.push_back(umi(features.col(c), tpl,
                             c < static_cast<Index>(subject_ids.size())
                                 ? subject_ids[static_cast<std::size_t>(c)]
                                 : "col" + std::to_string(c)));
    return scores;
}

// --- template file (JSON) ----------------------------------------------------

inline void save_template(const AtrophyTemplate& tpl, const std::string& path) {
    nlohmann::json j;
    j["format"] = "umitk.template";
    j["format_version"] = 1;
    j["roi_vertices"] = tpl.roi_vertices;
    j["vertex_count"] = tpl.roi.selected.size();
    std::vector<double> cu(tpl.cu_mean.data(), tpl.cu_mean.data() + tpl.cu_mean.size());
    std::vector<double> dw(tpl.dw.data(), tpl.dw.data() + tpl.dw.size());
    j["cu_mean"] = cu;
    j["dw"] = dw;
    std::ofstream out(path);
    require(out.good(), "cannot write template: " + path);
    out << j.dump(2) << "\n";
    require(out.good(), "write failed: " + path);
}

inline AtrophyTemplate load_template(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open template: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw InputError("template is not valid JSON: " + path + ": " + e.what());
    }
    require(j.value("format", "") == "umitk.template", "not a template file: " + path);
    require(j.value("format_version", 0) == 1, "unsupported template version in " + path);
    AtrophyTemplate tpl;
    tpl.roi_vertices = j.at("roi_vertices").get<std::vector<int>>();
    const auto cu = j.at("cu_mean").get<std::vector<double>>();
    const auto dw = j.at("dw").get<std::vector<double>>();
    require(cu.size() == tpl.roi_vertices.size() && dw.size() == tpl.roi_vertices.size(),
            "template arrays disagree in length: " + path);
    tpl.cu_mean = Eigen::Map<const Vector>(cu.data(), static_cast<Index>(cu.size()));
    tpl.dw = Eigen::Map<const Vector>(dw.data(), static_cast<Index>(dw.size()));
    const int vertex_count = j.value("vertex_count", 0);
    tpl.roi.selected.assign(static_cast<std::size_t>(vertex_count), false);
    tpl.roi.p_values = Vector::Ones(vertex_count);
    for (int q : tpl.roi_vertices) {
        require(q >= 0 && q < vertex_count, "template ROI vertex out of range: " + path);
        tpl.roi.selected[static_cast<std::size_t>(q)] = true;
    }
    return tpl;
}

inline void save_umi_csv(const std::vector<UmiScore>& scores, const std::string& path) {
    std::ofstream out(path);
    require(out.good(), "cannot write UMI CSV: " + path);
    out << "subject_id,umi,roi_vertex_count\n";
    char buf[40];
    for (const auto& s : scores) {
        std::snprintf(buf, sizeof(buf), "%.17g", s.value);
        out << s.subject_id << "," << buf << "," << s.roi_vertex_count << "\n";
    }
    require(out.good(), "write failed: " + path);
}

}  // namespace umitk
