#pragma once

#include "umitk/common.hpp"
#include "umitk/rng.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace umitk {

constexpr double kZ95 = 1.959963984540054;  // two-sided 95% normal quantile

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double sample_sd(const std::vector<double>& v) {
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

inline bool all_equal(const std::vector<double>& v) {
    for (double x : v)
        if (x != v.front()) return false;
    return true;
}

inline double student_t_two_sided_p(double t, double df) {
    if (!std::isfinite(t)) return 0.0;
    boost::math::students_t dist(df);
    return 2.0 * boost::math::cdf(dist, -std::abs(t));
}

// ---------------------------------------------------------------------------
// Paired comparisons and effect sizes
// ---------------------------------------------------------------------------

struct PairedSeries {
    std::vector<double> baseline;
    std::vector<double> followup;
    std::vector<std::string> subject_ids;  // optional

    int size() const { return static_cast<int>(baseline.size()); }
    std::vector<double> changes() const {
        std::vector<double> d(baseline.size());
        for (std::size_t i = 0; i < baseline.size(); ++i) d[i] = followup[i] - baseline[i];
        return d;
    }
    void validate() const {
        require(baseline.size() == followup.size(), "paired series lengths differ");
        require(baseline.size() >= 2, "paired series needs at least 2 subjects");
    }
};

struct PairedTResult {
    double t = 0.0;
    double p = 1.0;
    int df = 0;
    bool degenerate = false;  // zero-variance differences with nonzero shift
};

inline PairedTResult paired_t(const PairedSeries& series) {
    series.validate();
    const auto d = series.changes();
    PairedTResult res;
    res.df = static_cast<int>(d.size()) - 1;
    if (all_equal(d)) {
        if (d.front() == 0.0) return res;  // t = 0, p = 1
        res.degenerate = true;
        res.t = d.front() > 0 ? std::numeric_limits<double>::infinity()
                              : -std::numeric_limits<double>::infinity();
        res.p = 0.0;
        return res;
    }
    const double m = mean_of(d);
    const double sd = sample_sd(d);
    res.t = m / (sd / std::sqrt(static_cast<double>(d.size())));
    res.p = student_t_two_sided_p(res.t, res.df);
    return res;
}

inline double cohens_d_paired(const PairedSeries& series) {
    series.validate();
    const auto d = series.changes();
    if (all_equal(d)) throw NumericError("cohens_d: zero standard deviation of differences");
    return mean_of(d) / sample_sd(d);
}

inline double cohens_d_independent(const std::vector<double>& a, const std::vector<double>& b) {
    require(a.size() >= 2 && b.size() >= 2, "cohens_d: each group needs at least 2 values");
    if (all_equal(a) && all_equal(b)) throw NumericError("cohens_d: zero pooled standard deviation");
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double va = sample_sd(a) * sample_sd(a);
    const double vb = sample_sd(b) * sample_sd(b);
    const double pooled = std::sqrt(((na - 1) * va + (nb - 1) * vb) / (na + nb - 2));
    if (pooled == 0.0) throw NumericError("cohens_d: zero pooled standard deviation");
    return (mean_of(a) - mean_of(b)) / pooled;
}

// ---------------------------------------------------------------------------
// Minimum sample size (two-arm longitudinal power rule)
// ---------------------------------------------------------------------------

struct SampleSizeResult {
    long long n = 0;        // per-arm minimum sample size
    double c = 0.0;         // 2*(z_{1-a/2} + z_power)^2
    double sigma = 0.0;     // SD of per-subject changes
    double mean_change = 0.0;
    double annual_change = 0.0;
    double detectable_effect = 0.0;
};

inline double power_constant(double power, double alpha) {
    require(power > 0.0 && power < 1.0, "power must lie in (0,1)");
    require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0,1)");
    boost::math::normal norm;
    const double z = boost::math::quantile(norm, 1.0 - alpha / 2.0) +
                     boost::math::quantile(norm, power);
    return 2.0 * z * z;
}

/// Minimum per-arm sample size to detect `reduction` of the mean annual
/// change at the given power / two-sided alpha. The observation interval is
/// converted to annual change by `annualization` (0.5 for 24-month data).
inline SampleSizeResult min_sample_size(const PairedSeries& series, double reduction, double power,
                                        double alpha, double annualization = 0.5) {
    series.validate();
    require(reduction > 0.0 && reduction <= 1.0, "reduction must lie in (0,1]");
    require(annualization > 0.0, "annualization factor must be positive");
    const auto d = series.changes();
    SampleSizeResult res;
    res.c = power_constant(power, alpha);
    res.mean_change = mean_of(d);
    if (res.mean_change == 0.0)
        throw NumericError("min_sample_size: zero mean change implies an infinite sample size");
    res.sigma = all_equal(d) ? 0.0 : sample_sd(d);
    res.annual_change = res.mean_change * annualization;
    res.detectable_effect = reduction * std::abs(res.annual_change);
    res.n = static_cast<long long>(
        std::ceil(res.c * res.sigma * res.sigma / (res.detectable_effect * res.detectable_effect)));
    return res;
}

// ---------------------------------------------------------------------------
// ANOVA and chi-square
// ---------------------------------------------------------------------------

struct AnovaResult {
    double f = 0.0;
    double p = 1.0;
    int df1 = 0, df2 = 0;
};

inline AnovaResult anova_oneway(const std::vector<std::vector<double>>& groups) {
    require(groups.size() >= 2, "anova: need at least 2 groups");
    int total = 0;
    double grand = 0.0;
    for (const auto& g : groups) {
        require(g.size() >= 2, "anova: each group needs at least 2 values");
        for (double x : g) grand += x;
        total += static_cast<int>(g.size());
    }
    grand /= static_cast<double>(total);
    double ssb = 0.0, ssw = 0.0;
    for (const auto& g : groups) {
        const double gm = mean_of(g);
        ssb += static_cast<double>(g.size()) * (gm - grand) * (gm - grand);
        for (double x : g) ssw += (x - gm) * (x - gm);
    }
    AnovaResult res;
    res.df1 = static_cast<int>(groups.size()) - 1;
    res.df2 = total - static_cast<int>(groups.size());
    if (ssw == 0.0) {
        if (ssb == 0.0) return res;  // F = 0 convention
        res.f = std::numeric_limits<double>::infinity();
        res.p = 0.0;
        return res;
    }
    res.f = (ssb / res.df1) / (ssw / res.df2);
    boost::math::fisher_f dist(res.df1, res.df2);
    res.p = boost::math::cdf(boost::math::complement(dist, res.f));
    return res;
}

struct Chi2Result {
    double chi2 = 0.0;
    double p = 1.0;
};

/// Pearson chi-square on a 2x2 count table, 1 df, no continuity correction.
inline Chi2Result chi_square_2x2(double a, double b, double c, double d) {
    require(a >= 0 && b >= 0 && c >= 0 && d >= 0, "chi_square: negative count");
    const double n = a + b + c + d;
    Chi2Result res;
    const double r1 = a + b, r2 = c + d, c1 = a + c, c2 = b + d;
    if (r1 == 0 || r2 == 0 || c1 == 0 || c2 == 0 || n == 0) return res;  // defined as 0
    const double num = a * d - b * c;
    res.chi2 = n * num * num / (r1 * r2 * c1 * c2);
    boost::math::chi_squared dist(1);
    res.p = boost::math::cdf(boost::math::complement(dist, res.chi2));
    return res;
}

// ---------------------------------------------------------------------------
// ROC analysis
// ---------------------------------------------------------------------------

enum class Orientation { higher_is_positive, lower_is_positive };

struct RocResult {
    std::vector<double> thresholds;     // distinct observed scores
    std::vector<double> sensitivities;  // aligned with thresholds
    std::vector<double> specificities;
    double auc = 0.0;
    double auc_ci_lo = 0.0, auc_ci_hi = 1.0;  // DeLong 95% interval
    double optimal_cutoff = 0.0;              // nearest point to (0,1)
    double optimal_sensitivity = 0.0, optimal_specificity = 0.0;
    Orientation orientation = Orientation::higher_is_positive;
};

/// Empirical ROC over all distinct score thresholds. AUC is computed by
/// midrank placements (identical to concordant-pair counting with half
/// credit for ties); the CI uses the DeLong placement variance.
inline RocResult roc(const std::vector<double>& scores, const std::vector<bool>& labels,
                     Orientation orientation = Orientation::higher_is_positive) {
    require(scores.size() == labels.size(), "roc: scores and labels differ in length");
    std::vector<double> pos, neg;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        require(std::isfinite(scores[i]), "roc: non-finite score");
        (labels[i] ? pos : neg).push_back(scores[i]);
    }
    require(!pos.empty() && !neg.empty(), "roc: both classes must be present");
    const double sign = orientation == Orientation::higher_is_positive ? 1.0 : -1.0;

    const double npos = static_cast<double>(pos.size());
    const double nneg = static_cast<double>(neg.size());

    // Placements: how each case ranks among controls (and vice versa).
    std::vector<double> v10(pos.size()), v01(neg.size());
    double total = 0.0;
    for (std::size_t i = 0; i < pos.size(); ++i) {
        double c = 0.0;
        for (double s : neg) {
            if (sign * pos[i] > sign * s)
                c += 1.0;
            else if (pos[i] == s)
                c += 0.5;
        }
        total += c;
        v10[i] = c / nneg;
    }
    for (std::size_t j = 0; j < neg.size(); ++j) {
        double c = 0.0;
        for (double s : pos) {
            if (sign * s > sign * neg[j])
                c += 1.0;
            else if (s == neg[j])
                c += 0.5;
        }
        v01[j] = c / npos;
    }

    RocResult res;
    res.orientation = orientation;
    res.auc = total / (npos * nneg);
    const double s10 = pos.size() > 1 ? sample_sd(v10) * sample_sd(v10) : 0.0;
    const double s01 = neg.size() > 1 ? sample_sd(v01) * sample_sd(v01) : 0.0;
    const double se = std::sqrt(s10 / npos + s01 / nneg);
    res.auc_ci_lo = std::max(0.0, res.auc - kZ95 * se);
    res.auc_ci_hi = std::min(1.0, res.auc + kZ95 * se);

    // Curve over distinct thresholds, most-positive-prediction first.
    std::vector<double> distinct(scores);
    std::sort(distinct.begin(), distinct.end(),
              [&](double x, double y) { return sign * x > sign * y; });
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    double best = std::numeric_limits<double>::infinity();
    for (double t : distinct) {
        double tp = 0, fp = 0;
        for (double s : pos)
            if (sign * s >= sign * t) ++tp;
        for (double s : neg)
            if (sign * s >= sign * t) ++fp;
        const double sens = tp / npos;
        const double spec = 1.0 - fp / nneg;
        res.thresholds.push_back(t);
        res.sensitivities.push_back(sens);
        res.specificities.push_back(spec);
        const double d2 = (1.0 - sens) * (1.0 - sens) + (1.0 - spec) * (1.0 - spec);
        if (d2 < best - 1e-15 ||
            (std::abs(d2 - best) <= 1e-15 && sens > res.optimal_sensitivity)) {
            best = d2;
            res.optimal_cutoff = t;
            res.optimal_sensitivity = sens;
            res.optimal_specificity = spec;
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// Survival analysis
// ---------------------------------------------------------------------------

struct SurvivalRecord {
    double time = 0.0;  // months
    bool event = false;
    bool marker_positive = false;
};

struct CoxResult {
    double beta = 0.0;
    double se = 0.0;
    double hr = 1.0;
    double hr_ci_lo = 0.0, hr_ci_hi = 0.0;
    double p = 1.0;
    int n_events = 0;
    int iterations = 0;
};

namespace detail {

struct CoxTies {
    double n1 = 0, n0 = 0;  // at risk, by marker
    double d = 0, s = 0;    // events at this time, events with positive marker
};

inline std::vector<CoxTies> cox_event_table(const std::vector<SurvivalRecord>& records) {
    std::map<double, CoxTies> table;
    for (const auto& r : records) {
        require(r.time >= 0.0 && std::isfinite(r.time), "survival: invalid time");
        if (r.event) {
            auto& t = table[r.time];
            t.d += 1;
            if (r.marker_positive) t.s += 1;
        }
    }
    std::vector<CoxTies> out;
    for (auto& [time, t] : table) {
        for (const auto& r : records) {
            if (r.time >= time) (r.marker_positive ? t.n1 : t.n0) += 1;
        }
        out.push_back(t);
    }
    return out;
}

inline double cox_loglik_d1(const std::vector<CoxTies>& table, double beta) {
    const double eb = std::exp(beta);
    double g = 0.0;
    for (const auto& t : table) g += t.s - t.d * (t.n1 * eb) / (t.n1 * eb + t.n0);
    return g;
}

inline double cox_loglik_d2(const std::vector<CoxTies>& table, double beta) {
    const double eb = std::exp(beta);
    double h = 0.0;
    for (const auto& t : table) {
        const double denom = t.n1 * eb + t.n0;
        h -= t.d * (t.n1 * t.n0 * eb) / (denom * denom);
    }
    return h;
}

}  // namespace detail

/// Univariate Cox proportional hazards fit for a binary marker, Breslow tie
/// handling, safeguarded Newton iteration on the partial likelihood.
inline CoxResult cox_univariate(const std::vector<SurvivalRecord>& records) {
    require(!records.empty(), "cox: no records");
    const auto table = detail::cox_event_table(records);
    CoxResult res;
    for (const auto& t : table) res.n_events += static_cast<int>(t.d);
    if (res.n_events == 0) throw NumericError("cox: no events observed");

    bool any_mixed = false;
    for (const auto& t : table)
        if (t.n1 > 0 && t.n0 > 0) any_mixed = true;
    if (!any_mixed)
        throw NumericError("cox: marker is constant within every risk set; beta is not identifiable");

    // The partial log-likelihood is concave; its derivative is decreasing.
    // A sign change of the derivative inside [-bound, bound] certifies an
    // interior maximum, otherwise the likelihood is monotone and the MLE
    // diverges (classic separation for a binary covariate).
    const double bound = 35.0;
    if (detail::cox_loglik_d1(table, bound) > 0.0)
        throw NumericError(
            "cox: monotone partial likelihood, beta diverges to +inf "
            "(all observed risk favors the positive marker); no finite hazard ratio");
    if (detail::cox_loglik_d1(table, -bound) < 0.0)
        throw NumericError(
            "cox: monotone partial likelihood, beta diverges to -inf "
            "(all observed risk favors the negative marker); no finite hazard ratio");

    double lo = -bound, hi = bound, beta = 0.0;
    for (int it = 0; it < 200; ++it) {
        const double g = detail::cox_loglik_d1(table, beta);
        const double h = detail::cox_loglik_d2(table, beta);
        res.iterations = it + 1;
        if (std::abs(g) < 1e-12 * (1.0 + std::abs(h))) break;
        if (g > 0)
            lo = beta;
        else
            hi = beta;
        double next = h < 0.0 ? beta - g / h : std::numeric_limits<double>::quiet_NaN();
        if (!std::isfinite(next) || next <= lo || next >= hi) next = 0.5 * (lo + hi);  // bisect
        beta = next;
    }
    res.beta = beta;
    const double h = detail::cox_loglik_d2(table, beta);
    if (!(h < 0.0)) throw NumericError("cox: singular information at the optimum");
    res.se = std::sqrt(-1.0 / h);
    res.hr = std::exp(beta);
    res.hr_ci_lo = std::exp(beta - kZ95 * res.se);
    res.hr_ci_hi = std::exp(beta + kZ95 * res.se);
    boost::math::normal norm;
    res.p = 2.0 * boost::math::cdf(boost::math::complement(norm, std::abs(beta) / res.se));
    return res;
}

struct KmStep {
    double time = 0.0;
    int at_risk = 0;
    int events = 0;
    double survival = 1.0;
    double ci_lo = 1.0, ci_hi = 1.0;  // Greenwood, log-minus-log
};

struct KmCurve {
    std::vector<KmStep> steps;  // one per distinct event time
    int n_subjects = 0;
    int n_events = 0;

    double survival_at(double t) const {
        double s = 1.0;
        for (const auto& st : steps) {
            if (st.time <= t)
                s = st.survival;
            else
                break;
        }
        return s;
    }
};

/// Product-limit estimator with right censoring. Subjects censored at a tied
/// time are counted at risk for that time's events.
inline KmCurve kaplan_meier(const std::vector<SurvivalRecord>& records) {
    require(!records.empty(), "kaplan_meier: no records");
    std::map<double, int> event_counts;
    for (const auto& r : records) {
        require(r.time >= 0.0 && std::isfinite(r.time), "survival: invalid time");
        if (r.event) event_counts[r.time] += 1;
    }
    KmCurve curve;
    curve.n_subjects = static_cast<int>(records.size());
    double s = 1.0;
    double greenwood = 0.0;
    for (const auto& [time, d] : event_counts) {
        int n = 0;
        for (const auto& r : records)
            if (r.time >= time) ++n;
        KmStep step;
        step.time = time;
        step.at_risk = n;
        step.events = d;
        s *= 1.0 - static_cast<double>(d) / n;
        step.survival = s;
        curve.n_events += d;
        if (n > d) {
            greenwood += static_cast<double>(d) / (static_cast<double>(n) * (n - d));
        } else {
            greenwood = std::numeric_limits<double>::infinity();
        }
        if (s > 0.0 && s < 1.0 && std::isfinite(greenwood)) {
            const double sig = std::sqrt(greenwood) / std::abs(std::log(s));
            const double ll = std::log(-std::log(s));
            step.ci_lo = std::exp(-std::exp(ll + kZ95 * sig));
            step.ci_hi = std::exp(-std::exp(ll - kZ95 * sig));
        } else {
            step.ci_lo = s;
            step.ci_hi = s;
        }
        curve.steps.push_back(step);
    }
    return curve;
}

struct LogRankResult {
    double chi2 = 0.0;
    double p = 1.0;
    double observed_pos = 0.0;  // events observed in the positive group
    double expected_pos = 0.0;
};

inline LogRankResult log_rank(const std::vector<SurvivalRecord>& group_pos,
                              const std::vector<SurvivalRecord>& group_neg) {
    require(!group_pos.empty() && !group_neg.empty(), "log_rank: empty group");
    std::vector<SurvivalRecord> all;
    for (auto r : group_pos) {
        r.marker_positive = true;
        all.push_back(r);
    }
    for (auto r : group_neg) {
        r.marker_positive = false;
        all.push_back(r);
    }
    const auto table = detail::cox_event_table(all);
    LogRankResult res;
    double var = 0.0;
    for (const auto& t : table) {
        const double n = t.n1 + t.n0;
        res.observed_pos += t.s;
        res.expected_pos += t.d * t.n1 / n;
        if (n > 1.0)
            var += t.d * (t.n1 / n) * (1.0 - t.n1 / n) * (n - t.d) / (n - 1.0);
    }
    if (var > 0.0) {
        const double diff = res.observed_pos - res.expected_pos;
        res.chi2 = diff * diff / var;
        boost::math::chi_squared dist(1);
        res.p = boost::math::cdf(boost::math::complement(dist, res.chi2));
    }
    return res;
}

// ---------------------------------------------------------------------------
// Correlation
// ---------------------------------------------------------------------------

struct PearsonResult {
    double r = 0.0;
    double ci_lo = -1.0, ci_hi = 1.0;  // Fisher z interval
    double p = 1.0;
    int n = 0;
};

inline PearsonResult pearson(const std::vector<double>& x, const std::vector<double>& y) {
    require(x.size() == y.size(), "pearson: length mismatch");
    require(x.size() >= 3, "pearson: need at least 3 pairs");
    if (all_equal(x) || all_equal(y)) throw NumericError("pearson: zero variance input");
    const double mx = mean_of(x), my = mean_of(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    PearsonResult res;
    res.n = static_cast<int>(x.size());
    res.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    if (std::abs(res.r) == 1.0) {
        res.ci_lo = res.ci_hi = res.r;
        res.p = 0.0;
        return res;
    }
    const double z = std::atanh(res.r);
    const double half = kZ95 / std::sqrt(static_cast<double>(res.n) - 3.0);
    res.ci_lo = std::tanh(z - half);
    res.ci_hi = std::tanh(z + half);
    const double t = res.r * std::sqrt((res.n - 2.0) / (1.0 - res.r * res.r));
    res.p = student_t_two_sided_p(t, res.n - 2.0);
    return res;
}

// ---------------------------------------------------------------------------
// Quantiles and cut-point enrichment
// ---------------------------------------------------------------------------

/// Linear-interpolation quantile with inclusive endpoints: pct 0 is the
/// minimum, pct 100 the maximum, interior values interpolate between order
/// statistics at rank pct/100*(n-1).
inline double percentile(std::vector<double> values, double pct) {
    require(!values.empty(), "percentile: empty input");
    require(pct >= 0.0 && pct <= 100.0, "percentile: pct outside [0,100]");
    std::sort(values.begin(), values.end());
    const double h = pct / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= values.size()) return values.back();
    const double frac = h - static_cast<double>(lo);
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

inline double enrichment_sample_size(double es, double es_prime, double n) {
    require(es_prime != 0.0, "enrichment: zero enriched effect size");
    const double ratio = es / es_prime;
    return ratio * ratio * n;
}

struct EnrichmentRow {
    double pct = 0.0;
    double cutoff = 0.0;
    int n_subgroup = 0;
    double es_prime = 0.0;
    double n_prime = 0.0;
    double n_prime_ci_lo = 0.0, n_prime_ci_hi = 0.0;  // bootstrap percentile interval
    bool available = false;
};

/// Cut-point enrichment: for each percentile of the reference-score
/// distribution, keep subjects with score at or above the cutoff, recompute
/// the paired effect size of their change, and project the sample size
/// N' = (ES/ES')^2 * N needed to match the unenriched power. The bootstrap
/// resamples the enriched subgroup only.
inline std::vector<EnrichmentRow> enrichment(const std::vector<double>& scores,
                                             const PairedSeries& outcomes,
                                             const std::vector<double>& reference_scores,
                                             const std::vector<double>& percentiles,
                                             double n_unenriched, int n_boot = 1000,
                                             std::uint64_t seed = 0) {
    outcomes.validate();
    require(scores.size() == outcomes.baseline.size(), "enrichment: scores/outcomes mismatch");
    require(!reference_scores.empty(), "enrichment: empty reference population");
    const double es = cohens_d_paired(outcomes);

    std::vector<EnrichmentRow> rows;
    for (double pct : percentiles) {
        EnrichmentRow row;
        row.pct = pct;
        row.cutoff = percentile(reference_scores, pct);
        PairedSeries sub;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (scores[i] >= row.cutoff) {
                sub.baseline.push_back(outcomes.baseline[i]);
                sub.followup.push_back(outcomes.followup[i]);
            }
        }
        row.n_subgroup = sub.size();
        if (sub.size() < 2 || all_equal(sub.changes())) {
            rows.push_back(row);  // flagged unavailable
            continue;
        }
        row.es_prime = cohens_d_paired(sub);
        if (row.es_prime == 0.0) {
            rows.push_back(row);
            continue;
        }
        row.n_prime = enrichment_sample_size(es, row.es_prime, n_unenriched);
        std::vector<double> boot;
        boot.reserve(static_cast<std::size_t>(n_boot));
        const auto base_changes = sub.changes();
        for (int b = 0; b < n_boot; ++b) {
            Rng rng(seed, static_cast<std::uint64_t>(b) + 1);
            std::vector<double> resampled(base_changes.size());
            for (auto& v : resampled)
                v = base_changes[rng.below(base_changes.size())];
            if (all_equal(resampled)) continue;
            const double esb = mean_of(resampled) / sample_sd(resampled);
            if (esb == 0.0) continue;
            boot.push_back(enrichment_sample_size(es, esb, n_unenriched));
        }
        if (boot.size() >= 10) {
            row.n_prime_ci_lo = percentile(boot, 2.5);
            row.n_prime_ci_hi = percentile(boot, 97.5);
        } else {
            row.n_prime_ci_lo = row.n_prime_ci_hi = row.n_prime;
        }
        row.available = true;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace umitk
