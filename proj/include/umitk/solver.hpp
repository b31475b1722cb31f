#pragma once

#include "umitk/common.hpp"
#include "umitk/mesh.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cassert>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace umitk {

/// Parameters of the factorized stable principal component pursuit solve.
/// Negative lambda / epsilon mean "derive the default from the data":
/// lambda = 1/sqrt(max(m,n)) and epsilon from the noise-ball rule below.
struct SolverConfig {
    double lambda = -1.0;       // sparsity weight
    double alpha = 1.1;         // beta growth factor, must be in (1,2)
    double tau = 1e-3;          // termination multiplier (threshold is tau*delta)
    double epsilon = -1.0;      // Frobenius noise-ball radius
    int rank_budget = 50;       // columns of U; clamped to min(m,n)
    int max_iters = 500;
    std::uint64_t seed = 0;     // reserved for randomized variants; initialization is deterministic
};

struct ObservationStats {
    double delta = 0.0;    // population standard deviation of all entries
    double sigma_l = 0.0;  // largest singular value
    Index m = 0;
    Index n = 0;
};

struct IterationRecord {
    int iter = 0;
    double objective = 0.0;    // nuclear norm of V + lambda * l1(S)
    double residual = 0.0;     // ||UV+S+N-A||_F / (||A||_F + 1)
    int rank_estimate = 0;     // singular values of V above 3*delta
    double sparse_norm = 0.0;  // entrywise l1 of S
    double step = 0.0;         // relative change of (UV, S), the termination metric
    double beta = 0.0;
};

/// Counts of SVD invocations, split by phase. The factorized updates keep
/// every in-loop SVD at m x r or r x n; a full m x n SVD is only permitted
/// at initialization, and `loop_full_calls` stays zero by construction.
struct SvdCounts {
    int init_calls = 0;
    int loop_calls = 0;
    int loop_full_calls = 0;       // in-loop SVDs of the full m x n size
    Index loop_max_min_dim = 0;    // largest min(rows,cols) seen inside the loop
};

struct DecompositionResult {
    Matrix U;  // m x r, orthonormal columns
    Matrix V;  // r x n
    Matrix L;  // U*V
    Matrix S;
    Matrix N;
    Matrix Y;  // final multiplier
    int iters = 0;
    bool converged = false;
    std::vector<IterationRecord> history;
    SolverConfig config;  // resolved values actually used
    ObservationStats stats;
    SvdCounts svd_counts;
};

namespace detail {

struct SvdProbe {
    SvdCounts* counts = nullptr;
    Index full_rows = 0, full_cols = 0;
    bool in_loop = false;

    void record(Index rows, Index cols) const {
        if (!counts) return;
        if (!in_loop) {
            ++counts->init_calls;
            return;
        }
        ++counts->loop_calls;
        counts->loop_max_min_dim = std::max(counts->loop_max_min_dim, std::min(rows, cols));
        if (rows >= full_rows && cols >= full_cols) ++counts->loop_full_calls;
    }
};

inline Eigen::BDCSVD<Matrix> thin_svd(const Matrix& M, const SvdProbe* probe) {
    if (probe) probe->record(M.rows(), M.cols());
    return Eigen::BDCSVD<Matrix>(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
}

/// Deterministic orthonormal completion: appends extra columns to Q by
/// Gram-Schmidt against canonical basis vectors in index order (two passes
/// for numerical robustness).
inline void complete_basis(Matrix& Q, Index want_cols) {
    const Index dim = Q.rows();
    Index have = Q.cols();
    Q.conservativeResize(Eigen::NoChange, want_cols);
    for (Index e = 0; e < dim && have < want_cols; ++e) {
        Vector v = Vector::Zero(dim);
        v(e) = 1.0;
        for (int pass = 0; pass < 2; ++pass)
            v -= Q.leftCols(have) * (Q.leftCols(have).transpose() * v);
        const double nrm = v.norm();
        if (nrm > 1e-6) {
            Q.col(have) = v / nrm;
            ++have;
        }
    }
    require(have == want_cols, "basis completion failed");
}

inline Matrix polar_orthobasis(const Matrix& Z, const SvdProbe* probe) {
    const Index r = Z.cols();
    auto svd = thin_svd(Z, probe);
    const Vector& sv = svd.singularValues();
    const double smax = sv.size() ? sv(0) : 0.0;
    const double tol = static_cast<double>(std::max(Z.rows(), Z.cols())) *
                       std::numeric_limits<double>::epsilon() * smax;
    Index k = 0;
    while (k < sv.size() && sv(k) > tol) ++k;
    if (k == r) return svd.matrixU() * svd.matrixV().transpose();
    // Rank-deficient: fix signs (largest-magnitude entry of each retained left
    // vector positive) and fill the null directions from the canonical basis.
    Matrix P = svd.matrixU().leftCols(k);
    Matrix Q = svd.matrixV().leftCols(k);
    for (Index j = 0; j < k; ++j) {
        Index imax = 0;
        P.col(j).cwiseAbs().maxCoeff(&imax);
        if (P(imax, j) < 0.0) {
            P.col(j) = -P.col(j);
            Q.col(j) = -Q.col(j);
        }
    }
    complete_basis(P, r);
    complete_basis(Q, r);
    return P * Q.transpose();
}

inline Matrix svt_impl(const Matrix& T, double mu, const SvdProbe* probe, Vector* values_out) {
    require(mu >= 0.0, "svt: negative threshold");
    auto svd = thin_svd(T, probe);
    Vector sv = (svd.singularValues().array() - mu).max(0.0);
    if (values_out) *values_out = sv;
    Index k = 0;
    while (k < sv.size() && sv(k) > 0.0) ++k;
    if (k == 0) return Matrix::Zero(T.rows(), T.cols());
    return svd.matrixU().leftCols(k) * sv.head(k).asDiagonal() *
           svd.matrixV().leftCols(k).transpose();
}

}  // namespace detail

/// Polar orthonormalization step for the basis update: U = P*Q^T from the
/// thin SVD of Z = G_L * V^T. Rank-deficient Z is completed deterministically
/// so U always has exactly Z.cols() orthonormal columns.
inline Matrix update_orthobasis(const Matrix& G_L, const Matrix& Vk) {
    return detail::polar_orthobasis(G_L * Vk.transpose(), nullptr);
}

/// Singular value thresholding: the proximal operator of mu * nuclear norm.
inline Matrix svt(const Matrix& T, double mu) { return detail::svt_impl(T, mu, nullptr, nullptr); }

/// Coefficient update: V = svt(U^T * G_L, 1/beta_next).
inline Matrix update_coefficients(const Matrix& U_next, const Matrix& G_L, double beta_next) {
    require(beta_next > 0.0, "update_coefficients: beta must be positive");
    return svt(U_next.transpose() * G_L, 1.0 / beta_next);
}

/// Projection of N_hat = (1/beta)Y + A - UV - S onto the Frobenius ball of
/// radius epsilon.
inline Matrix update_noise(const Matrix& Yk, const Matrix& A, const Matrix& UkVk, const Matrix& Sk,
                           double beta_k, double epsilon) {
    require(epsilon >= 0.0, "update_noise: negative epsilon");
    require(beta_k > 0.0, "update_noise: beta must be positive");
    Matrix nhat = (1.0 / beta_k) * Yk + A - UkVk - Sk;
    const double nrm = nhat.norm();
    if (nrm == 0.0) return nhat;
    const double scale = std::min(nrm, epsilon) / nrm;
    if (scale != 1.0) nhat *= scale;
    return nhat;
}

/// Sparse update: group shrink of G_S = (1/beta)Y + A - UV - N at threshold
/// lambda/beta.
inline Matrix update_sparse(const Matrix& Yk, const Matrix& A, const Matrix& UkVk,
                            const Matrix& N_next, double beta_k, double lambda,
                            const TriangleMesh& mesh, const VertexMap& map) {
    require(beta_k > 0.0, "update_sparse: beta must be positive");
    const Matrix G = (1.0 / beta_k) * Yk + A - UkVk - N_next;
    return local_shrink(G, lambda / beta_k, mesh, map);
}

/// Number of singular values of V strictly above 3*delta.
inline int effective_rank(const Matrix& V, double delta) {
    require(delta >= 0.0, "effective_rank: negative delta");
    if (V.size() == 0) return 0;
    Eigen::BDCSVD<Matrix> svd(V);
    int count = 0;
    for (Index i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()(i) > 3.0 * delta) ++count;
    return count;
}

inline double population_sd(const Matrix& A) {
    const double mean = A.mean();
    return std::sqrt((A.array() - mean).square().sum() / static_cast<double>(A.size()));
}

/// Data-derived defaults: lambda = 1/sqrt(max(m,n)), epsilon from the
/// noise-ball rule sqrt(min(m,n) + sqrt(8)*min(m,n)) * delta, rank budget
/// min(50, min(m,n)). Throws for an all-zero matrix, whose decomposition is
/// trivially L = S = N = 0.
inline std::pair<SolverConfig, ObservationStats> default_params(const Matrix& A) {
    require(A.size() > 0, "default_params: empty matrix");
    require(A.allFinite(), "default_params: non-finite entries");
    ObservationStats stats;
    stats.m = A.rows();
    stats.n = A.cols();
    stats.delta = population_sd(A);
    Eigen::BDCSVD<Matrix> svd(A);
    stats.sigma_l = svd.singularValues()(0);
    if (stats.sigma_l == 0.0)
        throw NumericError(
            "default_params: matrix is identically zero (beta_0 = 1.25/sigma_L is undefined); "
            "the decomposition is trivial: L = S = N = 0");
    const double mn = static_cast<double>(std::min(A.rows(), A.cols()));
    SolverConfig cfg;
    cfg.lambda = 1.0 / std::sqrt(static_cast<double>(std::max(A.rows(), A.cols())));
    cfg.epsilon = std::sqrt(mn + std::sqrt(8.0) * mn) * stats.delta;
    cfg.rank_budget = static_cast<int>(std::min<Index>(50, std::min(A.rows(), A.cols())));
    return {cfg, stats};
}

/// Factorized SPCP with the local-continuity sparse constraint.
///
/// Per iteration: project the noise onto the epsilon-ball, group-shrink the
/// sparse component, refresh the orthonormal basis by a polar step, threshold
/// the coefficients' singular values, then update the multiplier; beta grows
/// geometrically. Stops when the relative change of (UV, S) drops to
/// tau*delta, or at max_iters with converged=false. All SVDs inside the loop
/// are of size m x r or r x n.
inline DecompositionResult decompose(const Matrix& A, const TriangleMesh& mesh,
                                     const SolverConfig& cfg_in,
                                     const VertexMap* map_in = nullptr) {
    require(A.size() > 0, "decompose: empty matrix");
    require(A.allFinite(), "decompose: non-finite entries in input");
    const Index m = A.rows();
    const Index n = A.cols();
    const VertexMap map = map_in ? *map_in : VertexMap::identity(static_cast<int>(m));
    check_mesh_matrix(A, mesh, map);

    DecompositionResult res;
    res.stats.m = m;
    res.stats.n = n;
    res.stats.delta = population_sd(A);

    SolverConfig cfg = cfg_in;
    if (cfg.lambda < 0.0) cfg.lambda = 1.0 / std::sqrt(static_cast<double>(std::max(m, n)));
    if (cfg.epsilon < 0.0) {
        const double mn = static_cast<double>(std::min(m, n));
        cfg.epsilon = std::sqrt(mn + std::sqrt(8.0) * mn) * res.stats.delta;
    }
    cfg.rank_budget = static_cast<int>(std::min<Index>(cfg.rank_budget, std::min(m, n)));
    require(cfg.lambda > 0.0, "decompose: lambda must be positive");
    require(cfg.alpha > 1.0 && cfg.alpha < 2.0, "decompose: alpha must lie in (1,2)");
    require(cfg.tau > 0.0, "decompose: tau must be positive");
    require(cfg.rank_budget >= 1, "decompose: rank budget must be positive");
    require(cfg.max_iters >= 1, "decompose: max_iters must be positive");
    res.config = cfg;

    const Index r = cfg.rank_budget;

    detail::SvdProbe probe;
    probe.counts = &res.svd_counts;
    probe.full_rows = m;
    probe.full_cols = n;

    // Init from the thin SVD of A: U0 = leading left singular vectors,
    // V0 = U0^T A. This is the only full-size SVD in the whole solve.
    auto init_svd = detail::thin_svd(A, &probe);
    res.stats.sigma_l = init_svd.singularValues()(0);
    if (res.stats.sigma_l == 0.0) {
        // A identically zero: the decomposition is exact and trivial.
        res.U = Matrix::Identity(m, r);
        res.V = Matrix::Zero(r, n);
        res.L = Matrix::Zero(m, n);
        res.S = Matrix::Zero(m, n);
        res.N = Matrix::Zero(m, n);
        res.Y = Matrix::Zero(m, n);
        res.converged = true;
        res.iters = 0;
        return res;
    }

    Matrix U = init_svd.matrixU().leftCols(r);
    Matrix V = U.transpose() * A;
    Matrix UV = U * V;
    Matrix S = Matrix::Zero(m, n);
    Matrix Y = Matrix::Zero(m, n);
    Matrix N = Matrix::Zero(m, n);

    double beta = 1.25 / res.stats.sigma_l;
    const double a_norm = A.norm();
    const double term_threshold = cfg.tau * res.stats.delta;

    probe.in_loop = true;
    for (int k = 0; k < cfg.max_iters; ++k) {
        N = update_noise(Y, A, UV, S, beta, cfg.epsilon);
        Matrix S_next = update_sparse(Y, A, UV, N, beta, cfg.lambda, mesh, map);
        const Matrix G_L = (1.0 / beta) * Y + A - S_next - N;
        Matrix U_next = detail::polar_orthobasis(G_L * V.transpose(), &probe);
        const double beta_next = cfg.alpha * beta;
        Vector v_singvals;
        Matrix V_next =
            detail::svt_impl(U_next.transpose() * G_L, 1.0 / beta_next, &probe, &v_singvals);
        Matrix UV_next = U_next * V_next;
        Y -= beta * (UV_next + S_next + N - A);

        const double step_num =
            std::sqrt((UV_next - UV).squaredNorm() + (S_next - S).squaredNorm());
        const double step_den = std::sqrt(UV.squaredNorm() + S.squaredNorm()) + 1.0;
        const double step = step_num / step_den;

        IterationRecord rec;
        rec.iter = k;
        rec.sparse_norm = S_next.lpNorm<1>();
        rec.objective = v_singvals.sum() + cfg.lambda * rec.sparse_norm;
        rec.residual = (UV_next + S_next + N - A).norm() / (a_norm + 1.0);
        rec.rank_estimate = 0;
        for (Index i = 0; i < v_singvals.size(); ++i)
            if (v_singvals(i) > 3.0 * res.stats.delta) ++rec.rank_estimate;
        rec.step = step;
        rec.beta = beta;
        res.history.push_back(rec);

        assert((U_next.transpose() * U_next - Matrix::Identity(r, r)).cwiseAbs().maxCoeff() <=
               1e-8);
        assert(N.norm() <= cfg.epsilon + 1e-8);

        U.swap(U_next);
        V.swap(V_next);
        S.swap(S_next);
        UV.swap(UV_next);
        beta = beta_next;
        res.iters = k + 1;
        if (step <= term_threshold) {
            res.converged = true;
            break;
        }
    }

    res.U = std::move(U);
    res.V = std::move(V);
    res.L = std::move(UV);
    res.S = std::move(S);
    res.N = std::move(N);
    res.Y = std::move(Y);
    return res;
}

}  // namespace umitk
