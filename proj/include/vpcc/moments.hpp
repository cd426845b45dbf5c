#pragma once

// Exact first and second moments of G x(k) for x(k+1) = A(k) x(k) + B u(k)
// with entrywise-independent random A(k), independent across k.
//
// Product convention: a sequence `models` is stored in application order,
// models[0] acting first. A "product of models" therefore means
//
//     models[last] * ... * models[1] * models[0],
//
// i.e. the descending-index product A(k) A(k-1) ... A(0) when
// models = {A(0), ..., A(k)}. Segments are addressed by their lowest index:
// P_a = A(k) ... A(a), with P_{k+1} = I (empty product).
//
// Stacked dynamics: x(k) = P_0 x0 + C_{k-1} (I_N kron B) U, where block t of
// C_{k-1} is A(k-1) ... A(t+1) for t < k-1, I for t = k-1, and 0 for t >= k.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "vpcc/errors.hpp"
#include "vpcc/random_matrix.hpp"

namespace vpcc {

namespace detail {

inline void require_consistent(std::span<const RandomMatrixModel> models) {
    if (models.empty()) throw DimensionError("empty model sequence");
    const auto n = models.front().dim();
    for (const auto& m : models)
        if (m.dim() != n) throw DimensionError("model sequence has mixed dimensions");
}

// E[Z^T S Z] from the entrywise mean M and variance V of Z:
// M^T S M + diag_c( sum_r S_rr V_rc ).
inline Matrix quad_form_mean(const Matrix& M, const Matrix& V, const Matrix& S) {
    Matrix out = M.transpose() * S * M;
    out.diagonal() += V.transpose() * S.diagonal();
    return out;
}

}  // namespace detail

/// Product of entrywise means, last model leftmost. By independence this is
/// the expectation of the random product.
inline Matrix product_mean(std::span<const RandomMatrixModel> models) {
    detail::require_consistent(models);
    Matrix p = models.front().mean();
    for (std::size_t i = 1; i < models.size(); ++i) p = models[i].mean() * p;
    return p;
}

/// Covariance matrix of (models[last] ... models[0]) y.
///
/// Propagates mean and covariance through one factor at a time. With z the
/// inner random vector, conditioning on z gives
///   Var[A z] = E[ diag_r( sum_c V_rc z_c^2 ) ] + M Var[z] M^T.
inline Matrix product_vector_variance(std::span<const RandomMatrixModel> models, const Vector& y) {
    detail::require_consistent(models);
    const auto n = static_cast<Eigen::Index>(models.front().dim());
    if (y.size() != n) throw DimensionError("vector length does not match model dimension");
    Vector mu = y;
    Matrix cov = Matrix::Zero(n, n);
    for (const auto& a : models) {
        const Vector second = cov.diagonal() + mu.cwiseProduct(mu);
        Matrix next = a.mean() * cov * a.mean().transpose();
        next.diagonal() += a.variance() * second;
        cov = std::move(next);
        mu = a.mean() * mu;
    }
    return cov;
}

/// E[Z^T S Z] for a random matrix Z with independent entries and fixed S.
inline Matrix quad_form_mean(const RandomMatrixModel& Z, const Matrix& S) {
    const auto n = static_cast<Eigen::Index>(Z.dim());
    if (S.rows() != n || S.cols() != n) throw DimensionError("S must match the model dimension");
    return detail::quad_form_mean(Z.mean(), Z.variance(), S);
}

/// Cov( P_a e_j, P_b e_m ) with P_a = models[k] ... models[a], k = size-1.
/// a, b range over [0, k+1]; k+1 selects the empty product (a fixed unit vector).
inline Matrix column_covariance(std::span<const RandomMatrixModel> models, std::size_t a,
                                std::size_t b, std::size_t j, std::size_t m) {
    detail::require_consistent(models);
    const std::size_t top = models.size();  // k + 1
    const auto n = models.front().dim();
    if (a > top || b > top) throw DimensionError("product segment index out of range");
    if (j >= n || m >= n) throw DimensionError("column index out of range");
    if (a > b) return column_covariance(models, b, a, m, j).transpose();

    const auto nn = static_cast<Eigen::Index>(n);
    // P_a = P_b D with D = models[b-1] ... models[a] independent of P_b, so
    // Cov = E[P_b X P_b^T] - E[P_b] X E[P_b]^T with X = E[D] e_j e_m^T.
    Vector d = Vector::Unit(nn, static_cast<Eigen::Index>(j));
    for (std::size_t i = a; i < b; ++i) d = models[i].mean() * d;
    Matrix x = d * Vector::Unit(nn, static_cast<Eigen::Index>(m)).transpose();
    Matrix second = x;
    Matrix first = x;
    for (std::size_t i = b; i < top; ++i) {
        // E[A Y A^T] is E[Z^T Y Z] for Z = A^T
        second = detail::quad_form_mean(models[i].mean().transpose(), models[i].variance().transpose(),
                                        second);
        first = models[i].mean() * first * models[i].mean().transpose();
    }
    return second - first;
}

/// Moments of one scalar constraint expression G x(k), as functions of the
/// stacked input U = [u(0); ...; u(N-1)]:
///
///   E[G x(k)]   = a^T U + b
///   Var[G x(k)] = U^T Q U + 2 q^T U + r = || L^T U + v ||^2 + s
struct ConstraintMoments {
    Vector a;
    double b = 0.0;
    Matrix Q;
    Vector q;
    double r = 0.0;
    Matrix L;  // Nm x rank
    Vector v;  // rank
    double s = 0.0;

    double mean(const Vector& U) const { return a.dot(U) + b; }

    double variance(const Vector& U) const { return U.dot(Q * U) + 2.0 * q.dot(U) + r; }

    double variance_norm_form(const Vector& U) const {
        if (L.cols() == 0) return s;
        return (L.transpose() * U + v).squaredNorm() + s;
    }

    double stddev(const Vector& U) const { return std::sqrt(std::max(variance_norm_form(U), 0.0)); }

    /// True when the variance is identically zero in U.
    bool deterministic() const { return L.cols() == 0 && s == 0.0; }
};

namespace detail {

// Writes the PSD factorisation of (Q, q, r) into cm.
inline void factor_variance(ConstraintMoments& cm) {
    const auto dim = cm.Q.rows();
    cm.L.resize(dim, 0);
    cm.v.resize(0);
    cm.s = 0.0;
    if (dim == 0 || (cm.Q.isZero(0.0) && cm.q.isZero(0.0))) {
        if (cm.r < -1e-9 * std::max(1.0, std::abs(cm.r)))
            throw NotPSD("constant variance term is negative");
        cm.s = std::max(cm.r, 0.0);
        return;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cm.Q);
    if (eig.info() != Eigen::Success) throw NotPSD("eigen-decomposition of variance form failed");
    const Vector& ev = eig.eigenvalues();
    const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
    if (ev.minCoeff() < -1e-9 * scale) throw NotPSD("variance quadratic form has a negative eigenvalue");
    const double keep = 1e-12 * scale;
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < dim; ++i)
        if (ev(i) > keep) ++rank;
    cm.L.resize(dim, rank);
    cm.v.resize(rank);
    Eigen::Index c = 0;
    for (Eigen::Index i = 0; i < dim; ++i) {
        if (ev(i) <= keep) continue;
        const double root = std::sqrt(ev(i));
        cm.L.col(c) = eig.eigenvectors().col(i) * root;
        // least-squares solution of L v = q restricted to this eigenvector
        cm.v(c) = eig.eigenvectors().col(i).dot(cm.q) / root;
        ++c;
    }
    const double resid = cm.r - cm.v.squaredNorm();
    if (resid < -1e-8 * std::max(1.0, std::abs(cm.r)))
        throw NotPSD("variance form is not representable as a norm");
    cm.s = std::max(resid, 0.0);
}

}  // namespace detail

/// Mean and variance of G x(k), 1 <= k <= N, as affine / quadratic forms in U.
inline ConstraintMoments constraint_moments(const SystemSpec& spec, const RowVector& G, std::size_t k) {
    spec.validate();
    const std::size_t N = spec.horizon();
    if (k < 1 || k > N) throw DimensionError("constraint time must lie in [1, N]");
    const auto n = static_cast<Eigen::Index>(spec.n());
    const auto m = static_cast<Eigen::Index>(spec.m());
    if (G.size() != n) throw DimensionError("constraint row length must equal n");

    const std::span<const RandomMatrixModel> models(spec.A.data(), k);  // A(0) .. A(k-1)
    const Vector w = G.transpose();
    const auto slots = k + 1;  // P_0 .. P_k

    // mean products E[P_a], second-moment sweep S_a = E[P_a^T w w^T P_a],
    // and projected means mu_a = E[P_a]^T w
    std::vector<Matrix> pbar(slots), S(slots);
    std::vector<Vector> mu(slots);
    pbar[k] = Matrix::Identity(n, n);
    S[k] = w * w.transpose();
    mu[k] = w;
    for (std::size_t a = k; a-- > 0;) {
        pbar[a] = pbar[a + 1] * models[a].mean();
        S[a] = detail::quad_form_mean(models[a].mean(), models[a].variance(), S[a + 1]);
        mu[a] = models[a].mean().transpose() * mu[a + 1];
    }

    // fixed_from[b]: P_b is deterministic
    std::vector<bool> fixed_from(slots, true);
    for (std::size_t a = k; a-- > 0;) fixed_from[a] = fixed_from[a + 1] && models[a].deterministic();

    // K(a, b)[j, m] = Cov(w^T P_a e_j, w^T P_b e_m). For a <= b,
    // K(a, b) = E[D]^T S_b - mu_a mu_b^T with D = A(b-1) ... A(a),
    // and exactly zero when P_b is deterministic.
    const Eigen::Index total = static_cast<Eigen::Index>(slots) * n;
    Matrix K = Matrix::Zero(total, total);
    for (std::size_t b = 0; b < slots; ++b) {
        if (fixed_from[b]) continue;
        Matrix t = S[b];
        for (std::size_t a = b + 1; a-- > 0;) {
            if (a < b) t = models[a].mean().transpose() * t;
            const Matrix blk = t - mu[a] * mu[b].transpose();
            K.block(static_cast<Eigen::Index>(a) * n, static_cast<Eigen::Index>(b) * n, n, n) = blk;
            if (a != b)
                K.block(static_cast<Eigen::Index>(b) * n, static_cast<Eigen::Index>(a) * n, n, n) =
                    blk.transpose();
        }
    }

    ConstraintMoments cm;
    const Eigen::Index dimU = static_cast<Eigen::Index>(N) * m;
    cm.a = Vector::Zero(dimU);
    cm.b = G.dot(pbar[0] * spec.x0);
    for (std::size_t t = 0; t < k; ++t)
        cm.a.segment(static_cast<Eigen::Index>(t) * m, m) = (G * pbar[t + 1] * spec.B).transpose();

    // slot 0 carries x0, slot t+1 carries B u(t)
    const Matrix K00 = K.topLeftCorner(n, n);
    cm.r = spec.x0.dot(K00 * spec.x0);
    cm.q = Vector::Zero(dimU);
    cm.Q = Matrix::Zero(dimU, dimU);
    for (std::size_t ta = 0; ta < k; ++ta) {
        const Eigen::Index ra = static_cast<Eigen::Index>(ta + 1) * n;
        cm.q.segment(static_cast<Eigen::Index>(ta) * m, m) =
            spec.B.transpose() * K.block(ra, 0, n, n) * spec.x0;
        for (std::size_t tb = 0; tb < k; ++tb) {
            const Eigen::Index rb = static_cast<Eigen::Index>(tb + 1) * n;
            cm.Q.block(static_cast<Eigen::Index>(ta) * m, static_cast<Eigen::Index>(tb) * m, m, m) =
                spec.B.transpose() * K.block(ra, rb, n, n) * spec.B;
        }
    }
    cm.Q = 0.5 * (cm.Q + cm.Q.transpose()).eval();
    detail::factor_variance(cm);
    return cm;
}

/// Realised stacked selector C_k (n x N n) for sampled matrices draws[i] = A(i):
/// block t is A(k) ... A(t+1) for t < k, I for t = k, and 0 for t > k.
inline Matrix realized_selector(const std::vector<Matrix>& draws, std::size_t k, std::size_t horizon) {
    if (draws.empty()) throw DimensionError("no sampled matrices");
    const auto n = draws.front().rows();
    Matrix C = Matrix::Zero(n, static_cast<Eigen::Index>(horizon) * n);
    if (k < horizon) C.block(0, static_cast<Eigen::Index>(k) * n, n, n).setIdentity();
    Matrix prod = Matrix::Identity(n, n);
    for (std::size_t t = std::min(k, horizon); t-- > 0;) {
        prod = prod * draws.at(t + 1);
        C.block(0, static_cast<Eigen::Index>(t) * n, n, n) = prod;
    }
    return C;
}

}  // namespace vpcc
