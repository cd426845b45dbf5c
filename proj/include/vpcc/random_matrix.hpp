#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vpcc/distribution.hpp"
#include "vpcc/errors.hpp"

namespace vpcc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// One scalar entry of a random state matrix. Moments are cached at
/// construction; the distribution is kept for sampling.
class RandomEntry {
public:
    enum class Kind { Deterministic, Distributional, FiniteSupport };

    RandomEntry() : RandomEntry(DistributionSpec::constant(0.0)) {}
    RandomEntry(double value) : RandomEntry(DistributionSpec::constant(value)) {}  // NOLINT
    explicit RandomEntry(DistributionSpec dist) : dist_(std::move(dist)) {
        dist_.validate();
        if (dist_.is_constant()) kind_ = Kind::Deterministic;
        else if (dist_.is_finite_support()) kind_ = Kind::FiniteSupport;
        else kind_ = Kind::Distributional;
        for (int p = 1; p <= 6; ++p) {
            try {
                raw_[static_cast<std::size_t>(p - 1)] = vpcc::raw_moment(dist_, p);
            } catch (const MomentUndefined&) {
                raw_[static_cast<std::size_t>(p - 1)] = std::numeric_limits<double>::quiet_NaN();
            }
        }
        mean_ = raw_[0];
        variance_ = vpcc::variance(dist_);
        if (!std::isfinite(mean_) || !std::isfinite(variance_))
            throw DomainError("random entry must have finite mean and variance");
    }

    Kind kind() const { return kind_; }
    bool deterministic() const { return kind_ == Kind::Deterministic; }
    double mean() const { return mean_; }
    double variance() const { return variance_; }
    double raw_moment(int p) const {
        if (p < 1 || p > 6 || std::isnan(raw_[static_cast<std::size_t>(p - 1)]))
            throw MomentUndefined("raw moment of order " + std::to_string(p) + " is not available");
        return raw_[static_cast<std::size_t>(p - 1)];
    }
    const DistributionSpec& distribution() const { return dist_; }
    bool has_sampler() const { return dist_.has_sampler(); }
    double draw(Rng& rng) const { return deterministic() ? mean_ : sample(dist_, rng); }

private:
    DistributionSpec dist_;
    Kind kind_ = Kind::Deterministic;
    double mean_ = 0.0;
    double variance_ = 0.0;
    std::array<double, 6> raw_{};
};

/// n x n matrix of mutually independent random entries.
class RandomMatrixModel {
public:
    RandomMatrixModel() = default;

    explicit RandomMatrixModel(std::size_t n) : n_(n), entries_(n * n), mean_(Matrix::Zero(n, n)),
                                                var_(Matrix::Zero(n, n)) {}

    static RandomMatrixModel deterministic(const Matrix& a) {
        if (a.rows() != a.cols()) throw DimensionError("state matrix must be square");
        RandomMatrixModel m(static_cast<std::size_t>(a.rows()));
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            for (Eigen::Index j = 0; j < a.cols(); ++j)
                m.set(static_cast<std::size_t>(i), static_cast<std::size_t>(j), RandomEntry(a(i, j)));
        return m;
    }

    std::size_t dim() const { return n_; }

    void set(std::size_t i, std::size_t j, RandomEntry e) {
        if (i >= n_ || j >= n_) throw DimensionError("entry index out of range");
        mean_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = e.mean();
        var_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = e.variance();
        entries_[i * n_ + j] = std::move(e);
    }

    const RandomEntry& entry(std::size_t i, std::size_t j) const { return entries_.at(i * n_ + j); }

    /// Entrywise expectation E[A].
    const Matrix& mean() const { return mean_; }
    /// Entrywise variance Var(a_ij).
    const Matrix& variance() const { return var_; }

    bool deterministic() const { return var_.isZero(0.0); }

    bool has_sampler() const {
        for (const auto& e : entries_)
            if (!e.has_sampler()) return false;
        return true;
    }

    RandomMatrixModel transposed() const {
        RandomMatrixModel t(n_);
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < n_; ++j) t.set(j, i, entry(i, j));
        return t;
    }

    Matrix draw(Rng& rng) const {
        Matrix a(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
        // row-major draw order keeps sample streams stable
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < n_; ++j)
                a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = entry(i, j).draw(rng);
        return a;
    }

private:
    std::size_t n_ = 0;
    std::vector<RandomEntry> entries_;
    Matrix mean_;
    Matrix var_;
};

/// Per-step admissible inputs: {u : A u <= b}.
struct InputPolytope {
    Matrix A;
    Vector b;
};

/// x(k+1) = A(k) x(k) + B u(k), k = 0..N-1, with A(k) random and independent
/// across k. `A[k]` holds the model of A(k).
struct SystemSpec {
    std::vector<RandomMatrixModel> A;
    Matrix B;
    Vector x0;
    InputPolytope input_polytope;

    std::size_t horizon() const { return A.size(); }
    std::size_t n() const { return static_cast<std::size_t>(x0.size()); }
    std::size_t m() const { return static_cast<std::size_t>(B.cols()); }

    void validate() const {
        if (A.empty()) throw DimensionError("horizon must be positive");
        const auto nn = n();
        for (const auto& a : A)
            if (a.dim() != nn) throw DimensionError("state matrix dimension does not match x0");
        if (static_cast<std::size_t>(B.rows()) != nn) throw DimensionError("B must have n rows");
        if (input_polytope.A.size() > 0 || input_polytope.b.size() > 0) {
            if (static_cast<std::size_t>(input_polytope.A.cols()) != m())
                throw DimensionError("input polytope must have m columns");
            if (input_polytope.A.rows() != input_polytope.b.size())
                throw DimensionError("input polytope A and b disagree");
        }
    }

    /// Rolls out x(0..N) for sampled matrices `draws[k]` = A(k).
    std::vector<Vector> rollout(const std::vector<Matrix>& draws, const Vector& U) const {
        std::vector<Vector> x;
        x.reserve(horizon() + 1);
        x.push_back(x0);
        const auto mm = static_cast<Eigen::Index>(m());
        for (std::size_t k = 0; k < horizon(); ++k)
            x.push_back(draws[k] * x.back() + B * U.segment(static_cast<Eigen::Index>(k) * mm, mm));
        return x;
    }
};

inline SystemSpec make_time_invariant(const RandomMatrixModel& a, std::size_t horizon, Matrix B,
                                      Vector x0, InputPolytope poly = {}) {
    SystemSpec s{std::vector<RandomMatrixModel>(horizon, a), std::move(B), std::move(x0),
                 std::move(poly)};
    s.validate();
    return s;
}

}  // namespace vpcc
