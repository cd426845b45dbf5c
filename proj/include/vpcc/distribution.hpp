#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "vpcc/errors.hpp"

namespace vpcc {

// Random number streams. Every consumer derives its generator from a
// (seed, stream) pair so results do not depend on thread count or call order.
using Rng = std::mt19937_64;

inline Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      0x5eedu};
    return Rng(seq);
}

inline double uniform01(Rng& rng) { return std::generate_canonical<double, 64>(rng); }

struct Constant {
    double value = 0.0;
};

/// Weibull with CDF 1 - exp(-(x/scale)^shape). Note the argument order:
/// `Weibull{5, 30}` is scale 5, shape 30.
struct Weibull {
    double scale = 1.0;
    double shape = 1.0;
};

struct BetaDist {
    double a = 1.0;
    double b = 1.0;
};

struct FiniteSupport {
    std::vector<double> values;
    std::vector<double> probs;
};

/// Known raw moments without a sampler: raw[p-1] = E[X^p]. Usable by the
/// moment-based method only; sampling raises SamplerMissing.
struct MomentsOnly {
    std::vector<double> raw;
};

using Family = std::variant<Constant, Weibull, BetaDist, FiniteSupport, MomentsOnly>;

/// A scalar distribution, optionally raised to an integer power (1, 2 or 3).
/// The random variable described is X^power with X drawn from `family`.
struct DistributionSpec {
    Family family = Constant{};
    int power = 1;

    DistributionSpec() = default;
    DistributionSpec(Family f, int p = 1) : family(std::move(f)), power(p) { validate(); }

    static DistributionSpec constant(double v) { return DistributionSpec(Constant{v}); }

    bool is_constant() const { return std::holds_alternative<Constant>(family); }
    bool is_finite_support() const { return std::holds_alternative<FiniteSupport>(family); }
    bool has_sampler() const { return !std::holds_alternative<MomentsOnly>(family); }

    void validate() const {
        if (power < 1 || power > 3)
            throw DomainError("distribution transform power must be 1, 2 or 3");
        std::visit(
            [this](const auto& f) {
                using T = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<T, MomentsOnly>) {
                    if (power != 1) throw DomainError("moments-only entries cannot be transformed");
                }
                if constexpr (std::is_same_v<T, Constant>) {
                    if (!std::isfinite(f.value)) throw DomainError("constant must be finite");
                } else if constexpr (std::is_same_v<T, Weibull>) {
                    if (!(f.scale > 0.0) || !(f.shape > 0.0))
                        throw DomainError("weibull scale and shape must be positive");
                } else if constexpr (std::is_same_v<T, BetaDist>) {
                    if (!(f.a > 0.0) || !(f.b > 0.0))
                        throw DomainError("beta parameters must be positive");
                } else if constexpr (std::is_same_v<T, MomentsOnly>) {
                    if (f.raw.size() < 2) throw DomainError("moments-only entry needs mean and second moment");
                    if (!(f.raw[1] - f.raw[0] * f.raw[0] >= -1e-12 * std::max(1.0, f.raw[1])))
                        throw DomainError("moments-only entry has negative variance");
                } else {
                    if (f.values.empty() || f.values.size() != f.probs.size())
                        throw DomainError("finite support needs matching non-empty values/probs");
                    double total = 0.0;
                    for (double p : f.probs) {
                        if (!(p >= 0.0)) throw DomainError("finite support probability is negative");
                        total += p;
                    }
                    if (std::abs(total - 1.0) > 1e-12)
                        throw DomainError("finite support probabilities must sum to 1");
                }
            },
            family);
    }
};

namespace detail {

// E[X^q] of the untransformed family.
inline double family_raw_moment(const Family& family, int q) {
    return std::visit(
        [q](const auto& f) -> double {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, Constant>) {
                return std::pow(f.value, q);
            } else if constexpr (std::is_same_v<T, Weibull>) {
                return std::pow(f.scale, q) * std::tgamma(1.0 + q / f.shape);
            } else if constexpr (std::is_same_v<T, BetaDist>) {
                double m = 1.0;
                for (int j = 0; j < q; ++j) m *= (f.a + j) / (f.a + f.b + j);
                return m;
            } else if constexpr (std::is_same_v<T, MomentsOnly>) {
                if (static_cast<std::size_t>(q) > f.raw.size())
                    throw MomentUndefined("raw moment of order " + std::to_string(q) + " not supplied");
                return f.raw[static_cast<std::size_t>(q - 1)];
            } else {
                double m = 0.0;
                for (std::size_t i = 0; i < f.values.size(); ++i)
                    m += f.probs[i] * std::pow(f.values[i], q);
                return m;
            }
        },
        family);
}

}  // namespace detail

/// E[Y^p] for Y = X^power. Orders 1 through 6 are supported.
inline double raw_moment(const DistributionSpec& dist, int p) {
    if (p < 1 || p > 6) throw MomentUndefined("raw moments are available for orders 1..6");
    return detail::family_raw_moment(dist.family, p * dist.power);
}

inline double mean(const DistributionSpec& dist) { return raw_moment(dist, 1); }

inline double variance(const DistributionSpec& dist) {
    if (const auto* fs = std::get_if<FiniteSupport>(&dist.family)) {
        const double mu = mean(dist);
        double v = 0.0;
        for (std::size_t i = 0; i < fs->values.size(); ++i) {
            const double d = std::pow(fs->values[i], dist.power) - mu;
            v += fs->probs[i] * d * d;
        }
        return v;
    }
    if (dist.is_constant()) return 0.0;
    const double m1 = raw_moment(dist, 1);
    return std::max(raw_moment(dist, 2) - m1 * m1, 0.0);
}

/// One exact draw of X^power.
inline double sample(const DistributionSpec& dist, Rng& rng) {
    const double x = std::visit(
        [&rng](const auto& f) -> double {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, Constant>) {
                return f.value;
            } else if constexpr (std::is_same_v<T, Weibull>) {
                // inverse CDF
                const double u = uniform01(rng);
                return f.scale * std::pow(-std::log1p(-u), 1.0 / f.shape);
            } else if constexpr (std::is_same_v<T, BetaDist>) {
                std::gamma_distribution<double> ga(f.a, 1.0);
                std::gamma_distribution<double> gb(f.b, 1.0);
                const double x1 = ga(rng);
                const double x2 = gb(rng);
                return x1 / (x1 + x2);
            } else if constexpr (std::is_same_v<T, MomentsOnly>) {
                throw SamplerMissing("entry is specified by moments only and cannot be sampled");
                return 0.0;
            } else {
                const double u = uniform01(rng);
                double acc = 0.0;
                for (std::size_t i = 0; i + 1 < f.values.size(); ++i) {
                    acc += f.probs[i];
                    if (u < acc) return f.values[i];
                }
                return f.values.back();
            }
        },
        dist.family);
    switch (dist.power) {
        case 1: return x;
        case 2: return x * x;
        default: return x * x * x;
    }
}

inline std::vector<double> sample(const DistributionSpec& dist, std::uint64_t seed,
                                  std::uint64_t stream, std::size_t count) {
    if (count == 0) throw DomainError("sample count must be at least 1");
    Rng rng = make_stream(seed, stream);
    std::vector<double> out(count);
    for (auto& x : out) x = sample(dist, rng);
    return out;
}

inline std::string family_name(const DistributionSpec& dist) {
    return std::visit(
        [](const auto& f) -> std::string {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, Constant>) return "constant";
            else if constexpr (std::is_same_v<T, Weibull>) return "weibull";
            else if constexpr (std::is_same_v<T, BetaDist>) return "beta";
            else if constexpr (std::is_same_v<T, MomentsOnly>) return "moments";
            else return "finite";
        },
        dist.family);
}

}  // namespace vpcc
