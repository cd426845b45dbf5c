#pragma once

// Monte-Carlo certification of a joint chance constraint for a fixed input
// sequence, with an exact one-sided Clopper-Pearson upper confidence bound on
// the joint violation probability.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <thread>
#include <vector>

#include <boost/math/distributions/binomial.hpp>

#include "vpcc/distribution.hpp"
#include "vpcc/errors.hpp"
#include "vpcc/random_matrix.hpp"
#include "vpcc/reformulate.hpp"

namespace vpcc {

/// Trajectories are drawn in fixed-size chunks, chunk c from stream (seed, c),
/// so the draws do not depend on how chunks are spread over threads.
inline constexpr std::size_t kSampleChunk = 4096;

struct McCertificate {
    std::size_t samples = 0;
    std::size_t violations = 0;
    double empirical_violation = 0.0;
    double upper_ci_99 = 1.0;
    double alpha = 0.0;
    bool certified = false;  // upper_ci_99 <= alpha
};

/// One-sided upper confidence bound on a binomial proportion.
inline double clopper_pearson_upper(std::size_t successes, std::size_t trials, double confidence = 0.99) {
    if (trials == 0) return 1.0;
    if (successes >= trials) return 1.0;
    using boost::math::binomial_distribution;
    return binomial_distribution<>::find_upper_bound_on_p(static_cast<double>(trials),
                                                          static_cast<double>(successes), 1.0 - confidence,
                                                          binomial_distribution<>::clopper_pearson_exact_interval);
}

inline void require_samplers(const SystemSpec& spec) {
    for (std::size_t k = 0; k < spec.horizon(); ++k)
        if (!spec.A[k].has_sampler())
            throw SamplerMissing("state matrix A(" + std::to_string(k) + ") has an entry without a sampler");
}

/// Draws one full horizon A(0), ..., A(N-1).
inline std::vector<Matrix> draw_trajectory(const SystemSpec& spec, Rng& rng) {
    std::vector<Matrix> draws;
    draws.reserve(spec.horizon());
    for (const auto& a : spec.A) draws.push_back(a.draw(rng));
    return draws;
}

namespace detail {

inline bool any_row_violated(const SystemSpec& spec, const JointChanceConstraint& jcc,
                             const std::vector<Matrix>& draws, const Vector& U) {
    const auto x = spec.rollout(draws, U);
    for (const auto& r : jcc.rows)
        if (r.G.dot(x[r.k]) > r.h) return true;
    return false;
}

}  // namespace detail

/// Empirical joint violation of `jcc` under input U over `samples` simulated
/// trajectories. `threads` = 0 picks the hardware concurrency.
inline McCertificate mc_certify(const SystemSpec& spec, const JointChanceConstraint& jcc, const Vector& U,
                                std::size_t samples, std::uint64_t seed, unsigned threads = 1) {
    spec.validate();
    require_samplers(spec);
    if (static_cast<std::size_t>(U.size()) != spec.horizon() * spec.m())
        throw DimensionError("input sequence has wrong length");
    if (samples == 0) throw DomainError("sample count must be at least 1");

    const std::size_t chunks = (samples + kSampleChunk - 1) / kSampleChunk;
    std::vector<std::size_t> counts(chunks, 0);
    auto work = [&](std::size_t first, std::size_t stride) {
        for (std::size_t c = first; c < chunks; c += stride) {
            Rng rng = make_stream(seed, c);
            const std::size_t lo = c * kSampleChunk;
            const std::size_t hi = std::min(samples, lo + kSampleChunk);
            std::size_t v = 0;
            for (std::size_t s = lo; s < hi; ++s)
                if (detail::any_row_violated(spec, jcc, draw_trajectory(spec, rng), U)) ++v;
            counts[c] = v;
        }
    };
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, chunks));
    if (threads <= 1) {
        work(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
        for (auto& th : pool) th.join();
    }

    McCertificate cert;
    cert.samples = samples;
    for (auto c : counts) cert.violations += c;
    cert.empirical_violation = static_cast<double>(cert.violations) / static_cast<double>(samples);
    cert.upper_ci_99 = clopper_pearson_upper(cert.violations, samples, 0.99);
    cert.alpha = jcc.alpha;
    cert.certified = cert.upper_ci_99 <= jcc.alpha;
    return cert;
}

}  // namespace vpcc
