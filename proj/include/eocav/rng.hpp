#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

// Deterministic random sampling. All distributions are implemented here
// rather than taken from <random> (beyond the raw engine) because the
// standard distributions are implementation-defined and outputs must be
// reproducible byte-for-byte for a given seed across toolchains.

namespace eocav {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Derives an independent substream seed for item `index` of stream `tag`.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t tag,
                                    std::uint64_t index) {
    std::uint64_t s = seed;
    std::uint64_t a = splitmix64(s);
    s = a ^ (tag * 0x9e3779b97f4a7c15ULL);
    std::uint64_t b = splitmix64(s);
    s = b ^ (index + 0xd1b54a32d192ed03ULL);
    return splitmix64(s);
}

inline std::mt19937_64 make_engine(std::uint64_t seed) {
    return std::mt19937_64(seed);
}

// Uniform double in [0,1) with 53 random bits.
inline double uniform01(std::mt19937_64& eng) {
    return (eng() >> 11) * 0x1.0p-53;
}

// Uniform double in (0,1], safe as a log argument.
inline double uniform01_open_low(std::mt19937_64& eng) {
    return ((eng() >> 11) + 1.0) * 0x1.0p-53;
}

// Marsaglia polar method; one value per call, the spare is discarded so the
// stream position depends only on the number of accepted pairs.
inline double sample_normal(std::mt19937_64& eng) {
    for (;;) {
        const double u = 2.0 * uniform01(eng) - 1.0;
        const double v = 2.0 * uniform01(eng) - 1.0;
        const double s = u * u + v * v;
        if (s > 0.0 && s < 1.0)
            return u * std::sqrt(-2.0 * std::log(s) / s);
    }
}

// Gaussian truncated to +/- half_width standard cut; resamples until inside.
inline double sample_truncated_normal(std::mt19937_64& eng, double sigma,
                                      double cut_sigmas) {
    if (!(sigma > 0.0)) throw std::domain_error("sigma must be positive");
    if (!(cut_sigmas > 0.0)) throw std::domain_error("cut must be positive");
    for (;;) {
        const double z = sample_normal(eng);
        if (std::abs(z) <= cut_sigmas) return z * sigma;
    }
}

namespace detail {

// Knuth inversion, O(mean); exact and branch-stable for small means.
inline long poisson_small(std::mt19937_64& eng, double mean) {
    const double l = std::exp(-mean);
    long k = 0;
    double p = 1.0;
    do {
        ++k;
        p *= uniform01_open_low(eng);
    } while (p > l);
    return k - 1;
}

// Hormann's PTRD transformed rejection, valid for mean >= 10.
inline long poisson_ptrd(std::mt19937_64& eng, double mean) {
    const double smu = std::sqrt(mean);
    const double b = 0.931 + 2.53 * smu;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);

    for (;;) {
        double u;
        double v = uniform01_open_low(eng);
        if (v <= 0.86 * v_r) {
            u = v / v_r - 0.43;
            return static_cast<long>(
                std::floor((2.0 * a / (0.5 - std::abs(u)) + b) * u + mean + 0.445));
        }
        if (v >= v_r) {
            u = uniform01_open_low(eng) - 0.5;
        } else {
            u = v / v_r - 0.93;
            u = (u < 0.0 ? -0.5 : 0.5) - u;
            v = uniform01_open_low(eng) * v_r;
        }
        const double us = 0.5 - std::abs(u);
        if (us < 0.013 && v > us) continue;
        const double k = std::floor((2.0 * a / us + b) * u + mean + 0.445);
        v = v * inv_alpha / (a / (us * us) + b);
        if (k >= 10.0) {
            const double log_sqrt_2pi = 0.91893853320467267;
            if (std::log(v * smu) <=
                (k + 0.5) * std::log(mean / k) - mean - log_sqrt_2pi + k -
                    (1.0 / 12.0 - 1.0 / (360.0 * k * k)) / k)
                return static_cast<long>(k);
        } else if (k >= 0.0) {
            if (std::log(v) <= k * std::log(mean) - mean - std::lgamma(k + 1.0))
                return static_cast<long>(k);
        }
    }
}

}  // namespace detail

inline long sample_poisson(std::mt19937_64& eng, double mean) {
    if (!(mean >= 0.0) || !std::isfinite(mean))
        throw std::domain_error("poisson mean must be finite and >= 0");
    if (mean == 0.0) return 0;
    if (mean < 10.0) return detail::poisson_small(eng, mean);
    return detail::poisson_ptrd(eng, mean);
}

}  // namespace eocav
