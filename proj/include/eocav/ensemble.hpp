#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "eocav/rng.hpp"
#include "eocav/spectrum.hpp"
#include "eocav/units.hpp"
#include "eocav/util.hpp"

// Inhomogeneous ensemble model: ion offsets drawn from the inhomogeneous
// line, per-ion coupling from a mode-position model, fixed effective
// single-ion linewidth.

namespace eocav {

struct Ion {
    double offset_hz = 0.0;  // from the inhomogeneous center
    double c0 = 0.0;         // on-resonance cooperativity
    double gamma_hz = 0.0;   // total single-ion FWHM
};

struct IonEnsemble {
    std::vector<Ion> ions;
    std::uint64_t seed = 0;
};

enum class ProfileShape { gaussian, lorentzian };

// Normalized spectral density of the inhomogeneous line (integral 1 over f).
inline double inhomogeneous_profile(double offset_hz, const EmitterParams& e,
                                    ProfileShape shape = ProfileShape::gaussian) {
    if (!(e.inhom_fwhm_hz > 0.0))
        throw validation_error("ensemble: inhomogeneous FWHM must be positive");
    if (shape == ProfileShape::lorentzian)
        return lorentzian_density(offset_hz, 0.0, e.inhom_fwhm_hz);
    const double sigma = e.inhom_fwhm_hz / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    const double x = offset_hz / sigma;
    return std::exp(-0.5 * x * x) / (sigma * std::sqrt(2.0 * M_PI));
}

struct CouplingModel {
    double c_max = 0.0;  // cooperativity of an ideally placed ion

    void validate() const {
        if (!(c_max >= 0.0)) throw validation_error("coupling model: c_max must be >= 0");
    }
};

struct Window {
    double lo_hz = 0.0;
    double hi_hz = 0.0;

    void validate() const {
        if (!(hi_hz > lo_hz)) throw validation_error("window: must be non-empty");
    }
    double width() const { return hi_hz - lo_hz; }
};

// Draws n_total ions. Offsets follow the inhomogeneous profile restricted to
// the window (rejection sampling), couplings follow c0 = u^2 c_max with u
// uniform on [0,1]. Same (seed, params) -> identical ensemble.
inline IonEnsemble sample_ensemble(std::size_t n_total, const Window& window,
                                   const EmitterParams& e, const CouplingModel& cm,
                                   std::uint64_t seed,
                                   ProfileShape shape = ProfileShape::gaussian) {
    window.validate();
    e.validate();
    cm.validate();
    IonEnsemble ens;
    ens.seed = seed;
    ens.ions.reserve(n_total);
    const double gamma_i = e.single_ion_fwhm_hz();
    const double sigma = e.inhom_fwhm_hz / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    const double half_gamma = 0.5 * e.inhom_fwhm_hz;

    for (std::size_t i = 0; i < n_total; ++i) {
        auto eng = make_engine(substream_seed(seed, 0x696f6eULL, i));
        double offset;
        for (std::size_t attempt = 0;; ++attempt) {
            if (attempt >= 100000)
                throw validation_error(
                    "ensemble: window holds negligible probability mass under the "
                    "inhomogeneous profile; move the window or use the lorentzian shape");
            if (shape == ProfileShape::gaussian) {
                offset = sample_normal(eng) * sigma;
            } else {
                // Inverse-CDF Cauchy draw.
                offset = half_gamma * std::tan(M_PI * (uniform01(eng) - 0.5));
            }
            if (offset >= window.lo_hz && offset <= window.hi_hz) break;
        }
        const double u = uniform01(eng);
        ens.ions.push_back({offset, u * u * cm.c_max, gamma_i});
    }
    return ens;
}

// Histogram of ensemble offsets on a uniform grid, as a Spectrum (counts).
inline Spectrum offset_histogram(const IonEnsemble& ens, const Window& window,
                                 std::size_t n_bins) {
    window.validate();
    if (n_bins < 1) throw validation_error("histogram: needs at least one bin");
    Spectrum s;
    s.f_hz.resize(n_bins);
    s.v.assign(n_bins, 0.0);
    const double bw = window.width() / static_cast<double>(n_bins);
    for (std::size_t b = 0; b < n_bins; ++b)
        s.f_hz[b] = window.lo_hz + (static_cast<double>(b) + 0.5) * bw;
    for (const auto& ion : ens.ions) {
        if (ion.offset_hz < window.lo_hz || ion.offset_hz >= window.hi_hz) continue;
        auto b = static_cast<std::size_t>((ion.offset_hz - window.lo_hz) / bw);
        if (b >= n_bins) b = n_bins - 1;
        s.v[b] += 1.0;
    }
    return s;
}

}  // namespace eocav
