#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "eocav/util.hpp"

// Shared lineshape primitives and the sampled-spectrum container.
// Frequencies are ordinary frequencies in Hz; widths are FWHM.

namespace eocav {

inline constexpr double kFourLn2 = 2.7725887222397812;  // 4 ln 2

// Unit-peak Lorentzian.
inline double lorentzian_peak1(double f, double f0, double fwhm) {
    const double x = 2.0 * (f - f0) / fwhm;
    return 1.0 / (1.0 + x * x);
}

// Unit-peak Gaussian.
inline double gaussian_peak1(double f, double f0, double fwhm) {
    const double x = (f - f0) / fwhm;
    return std::exp(-kFourLn2 * x * x);
}

// Unit-area Lorentzian density, integral over f equals 1.
inline double lorentzian_density(double f, double f0, double fwhm) {
    const double half = 0.5 * fwhm;
    const double d = f - f0;
    return (half / M_PI) / (d * d + half * half);
}

// Uniformly sampled or arbitrary-grid spectrum.
struct Spectrum {
    std::vector<double> f_hz;
    std::vector<double> v;  // counts or rate, per the producer

    std::size_t size() const { return f_hz.size(); }

    void validate() const {
        if (f_hz.size() != v.size())
            throw validation_error("spectrum: frequency and value arrays differ in length");
        for (std::size_t i = 1; i < f_hz.size(); ++i)
            if (!(f_hz[i] > f_hz[i - 1]))
                throw validation_error("spectrum: frequency grid must be strictly increasing");
    }
};

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
    if (n < 2) throw validation_error("grid needs at least two points");
    if (!(hi > lo)) throw validation_error("grid upper bound must exceed lower bound");
    std::vector<double> out(n);
    const double step = (hi - lo) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) out[i] = lo + step * static_cast<double>(i);
    out.back() = hi;
    return out;
}

}  // namespace eocav
