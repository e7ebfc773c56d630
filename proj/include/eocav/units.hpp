#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

#include "eocav/util.hpp"

// Unit convention used across the library: every public frequency, linewidth
// and decay rate is an ordinary frequency in Hz (FWHM for linewidths). Angular
// factors of 2*pi appear only inside time-domain formulas, never at module
// boundaries.

namespace eocav {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s, exact
inline constexpr double kTwoPi = 6.283185307179586476925286766559;

// c / lambda
inline double freq_from_wavelength(double lambda_m) {
    if (!(lambda_m > 0.0)) throw std::domain_error("wavelength must be positive");
    return kSpeedOfLight / lambda_m;
}

// Ordinary-frequency decay rate of an exponential lifetime: 1/(2*pi*tau).
inline double gamma_from_lifetime(double tau_s) {
    if (!(tau_s > 0.0)) throw std::domain_error("lifetime must be positive");
    return 1.0 / (kTwoPi * tau_s);
}

// Inverse of gamma_from_lifetime.
inline double lifetime_from_gamma(double gamma_hz) {
    if (!(gamma_hz > 0.0)) throw std::domain_error("decay rate must be positive");
    return 1.0 / (kTwoPi * gamma_hz);
}

// Cavity FWHM linewidth kappa = f0/Q.
inline double linewidth_from_q(double f0_hz, double q) {
    if (!(f0_hz > 0.0)) throw std::domain_error("resonance frequency must be positive");
    if (!(q > 0.0)) throw std::domain_error("Q factor must be positive");
    return f0_hz / q;
}

struct CavityParams {
    double f0_hz = 0.0;        // zero-bias resonance
    double q = 0.0;            // quality factor
    double mode_volume = 0.0;  // in (lambda/n)^3 units

    double kappa_hz() const { return linewidth_from_q(f0_hz, q); }

    void validate() const {
        if (!std::isfinite(f0_hz) || !(f0_hz > 0.0))
            throw validation_error("cavity: f0 must be finite and positive");
        if (!std::isfinite(q) || !(q > 0.0))
            throw validation_error("cavity: Q must be finite and positive");
        if (!std::isfinite(mode_volume) || !(mode_volume > 0.0))
            throw validation_error("cavity: mode volume must be finite and positive");
    }
};

struct EmitterParams {
    double tau0_s = 0.0;           // natural lifetime
    double b0 = 0.0;               // ZPL branching ratio
    double lambda0_m = 0.0;        // transition wavelength
    double gamma_h_hz = 0.0;       // homogeneous linewidth FWHM
    double inhom_fwhm_hz = 0.0;    // inhomogeneous FWHM
    double diffusion_fwhm_hz = 0.0;  // extra broadening from spectral diffusion

    double gamma0_hz() const { return gamma_from_lifetime(tau0_s); }
    // Effective single-ion FWHM: homogeneous width plus the diffusion
    // contribution folded into one Lorentzian width.
    double single_ion_fwhm_hz() const { return gamma_h_hz + diffusion_fwhm_hz; }

    void validate() const {
        if (!std::isfinite(tau0_s) || !(tau0_s > 0.0))
            throw validation_error("emitter: tau0 must be finite and positive");
        if (!std::isfinite(b0) || b0 < 0.0 || b0 > 1.0)
            throw validation_error("emitter: branching ratio must lie in [0,1]");
        if (!std::isfinite(lambda0_m) || !(lambda0_m > 0.0))
            throw validation_error("emitter: wavelength must be finite and positive");
        if (!std::isfinite(gamma_h_hz) || gamma_h_hz < 0.0)
            throw validation_error("emitter: homogeneous linewidth must be >= 0");
        if (!std::isfinite(inhom_fwhm_hz) || inhom_fwhm_hz < 0.0)
            throw validation_error("emitter: inhomogeneous FWHM must be >= 0");
        if (!std::isfinite(diffusion_fwhm_hz) || diffusion_fwhm_hz < 0.0)
            throw validation_error("emitter: diffusion FWHM must be >= 0");
    }
};

struct CqedParams {
    double g_hz = 0.0;       // single-photon coupling rate
    double kappa_hz = 0.0;   // cavity FWHM linewidth
    double gamma0_hz = 0.0;  // natural decay rate, 1/(2*pi*tau0)

    void validate() const {
        if (!std::isfinite(g_hz) || !(g_hz >= 0.0))
            throw validation_error("cqed: g must be finite and >= 0");
        if (!std::isfinite(kappa_hz) || !(kappa_hz > 0.0))
            throw validation_error("cqed: kappa must be finite and positive");
        if (!std::isfinite(gamma0_hz) || !(gamma0_hz > 0.0))
            throw validation_error("cqed: gamma0 must be finite and positive");
    }

    // Bad-cavity ordering kappa >> g >> gamma0. A violation is legal input
    // (the rate-equation model just loses accuracy), so it warns, not throws.
    std::optional<std::string> ordering_warning(double margin = 10.0) const {
        if (g_hz > 0.0 && kappa_hz < margin * g_hz)
            return str_printf("bad-cavity ordering violated: kappa (%g Hz) < %g x g (%g Hz)",
                              kappa_hz, margin, g_hz);
        if (g_hz > 0.0 && g_hz < margin * gamma0_hz)
            return str_printf("bad-cavity ordering violated: g (%g Hz) < %g x gamma0 (%g Hz)",
                              g_hz, margin, gamma0_hz);
        return std::nullopt;
    }
};

}  // namespace eocav
