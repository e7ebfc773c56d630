#pragma once

#include <cmath>
#include <stdexcept>

#include "eocav/units.hpp"

// Closed-form steady-state cavity QED in the bad-cavity regime: the cavity is
// adiabatically eliminated and all enhancement is carried by the
// cooperativity C = 4 g^2 / (kappa gamma0).

namespace eocav {

inline double cooperativity(const CqedParams& p) {
    p.validate();
    return 4.0 * p.g_hz * p.g_hz / (p.kappa_hz * p.gamma0_hz);
}

// Coupling rate that explains a lifetime reduction tau0 -> tau_c:
// C = tau0/tau_c - 1, g = sqrt(C kappa gamma0)/2.
inline double coupling_from_lifetimes(double tau0_s, double tau_c_s, double kappa_hz) {
    if (!(tau_c_s > 0.0)) throw std::domain_error("cavity-coupled lifetime must be positive");
    if (!(tau0_s > tau_c_s))
        throw std::domain_error("natural lifetime must exceed the cavity-coupled lifetime");
    if (!(kappa_hz > 0.0)) throw std::domain_error("kappa must be positive");
    const double c = tau0_s / tau_c_s - 1.0;
    const double gamma0 = gamma_from_lifetime(tau0_s);
    return 0.5 * std::sqrt(c * kappa_hz * gamma0);
}

// Lorentzian cavity filter: enhancement seen by an emitter detuned by delta
// from the cavity line of FWHM kappa.
inline double detuned_cooperativity(double c0, double delta_hz, double kappa_hz) {
    if (!(kappa_hz > 0.0)) throw std::domain_error("kappa must be positive");
    const double x = 2.0 * delta_hz / kappa_hz;
    return c0 / (1.0 + x * x);
}

// gamma0 (1 + C); the equivalent lifetime is tau0/(1+C).
inline double total_decay_rate(double gamma0_hz, double c) {
    return gamma0_hz * (1.0 + c);
}

// Fraction of emission funneled into the cavity mode.
inline double beta_factor(double c) {
    if (!(c >= 0.0)) throw std::domain_error("cooperativity must be >= 0");
    return c / (1.0 + c);
}

// Cavity-enhanced ZPL branching ratio.
inline double enhanced_branching(double b0, double c) {
    if (!(b0 >= 0.0 && b0 <= 1.0)) throw std::domain_error("branching ratio must lie in [0,1]");
    if (!(c >= 0.0)) throw std::domain_error("cooperativity must be >= 0");
    return (b0 + c) / (1.0 + c);
}

// Textbook Q/V estimate F = 3 Q / (4 pi^2 V), with V in (lambda/n)^3 units.
// xi in [0,1] is an optional dipole-orientation factor.
inline double theoretical_purcell(double q, double v_mode, double xi = 1.0) {
    if (!(q > 0.0)) throw std::domain_error("Q factor must be positive");
    if (!(v_mode > 0.0)) throw std::domain_error("mode volume must be positive");
    if (!(xi >= 0.0 && xi <= 1.0)) throw std::domain_error("orientation factor must lie in [0,1]");
    constexpr double four_pi_sq = 4.0 * 9.869604401089358;  // 4 pi^2
    return xi * 3.0 * q / (four_pi_sq * v_mode);
}

}  // namespace eocav
