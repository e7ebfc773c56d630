#pragma once

#include <cmath>
#include <string>

#include "eocav/budget.hpp"
#include "eocav/config.hpp"
#include "eocav/cqed.hpp"
#include "eocav/util.hpp"

// Human-readable key-value reports for the CLI.

namespace eocav {

// Quoted design value for the flagship cavity's enhanced branching; the
// exact formula lands at 0.913, so the report surfaces both when close.
inline constexpr double kReferenceEnhancedBranching = 0.915;

inline std::string cqed_report(const DeviceConfig& d) {
    d.validate();
    const auto q = d.cqed();
    const double c = cooperativity(q);
    const double tau_c = d.emitter.tau0_s / (1.0 + c);
    const double branching = enhanced_branching(d.emitter.b0, c);
    const double sat = saturated_emission_rate(c, d.emitter.tau0_s);

    std::string s;
    s += str_printf("g_mhz = %.6f\n", d.g_hz * 1e-6);
    s += str_printf("kappa_ghz = %.6f\n", d.kappa_hz() * 1e-9);
    s += str_printf("gamma0_hz = %.6f\n", d.gamma0_hz());
    s += str_printf("cooperativity = %.6f\n", c);
    s += str_printf("beta_factor = %.6f\n", beta_factor(c));
    s += str_printf("tau0_us = %.6f\n", d.emitter.tau0_s * 1e6);
    s += str_printf("tau_c_us = %.6f\n", tau_c * 1e6);
    s += str_printf("branching_b0 = %.6f\n", d.emitter.b0);
    s += str_printf("branching_enhanced = %.6f\n", branching);
    s += str_printf("purcell_theoretical = %.6f\n",
                    theoretical_purcell(d.cavity.q, d.cavity.mode_volume));
    s += str_printf("saturated_rate_per_s = %.6f\n", sat);
    s += str_printf("detected_rate_per_s = %.6f\n", detected_rate(sat, d.chain));
    if (std::abs(branching - kReferenceEnhancedBranching) < 0.01)
        s += str_printf(
            "# note: computed enhanced branching %.4f; the quoted design value is 0.915 "
            "(91.5%%), the difference comes from rounding of the cooperativity\n",
            branching);
    if (const auto warn = q.ordering_warning())
        s += "# warning: " + *warn + "\n";
    return s;
}

}  // namespace eocav
