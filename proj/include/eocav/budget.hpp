#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "eocav/cqed.hpp"
#include "eocav/util.hpp"

// Single-ion emission-rate and detection-chain arithmetic.

namespace eocav {

struct DetectionChain {
    double eta_c = 1.0;        // microcavity -> waveguide coupling
    double eta_o = 1.0;        // waveguide output (end facet)
    double eta_e = 1.0;        // one-end collection fraction
    double eta_m = 1.0;        // microscope collection/transmission
    double eta_chopper = 1.0;  // chopper duty cycle
    double eta_d = 1.0;        // detector efficiency

    std::array<double, 6> factors() const {
        return {eta_c, eta_o, eta_e, eta_m, eta_chopper, eta_d};
    }
    static constexpr std::array<const char*, 6> labels() {
        return {"eta_c", "eta_o", "eta_e", "eta_m", "eta_chopper", "eta_d"};
    }

    double product() const {
        double p = 1.0;
        for (double f : factors()) p *= f;
        return p;
    }

    void validate() const {
        for (double f : factors())
            if (!std::isfinite(f) || f <= 0.0 || f > 1.0)
                throw validation_error("detection chain: every efficiency must lie in (0,1]");
    }
};

// Saturated cycling rate into the cavity channel: beta/(2 tau_c) with
// beta = C/(1+C) and tau_c = tau0/(1+C).
inline double saturated_emission_rate(double c, double tau0_s) {
    if (!(c >= 0.0)) throw std::domain_error("cooperativity must be >= 0");
    if (!(tau0_s > 0.0)) throw std::domain_error("lifetime must be positive");
    const double tau_c = tau0_s / (1.0 + c);
    return beta_factor(c) / (2.0 * tau_c);
}

inline double detected_rate(double emission_per_s, const DetectionChain& chain) {
    if (!(emission_per_s >= 0.0)) throw std::domain_error("emission rate must be >= 0");
    chain.validate();
    return emission_per_s * chain.product();
}

// Published reference points the report compares against.
inline constexpr double kReferenceDetectedRate = 40.0;   // counts/s, as stated
inline constexpr double kObservedBandLo = 20.0;          // counts/s
inline constexpr double kObservedBandHi = 30.0;          // counts/s

struct ChainReport {
    double emission_per_s = 0.0;
    std::vector<std::pair<std::string, double>> stages;  // label, rate after stage
    double final_rate = 0.0;
    bool outside_observed_band = false;
    std::vector<std::string> notes;
};

inline ChainReport chain_report(double c, double tau0_s, const DetectionChain& chain) {
    chain.validate();
    ChainReport r;
    r.emission_per_s = saturated_emission_rate(c, tau0_s);
    double rate = r.emission_per_s;
    const auto f = chain.factors();
    const auto lbl = DetectionChain::labels();
    for (size_t i = 0; i < f.size(); ++i) {
        rate *= f[i];
        r.stages.emplace_back(lbl[i], rate);
    }
    r.final_rate = rate;
    r.outside_observed_band = (rate < kObservedBandLo || rate > kObservedBandHi);
    if (r.outside_observed_band)
        r.notes.push_back(str_printf(
            "final rate %.2f counts/s lies outside the observed 20-30 counts/s band", rate));
    r.notes.push_back(str_printf(
        "stated reference total is 40 counts/s; the product of the stated efficiencies gives "
        "%.2f counts/s (both reported, discrepancy not reconciled)", rate));
    return r;
}

inline std::string format_chain_report(const ChainReport& r) {
    std::string out;
    out += str_printf("emission_into_cavity_per_s = %.4f\n", r.emission_per_s);
    for (const auto& [label, rate] : r.stages)
        out += str_printf("after_%s = %.6f\n", label.c_str(), rate);
    out += str_printf("detected_counts_per_s = %.6f\n", r.final_rate);
    out += str_printf("within_observed_band_20_30 = %s\n",
                      r.outside_observed_band ? "false" : "true");
    for (const auto& n : r.notes) out += "# note: " + n + "\n";
    return out;
}

}  // namespace eocav
