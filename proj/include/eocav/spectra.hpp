#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "eocav/actuator.hpp"
#include "eocav/budget.hpp"
#include "eocav/cqed.hpp"
#include "eocav/ensemble.hpp"
#include "eocav/fit.hpp"
#include "eocav/rng.hpp"
#include "eocav/spectrum.hpp"
#include "eocav/units.hpp"
#include "eocav/util.hpp"

// Synthetic spectroscopy: cavity-filtered PLE sweeps over an ion ensemble
// and rate-equation spectral-hole spectra.

namespace eocav {

struct SweepPlan {
    std::vector<double> setpoints_hz;  // cavity offsets from the inhomogeneous center
    double scan_range_hz = 0.0;        // laser span per set-point, centered on it
    double step_hz = 0.0;
    double dwell_s = 0.0;
    double power_w = 0.0;
    double p_sat_w = 10e-9;            // saturation power, device knob
    double dark_rate_per_s = 0.0;

    // Set-points are offsets from the inhomogeneous center; the cavity rests
    // at rest_offset_hz and can be tuned coeff*vmax either way from there.
    void validate(const TuningActuator& act, double rest_offset_hz = 0.0) const {
        if (setpoints_hz.empty()) throw validation_error("plan: needs at least one set-point");
        if (!(scan_range_hz > 0.0)) throw validation_error("plan: scan range must be positive");
        if (!(step_hz > 0.0)) throw validation_error("plan: step must be positive");
        if (!(dwell_s > 0.0)) throw validation_error("plan: dwell must be positive");
        if (!(power_w >= 0.0)) throw validation_error("plan: power must be >= 0");
        if (!(p_sat_w > 0.0)) throw validation_error("plan: saturation power must be positive");
        if (!(dark_rate_per_s >= 0.0))
            throw validation_error("plan: dark rate must be >= 0");
        const double reach = std::abs(act.coeff_hz_per_v) * act.vmax_v;
        for (double sp : setpoints_hz)
            if (std::abs(sp - rest_offset_hz) > reach)
                throw validation_error(str_printf(
                    "plan: set-point %g Hz outside [%g, %g] Hz reachable from the rest "
                    "position", sp, rest_offset_hz - reach, rest_offset_hz + reach));
    }

    double saturation() const { return power_w / p_sat_w; }

    std::vector<double> grid_for(double setpoint_hz) const {
        const auto n = static_cast<std::size_t>(std::floor(scan_range_hz / step_hz)) + 1;
        std::vector<double> f(n);
        const double lo = setpoint_hz - 0.5 * scan_range_hz;
        for (std::size_t k = 0; k < n; ++k)
            f[k] = lo + static_cast<double>(k) * step_hz;
        return f;
    }
};

// Expected detected rate at laser frequency f with the cavity parked at
// setpoint_hz. Each ion's cooperativity is attenuated by the Lorentzian
// cavity filter at the ion-cavity offset; the emission rate saturates as
// s/(1+s).
inline double ple_expected_rate(double f_hz, double setpoint_hz, const IonEnsemble& ens,
                                double kappa_hz, double tau0_s, double saturation,
                                const DetectionChain& chain, double dark_rate_per_s) {
    const double sat = saturation / (1.0 + saturation);
    const double eta = chain.product();
    double rate = dark_rate_per_s;
    for (const auto& ion : ens.ions) {
        const double c_eff = detuned_cooperativity(ion.c0, ion.offset_hz - setpoint_hz,
                                                   kappa_hz);
        if (c_eff <= 0.0) continue;
        const double tau_c = tau0_s / (1.0 + c_eff);
        const double r_sat = beta_factor(c_eff) / (2.0 * tau_c);
        rate += sat * r_sat * lorentzian_peak1(f_hz, ion.offset_hz, ion.gamma_hz) * eta;
    }
    return rate;
}

// One spectrum per set-point. Noise off: v holds the expected rate (per s).
// Noise on: v holds Poisson counts with mean rate*dwell, drawn from a
// per-(set-point, bin) substream so results match sequential evaluation.
inline std::vector<Spectrum> synth_ple(const IonEnsemble& ens, const CavityParams& cav,
                                       const TuningActuator& act, const SweepPlan& plan,
                                       const EmitterParams& e, const DetectionChain& chain,
                                       bool noise, std::uint64_t seed,
                                       double rest_offset_hz = 0.0) {
    cav.validate();
    act.validate();
    e.validate();
    chain.validate();
    plan.validate(act, rest_offset_hz);
    const double kappa = cav.kappa_hz();
    std::vector<Spectrum> out;
    out.reserve(plan.setpoints_hz.size());
    for (std::size_t sp = 0; sp < plan.setpoints_hz.size(); ++sp) {
        Spectrum s;
        s.f_hz = plan.grid_for(plan.setpoints_hz[sp]);
        s.v.resize(s.f_hz.size());
        for (std::size_t k = 0; k < s.f_hz.size(); ++k) {
            const double rate =
                ple_expected_rate(s.f_hz[k], plan.setpoints_hz[sp], ens, kappa, e.tau0_s,
                                  plan.saturation(), chain, plan.dark_rate_per_s);
            if (noise) {
                auto eng = make_engine(substream_seed(seed, 0x706c65ULL + sp, k));
                s.v[k] = static_cast<double>(sample_poisson(eng, rate * plan.dwell_s));
            } else {
                s.v[k] = rate;
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

struct BurnSpec {
    double offset_hz = 0.0;  // burn laser offset
    double saturation = 0.0; // burn saturation parameter

    void validate() const {
        if (!(saturation >= 0.0)) throw validation_error("burn: saturation must be >= 0");
    }
};

inline double hole_fwhm_hz(double gamma_h_hz, double saturation) {
    return 2.0 * gamma_h_hz * std::sqrt(1.0 + saturation);
}

// Absorption-change spectrum of a burned hole: a Lorentzian dip of depth
// s_b/(1+s_b) (normalized units) and FWHM 2 gamma_h sqrt(1+s_b).
inline Spectrum synth_hole_burning(const EmitterParams& e, const BurnSpec& burn,
                                   double scan_range_hz, double step_hz) {
    e.validate();
    burn.validate();
    if (!(e.gamma_h_hz > 0.0))
        throw validation_error("hole burning: gamma_h must be positive");
    if (!(scan_range_hz > 0.0) || !(step_hz > 0.0))
        throw validation_error("hole burning: scan range and step must be positive");
    const double fwhm = hole_fwhm_hz(e.gamma_h_hz, burn.saturation);
    const double depth = burn.saturation / (1.0 + burn.saturation);
    const auto n = static_cast<std::size_t>(std::floor(scan_range_hz / step_hz)) + 1;
    Spectrum s;
    s.f_hz.resize(n);
    s.v.resize(n);
    const double lo = burn.offset_hz - 0.5 * scan_range_hz;
    for (std::size_t k = 0; k < n; ++k) {
        s.f_hz[k] = lo + static_cast<double>(k) * step_hz;
        s.v[k] = depth * lorentzian_peak1(s.f_hz[k], burn.offset_hz, fwhm);
    }
    return s;
}

struct PeakCountParams {
    double density_per_hz = 0.0;   // expected activated ions per Hz of window
    Window window;                 // sweep window, offsets from center
    double grid_step_hz = 0.0;
    double threshold_rel = 0.02;   // prominence relative to spectrum range
    std::size_t n_seeds = 64;
    std::uint64_t seed = 1;
    // Far-tail windows carry no Gaussian mass; sweeps out there sample the
    // Lorentzian wing instead.
    ProfileShape shape = ProfileShape::gaussian;
};

struct PeakCountResult {
    double mean = 0.0;
    double stddev = 0.0;
    std::size_t n_seeds = 0;
};

// Monte Carlo expectation of resolvable lines per sweep: ion count drawn
// Poisson from the density, noise-off spectrum synthesized at a set-point in
// the window center, peaks counted with separation >= one single-ion FWHM.
inline PeakCountResult count_resolved_peaks_expectation(
    const PeakCountParams& pc, const EmitterParams& e, const CouplingModel& cm,
    const CavityParams& cav, const TuningActuator& act, const DetectionChain& chain) {
    pc.window.validate();
    if (!(pc.density_per_hz >= 0.0))
        throw validation_error("peak count: density must be >= 0");
    if (!(pc.grid_step_hz > 0.0))
        throw validation_error("peak count: grid step must be positive");
    if (pc.n_seeds < 1) throw validation_error("peak count: needs at least one seed");

    const double center = 0.5 * (pc.window.lo_hz + pc.window.hi_hz);
    SweepPlan plan;
    plan.setpoints_hz = {center};
    plan.scan_range_hz = pc.window.width();
    plan.step_hz = pc.grid_step_hz;
    plan.dwell_s = 1.0;
    plan.power_w = 1.0;   // saturated
    plan.p_sat_w = 1e-12;
    const double min_sep = e.single_ion_fwhm_hz();

    double sum = 0.0, sumsq = 0.0;
    for (std::size_t r = 0; r < pc.n_seeds; ++r) {
        auto eng = make_engine(substream_seed(pc.seed, 0x6e696f6eULL, r));
        const auto n_ions = static_cast<std::size_t>(
            sample_poisson(eng, pc.density_per_hz * pc.window.width()));
        const auto ens = sample_ensemble(n_ions, pc.window, e, cm,
                                         substream_seed(pc.seed, 0x656e73ULL, r), pc.shape);
        const auto spectra = synth_ple(ens, cav, act, plan, e, chain, false, 0, center);
        const auto peaks = detect_peaks(spectra.front(), pc.threshold_rel, min_sep);
        const auto cnt = static_cast<double>(peaks.size());
        sum += cnt;
        sumsq += cnt * cnt;
    }
    PeakCountResult res;
    res.n_seeds = pc.n_seeds;
    res.mean = sum / static_cast<double>(pc.n_seeds);
    res.stddev = std::sqrt(std::max(0.0, sumsq / static_cast<double>(pc.n_seeds) -
                                             res.mean * res.mean));
    return res;
}

}  // namespace eocav
