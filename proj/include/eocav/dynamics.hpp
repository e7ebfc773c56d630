#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "eocav/actuator.hpp"
#include "eocav/cqed.hpp"
#include "eocav/spectrum.hpp"
#include "eocav/units.hpp"
#include "eocav/util.hpp"

// Time-domain decay of emitter sub-populations under a moving cavity line.
// Each sub-population obeys dP/dt = -2 pi gamma0 (1 + C_i(delta(t))) P with
// C_i(delta) the Lorentzian-filtered cooperativity. Enhanced emission
// (the C gamma0 term) is routed to the cavity/waveguide channel, natural
// emission (the gamma0 term) to free space.

namespace eocav {

struct Subpopulation {
    double weight = 1.0;  // ensemble fraction
    double c0 = 0.0;      // on-resonance cooperativity

    void validate() const {
        if (!(weight >= 0.0 && weight <= 1.0))
            throw validation_error("subpopulation: weight must lie in [0,1]");
        if (!(c0 >= 0.0)) throw validation_error("subpopulation: c0 must be >= 0");
    }
};

inline void validate_populations(const std::vector<Subpopulation>& pops) {
    if (pops.empty()) throw validation_error("decay model: needs at least one sub-population");
    double wsum = 0.0;
    for (const auto& p : pops) {
        p.validate();
        wsum += p.weight;
    }
    if (std::abs(wsum - 1.0) > 1e-9)
        throw validation_error(str_printf("decay model: weights sum to %g, expected 1", wsum));
}

struct Trace {
    std::vector<double> t_s;
    std::vector<double> delta_hz;
    std::vector<double> population;        // weighted total excited fraction
    std::vector<double> flux_cavity_per_s;
    std::vector<double> flux_free_per_s;
    std::vector<std::vector<double>> pop_i;  // per sub-population

    std::size_t size() const { return t_s.size(); }
};

struct SimGrid {
    double t_end_s = 0.0;
    std::size_t n_samples = 0;  // intervals; trace has n_samples+1 rows

    double dt_s() const { return t_end_s / static_cast<double>(n_samples); }

    void validate() const {
        if (!(t_end_s > 0.0)) throw validation_error("grid: t_end must be positive");
        if (n_samples < 2) throw validation_error("grid: needs at least 2 intervals");
    }
};

namespace detail {

// One classical RK4 step for dP/dt = -r(t) P, shared Lorentzian filter
// l(t) = 1/(1+(2 delta/kappa)^2) evaluated at the three stage times.
inline void rk4_step(std::vector<double>& p, const std::vector<Subpopulation>& pops,
                     double two_pi_gamma0, double la, double lm, double lb, double h) {
    for (std::size_t i = 0; i < pops.size(); ++i) {
        const double ra = two_pi_gamma0 * (1.0 + pops[i].c0 * la);
        const double rm = two_pi_gamma0 * (1.0 + pops[i].c0 * lm);
        const double rb = two_pi_gamma0 * (1.0 + pops[i].c0 * lb);
        const double y = p[i];
        const double k1 = -ra * y;
        const double k2 = -rm * (y + 0.5 * h * k1);
        const double k3 = -rm * (y + 0.5 * h * k2);
        const double k4 = -rb * (y + h * k3);
        p[i] = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
}

inline double lorentz_filter(double delta_hz, double kappa_hz) {
    const double x = 2.0 * delta_hz / kappa_hz;
    return 1.0 / (1.0 + x * x);
}

}  // namespace detail

// Integrates the sub-populations over a uniform sample grid, one RK4 step per
// sample interval, splitting any interval that contains a waveform breakpoint
// so every step stays inside one smooth trajectory segment. Populations may
// be pinned to their pump value until pin_until_s (models the pump window).
inline Trace simulate_decay(const std::vector<Subpopulation>& pops,
                            const DetuningTrajectory& traj, double gamma0_hz,
                            double kappa_hz, const std::vector<double>& pump,
                            const SimGrid& grid, double pin_until_s = 0.0) {
    validate_populations(pops);
    grid.validate();
    if (!(gamma0_hz > 0.0)) throw validation_error("decay model: gamma0 must be positive");
    if (!(kappa_hz > 0.0)) throw validation_error("decay model: kappa must be positive");
    if (pump.size() != pops.size())
        throw validation_error("decay model: one pump fraction per sub-population");
    for (double f : pump)
        if (!(f >= 0.0 && f <= 1.0))
            throw validation_error("decay model: pump fractions must lie in [0,1]");
    if (!(pin_until_s >= 0.0) || pin_until_s >= grid.t_end_s)
        throw validation_error("decay model: pump window must end before t_end");

    const double dt = grid.dt_s();
    double cmax = 0.0;
    for (const auto& p : pops) cmax = std::max(cmax, p.c0);
    const double max_rate = kTwoPi * gamma0_hz * (1.0 + cmax);
    if (dt > 1.0 / (100.0 * max_rate))
        throw validation_error(str_printf(
            "grid: dt %g s too coarse, need <= %g s (1/(100 max rate))", dt,
            1.0 / (100.0 * max_rate)));
    if (traj.tau_sw_s() > 0.0 && dt > traj.tau_sw_s() / 10.0)
        throw validation_error(str_printf(
            "grid: dt %g s too coarse for actuator response, need <= %g s", dt,
            traj.tau_sw_s() / 10.0));

    const double two_pi_gamma0 = kTwoPi * gamma0_hz;
    const std::size_t n = grid.n_samples;

    Trace tr;
    tr.t_s.reserve(n + 1);
    tr.pop_i.assign(pops.size(), {});

    std::vector<double> state = pump;

    // Interior event times every step must respect: trajectory breakpoints
    // and the pump-window end.
    std::vector<double> events = traj.breakpoints(grid.t_end_s);
    if (pin_until_s > 0.0) events.push_back(pin_until_s);
    std::sort(events.begin(), events.end());

    auto record = [&](double t, std::size_t seg) {
        const double delta = traj.detuning_in_segment(seg, t);
        const double l = detail::lorentz_filter(delta, kappa_hz);
        double popsum = 0.0, fc = 0.0, ff = 0.0;
        for (std::size_t i = 0; i < pops.size(); ++i) {
            const double w = pops[i].weight;
            popsum += w * state[i];
            fc += w * two_pi_gamma0 * pops[i].c0 * l * state[i];
            ff += w * two_pi_gamma0 * state[i];
            tr.pop_i[i].push_back(state[i]);
        }
        tr.t_s.push_back(t);
        tr.delta_hz.push_back(delta);
        tr.population.push_back(popsum);
        tr.flux_cavity_per_s.push_back(fc);
        tr.flux_free_per_s.push_back(ff);
    };

    record(0.0, traj.segment_index(0.0));

    for (std::size_t k = 0; k < n; ++k) {
        const double ta = static_cast<double>(k) * dt;
        const double tb = (k + 1 == n) ? grid.t_end_s : static_cast<double>(k + 1) * dt;

        // Sub-intervals split at interior events.
        double left = ta;
        for (;;) {
            double right = tb;
            for (double ev : events)
                if (ev > left + 1e-18 && ev < right - 1e-18) {
                    right = ev;
                    break;
                }
            const std::size_t seg = traj.segment_index(left);
            if (left >= pin_until_s) {
                const double h = right - left;
                const double la =
                    detail::lorentz_filter(traj.detuning_in_segment(seg, left), kappa_hz);
                const double lm = detail::lorentz_filter(
                    traj.detuning_in_segment(seg, left + 0.5 * h), kappa_hz);
                const double lb =
                    detail::lorentz_filter(traj.detuning_in_segment(seg, right), kappa_hz);
                detail::rk4_step(state, pops, two_pi_gamma0, la, lm, lb, h);
            }
            if (right >= tb) break;
            left = right;
        }
        record(tb, traj.segment_index(tb));
    }
    return tr;
}

// Convenience: constant detuning via a degenerate waveform.
inline Trace simulate_decay_const(const std::vector<Subpopulation>& pops,
                                  double delta_hz, double gamma0_hz, double kappa_hz,
                                  const std::vector<double>& pump, const SimGrid& grid) {
    TuningActuator act;
    act.coeff_hz_per_v = (delta_hz == 0.0) ? 1.0 : delta_hz;
    act.vmax_v = 1.0;
    act.tau_sw_s = 0.0;
    VoltageWaveform wf;
    wf.steps.push_back({0.0, delta_hz == 0.0 ? 0.0 : 1.0});
    DetuningTrajectory traj(act, wf);
    return simulate_decay(pops, traj, gamma0_hz, kappa_hz, pump, grid);
}

struct ProtocolSpec {
    double pump_end_s = 0.0;      // excited fraction held until here
    double pump_fraction = 1.0;
    double t_detune_s = 0.0;      // step to the storage voltage
    double t_wait_s = 0.0;        // storage duration
    double detune_voltage_v = 0.0;
    double t_end_s = 0.0;
    std::size_t n_samples = 0;

    void validate() const {
        if (!(pump_end_s >= 0.0)) throw validation_error("protocol: pump window must be >= 0");
        if (!(pump_fraction >= 0.0 && pump_fraction <= 1.0))
            throw validation_error("protocol: pump fraction must lie in [0,1]");
        if (!(t_detune_s > pump_end_s))
            throw validation_error("protocol: detuning step must come after the pump window");
        if (!(t_wait_s >= 0.0)) throw validation_error("protocol: wait must be >= 0");
        if (!(t_end_s > t_detune_s + t_wait_s))
            throw validation_error("protocol: t_end must extend past the storage window");
        if (n_samples < 2) throw validation_error("protocol: needs at least 2 samples");
    }
};

struct ProtocolResult {
    Trace trace;
    double resume_ratio = 0.0;            // P(t_detune + t_wait) / P(t_detune), from trace
    double predicted_resume_ratio = 0.0;  // exp(-2 pi gamma0 (1+C(off)) t_wait)
    double suppression_ratio = 0.0;       // mid-wait flux_cavity / (2 pi gamma0 C0 P)
    double predicted_suppression_ratio = 0.0;  // C(delta_off)/C(0)
};

inline ProtocolResult simulate_storage_protocol(const std::vector<Subpopulation>& pops,
                                                const TuningActuator& act,
                                                const ProtocolSpec& spec, double gamma0_hz,
                                                double kappa_hz) {
    spec.validate();
    VoltageWaveform wf;
    wf.steps.push_back({0.0, 0.0});
    wf.steps.push_back({spec.t_detune_s, spec.detune_voltage_v});
    if (spec.t_wait_s > 0.0)
        wf.steps.push_back({spec.t_detune_s + spec.t_wait_s, 0.0});
    DetuningTrajectory traj(act, wf);

    SimGrid grid{spec.t_end_s, spec.n_samples};
    std::vector<double> pump(pops.size(), spec.pump_fraction);
    ProtocolResult r;
    r.trace = simulate_decay(pops, traj, gamma0_hz, kappa_hz, pump, grid, spec.pump_end_s);

    auto nearest = [&](double t) {
        const double dt = grid.dt_s();
        std::size_t k = static_cast<std::size_t>(std::llround(t / dt));
        return std::min(k, r.trace.size() - 1);
    };
    const std::size_t i_detune = nearest(spec.t_detune_s);
    const std::size_t i_return = nearest(spec.t_detune_s + spec.t_wait_s);
    const std::size_t i_mid = nearest(spec.t_detune_s + 0.5 * spec.t_wait_s);

    r.resume_ratio = r.trace.population[i_return] / r.trace.population[i_detune];

    const double delta_off = act.detuning_from_voltage(spec.detune_voltage_v);
    double c_on = 0.0, c_off = 0.0;
    for (const auto& p : pops) {
        c_on += p.weight * p.c0;
        c_off += p.weight * detuned_cooperativity(p.c0, delta_off, kappa_hz);
    }
    r.predicted_resume_ratio =
        std::exp(-kTwoPi * gamma0_hz * (1.0 + c_off) * spec.t_wait_s);
    r.predicted_suppression_ratio = c_off / c_on;

    const double p_mid = r.trace.population[i_mid];
    r.suppression_ratio =
        r.trace.flux_cavity_per_s[i_mid] / (kTwoPi * gamma0_hz * c_on * p_mid);
    return r;
}

// Normalized transmission across the cavity line: a Lorentzian dip of depth
// d in (0,1], centered at f0 shifted by the actuator bias, FWHM f0/Q.
inline Spectrum transmission_spectrum(const CavityParams& cav, double bias_v,
                                      const TuningActuator& act, double scan_lo_hz,
                                      double scan_hi_hz, std::size_t n_points,
                                      double depth = 1.0) {
    cav.validate();
    act.validate();
    if (!(depth > 0.0 && depth <= 1.0))
        throw validation_error("transmission: dip depth must lie in (0,1]");
    const double reach = std::abs(act.coeff_hz_per_v) * act.vmax_v + 10.0 * cav.kappa_hz();
    if (scan_lo_hz < cav.f0_hz - reach || scan_hi_hz > cav.f0_hz + reach)
        throw validation_error("transmission: scan range extends beyond the tunable window");
    const double center = cav.f0_hz + act.detuning_from_voltage(bias_v);
    const double fwhm = cav.kappa_hz();
    Spectrum s;
    s.f_hz = linspace(scan_lo_hz, scan_hi_hz, n_points);
    s.v.resize(s.f_hz.size());
    for (std::size_t i = 0; i < s.f_hz.size(); ++i)
        s.v[i] = 1.0 - depth * lorentzian_peak1(s.f_hz[i], center, fwhm);
    return s;
}

}  // namespace eocav
