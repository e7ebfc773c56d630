#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "eocav/util.hpp"

// Electro-optic tuning: DC voltage -> cavity detuning, plus the finite-speed
// response to stepped voltage commands. The actuator is modeled as a linear
// coefficient behind a single-pole low-pass with time constant tau_sw;
// tau_sw = 0 is the ideal (instant) limit.

namespace eocav {

inline constexpr double kLn9 = 2.1972245773362196;

struct TuningActuator {
    double coeff_hz_per_v = 0.0;  // signed linear tuning coefficient
    double vmax_v = 0.0;          // |command| ceiling
    double tau_sw_s = 0.0;        // single-pole response time constant

    void validate() const {
        if (!std::isfinite(coeff_hz_per_v) || coeff_hz_per_v == 0.0)
            throw validation_error("actuator: tuning coefficient must be finite and nonzero");
        if (!(vmax_v > 0.0))
            throw validation_error("actuator: vmax must be positive");
        if (!(tau_sw_s >= 0.0) || !std::isfinite(tau_sw_s))
            throw validation_error("actuator: tau_sw must be finite and >= 0");
    }

    double detuning_from_voltage(double v) const {
        if (std::abs(v) > vmax_v * (1.0 + 1e-12))
            throw validation_error(
                str_printf("actuator: |%g V| exceeds vmax %g V", v, vmax_v));
        return coeff_hz_per_v * v;
    }

    double voltage_from_detuning(double delta_hz) const {
        const double v = delta_hz / coeff_hz_per_v;
        if (std::abs(v) > vmax_v * (1.0 + 1e-12))
            throw validation_error(str_printf(
                "actuator: detuning %g Hz needs %g V, beyond vmax %g V", delta_hz, v, vmax_v));
        return v;
    }

    // Full reachable span, symmetric about zero.
    double max_detuning_span_hz() const { return 2.0 * std::abs(coeff_hz_per_v) * vmax_v; }

    // 10%-90% rise time of the single-pole response.
    double switching_time_10_90_s() const { return tau_sw_s * kLn9; }
};

// Piecewise-constant voltage command: step j holds from t_s until the next
// step. The first step must start at t = 0.
struct VoltageStep {
    double t_s = 0.0;
    double v = 0.0;
};

struct VoltageWaveform {
    std::vector<VoltageStep> steps;
    double duration_s = 0.0;  // 0 means open-ended

    void validate(const TuningActuator& act) const {
        if (steps.empty()) throw validation_error("waveform: needs at least one step");
        if (steps.front().t_s != 0.0)
            throw validation_error("waveform: first step must start at t = 0");
        for (size_t i = 1; i < steps.size(); ++i)
            if (!(steps[i].t_s > steps[i - 1].t_s))
                throw validation_error("waveform: step times must be strictly increasing");
        if (duration_s != 0.0 && !(duration_s > steps.back().t_s))
            throw validation_error("waveform: duration must extend past the last step");
        for (const auto& s : steps)
            if (std::abs(s.v) > act.vmax_v * (1.0 + 1e-12))
                throw validation_error(str_printf(
                    "waveform: command %g V exceeds vmax %g V", s.v, act.vmax_v));
    }
};

// Filtered voltage and the detuning it maps to, precomputed per segment so
// that evaluation inside a segment is a single smooth exponential. Segment i
// covers [t0, t1); the final segment extends to +infinity.
class DetuningTrajectory {
public:
    struct Segment {
        double t0 = 0.0;
        double t1 = 0.0;      // infinity for the last segment
        double v_cmd = 0.0;   // commanded (target) voltage
        double v_start = 0.0; // filtered voltage at t0
    };

    DetuningTrajectory(const TuningActuator& act, const VoltageWaveform& wf)
        : act_(act) {
        act.validate();
        wf.validate(act);
        double state = wf.steps.front().v;  // starts settled on the first command
        for (size_t i = 0; i < wf.steps.size(); ++i) {
            Segment s;
            s.t0 = wf.steps[i].t_s;
            s.t1 = (i + 1 < wf.steps.size()) ? wf.steps[i + 1].t_s
                                             : std::numeric_limits<double>::infinity();
            s.v_cmd = wf.steps[i].v;
            s.v_start = state;
            segments_.push_back(s);
            state = voltage_in_segment(s, s.t1 == std::numeric_limits<double>::infinity()
                                              ? s.t0
                                              : s.t1);
        }
    }

    size_t segment_count() const { return segments_.size(); }
    const Segment& segment(size_t i) const { return segments_.at(i); }
    double tau_sw_s() const { return act_.tau_sw_s; }

    // Breakpoints interior to [0, t_end): integrators must not step across these.
    std::vector<double> breakpoints(double t_end) const {
        std::vector<double> b;
        for (size_t i = 1; i < segments_.size(); ++i)
            if (segments_[i].t0 < t_end) b.push_back(segments_[i].t0);
        return b;
    }

    double voltage(double t) const { return voltage_in_segment(locate(t), t); }

    double detuning(double t) const { return act_.coeff_hz_per_v * voltage(t); }

    // Segment-addressed evaluation: callers integrating [t0,t1] use the
    // owning segment's smooth form even at the shared endpoint.
    double detuning_in_segment(size_t i, double t) const {
        return act_.coeff_hz_per_v * voltage_in_segment(segments_.at(i), t);
    }

    size_t segment_index(double t) const {
        auto it = std::upper_bound(segments_.begin(), segments_.end(), t,
                                   [](double tv, const Segment& s) { return tv < s.t0; });
        if (it == segments_.begin())
            throw validation_error("trajectory: time precedes first segment");
        return static_cast<size_t>(it - segments_.begin()) - 1;
    }

private:
    const Segment& locate(double t) const { return segments_[segment_index(t)]; }

    double voltage_in_segment(const Segment& s, double t) const {
        if (act_.tau_sw_s == 0.0) return s.v_cmd;
        return s.v_cmd + (s.v_start - s.v_cmd) * std::exp(-(t - s.t0) / act_.tau_sw_s);
    }

    TuningActuator act_;
    std::vector<Segment> segments_;
};

struct DetuningSeries {
    std::vector<double> t_s;
    std::vector<double> delta_hz;
};

// Uniformly sampled detuning response over the waveform's duration.
inline DetuningSeries detuning_trajectory(const VoltageWaveform& wf,
                                          const TuningActuator& act, double dt_s) {
    if (!(dt_s > 0.0)) throw validation_error("trajectory: dt must be positive");
    if (act.tau_sw_s > 0.0 && dt_s > act.tau_sw_s / 10.0)
        throw validation_error(str_printf(
            "trajectory: dt %g s too coarse, need <= tau_sw/10 = %g s", dt_s,
            act.tau_sw_s / 10.0));
    if (!(wf.duration_s > 0.0))
        throw validation_error("trajectory: waveform duration must be set");
    DetuningTrajectory traj(act, wf);
    DetuningSeries out;
    const auto n = static_cast<size_t>(std::ceil(wf.duration_s / dt_s));
    out.t_s.reserve(n + 1);
    out.delta_hz.reserve(n + 1);
    for (size_t k = 0; k <= n; ++k) {
        const double t = std::min(static_cast<double>(k) * dt_s, wf.duration_s);
        out.t_s.push_back(t);
        out.delta_hz.push_back(traj.detuning(t));
    }
    return out;
}

}  // namespace eocav
