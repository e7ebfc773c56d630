#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "eocav/actuator.hpp"
#include "eocav/budget.hpp"
#include "eocav/cqed.hpp"
#include "eocav/dynamics.hpp"
#include "eocav/ensemble.hpp"
#include "eocav/spectra.hpp"
#include "eocav/units.hpp"
#include "eocav/util.hpp"

// Plain key=value configuration ('#' comments, blank lines ignored). Unknown
// keys are rejected so typos fail loudly. Public keys carry their unit in the
// name; everything is converted to base SI (Hz, s, W, V) on load.

namespace eocav {

using KvMap = std::map<std::string, std::string>;

inline KvMap parse_kv_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw validation_error("cannot open config file: " + path);
    KvMap kv;
    std::string line;
    std::size_t lineno = 0;
    auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t");
        if (a == std::string::npos) return std::string();
        const auto b = s.find_last_not_of(" \t");
        return s.substr(a, b - a + 1);
    };
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw validation_error(
                str_printf("%s:%zu: expected key=value", path.c_str(), lineno));
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty() || val.empty())
            throw validation_error(
                str_printf("%s:%zu: empty key or value", path.c_str(), lineno));
        if (kv.count(key))
            throw validation_error(
                str_printf("%s:%zu: duplicate key %s", path.c_str(), lineno, key.c_str()));
        kv[key] = val;
    }
    return kv;
}

namespace detail {

inline double to_double(const std::string& key, const std::string& val) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(val, &pos);
        if (pos != val.size()) throw validation_error("");
        return v;
    } catch (...) {
        throw validation_error("config: key " + key + " has non-numeric value '" + val + "'");
    }
}

inline std::vector<double> to_double_list(const std::string& key, const std::string& val) {
    std::vector<double> out;
    std::istringstream ss(val);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(to_double(key, item));
    if (out.empty()) throw validation_error("config: key " + key + " has an empty list");
    return out;
}

}  // namespace detail

// Searches the literal path first, then $EOCAV_CONFIG_DIR.
inline std::string resolve_config_path(const std::string& name) {
    namespace fs = std::filesystem;
    if (fs::exists(name)) return name;
    if (const char* dir = std::getenv("EOCAV_CONFIG_DIR")) {
        const fs::path p = fs::path(dir) / name;
        if (fs::exists(p)) return p.string();
    }
    throw validation_error("config file not found: " + name);
}

struct DeviceConfig {
    CavityParams cavity;
    EmitterParams emitter;
    TuningActuator actuator;
    DetectionChain chain;
    double g_hz = 0.0;
    double rest_offset_hz = 0.0;   // cavity rest position from the inhomogeneous center
    double c_max = 0.0;            // 0 = derive from g
    double density_per_hz = 0.0;   // activated ions per Hz of inhomogeneous line
    ProfileShape shape = ProfileShape::gaussian;

    static DeviceConfig defaults() {
        DeviceConfig d;
        d.emitter.lambda0_m = 980e-9;
        d.emitter.tau0_s = 430e-6;
        d.emitter.b0 = 0.25;
        d.emitter.gamma_h_hz = 48.5e6;
        d.emitter.diffusion_fwhm_hz = 166.5e6;
        d.emitter.inhom_fwhm_hz = 64e9;
        d.cavity.f0_hz = freq_from_wavelength(d.emitter.lambda0_m);
        d.cavity.q = 79833.0;
        d.cavity.mode_volume = 50.0;  // in (lambda/n)^3
        d.g_hz = 1.64e6;
        d.actuator.coeff_hz_per_v = 270e6;
        d.actuator.vmax_v = 300.0;
        d.actuator.tau_sw_s = 5e-6 / kLn9;
        d.chain.eta_c = 0.3;
        d.chain.eta_o = 0.3;
        d.chain.eta_e = 0.5;
        d.chain.eta_m = 0.7;
        d.chain.eta_chopper = 0.5;
        d.chain.eta_d = 0.6;
        d.density_per_hz = 3.0 / 1e9;
        return d;
    }

    double gamma0_hz() const { return emitter.gamma0_hz(); }
    double kappa_hz() const { return cavity.kappa_hz(); }

    CqedParams cqed() const { return {g_hz, kappa_hz(), gamma0_hz()}; }

    double cooperativity0() const { return cooperativity(cqed()); }

    double coupling_c_max() const { return c_max > 0.0 ? c_max : cooperativity0(); }

    void validate() const {
        cavity.validate();
        emitter.validate();
        actuator.validate();
        chain.validate();
        cqed().validate();
        if (!(density_per_hz >= 0.0))
            throw validation_error("config: ensemble density must be >= 0");
        if (c_max < 0.0) throw validation_error("config: ensemble.c_max must be >= 0");
    }

    // Applies recognized device keys from kv; unknown keys not in
    // `tolerated_prefixes` are an error.
    void apply(const KvMap& kv, const std::vector<std::string>& tolerated_prefixes = {}) {
        bool f0_explicit = false;
        bool have_g = false, have_tauc = false;
        double tau_c_s = 0.0;
        for (const auto& [key, val] : kv) {
            if (key == "cavity.f0_thz") {
                cavity.f0_hz = detail::to_double(key, val) * 1e12;
                f0_explicit = true;
            } else if (key == "cavity.q") {
                cavity.q = detail::to_double(key, val);
            } else if (key == "cavity.mode_volume") {
                cavity.mode_volume = detail::to_double(key, val);
            } else if (key == "cavity.rest_offset_ghz") {
                rest_offset_hz = detail::to_double(key, val) * 1e9;
            } else if (key == "emitter.lambda0_nm") {
                emitter.lambda0_m = detail::to_double(key, val) * 1e-9;
            } else if (key == "emitter.tau0_us") {
                emitter.tau0_s = detail::to_double(key, val) * 1e-6;
            } else if (key == "emitter.b0") {
                emitter.b0 = detail::to_double(key, val);
            } else if (key == "emitter.gamma_h_mhz") {
                emitter.gamma_h_hz = detail::to_double(key, val) * 1e6;
            } else if (key == "emitter.diffusion_fwhm_mhz") {
                emitter.diffusion_fwhm_hz = detail::to_double(key, val) * 1e6;
            } else if (key == "emitter.inhom_fwhm_ghz") {
                emitter.inhom_fwhm_hz = detail::to_double(key, val) * 1e9;
            } else if (key == "cqed.g_mhz") {
                g_hz = detail::to_double(key, val) * 1e6;
                have_g = true;
            } else if (key == "cqed.tau_c_us") {
                tau_c_s = detail::to_double(key, val) * 1e-6;
                have_tauc = true;
            } else if (key == "actuator.coeff_mhz_per_v") {
                actuator.coeff_hz_per_v = detail::to_double(key, val) * 1e6;
            } else if (key == "actuator.vmax_v") {
                actuator.vmax_v = detail::to_double(key, val);
            } else if (key == "actuator.tau_sw_us") {
                actuator.tau_sw_s = detail::to_double(key, val) * 1e-6;
            } else if (key == "chain.eta_c") {
                chain.eta_c = detail::to_double(key, val);
            } else if (key == "chain.eta_o") {
                chain.eta_o = detail::to_double(key, val);
            } else if (key == "chain.eta_e") {
                chain.eta_e = detail::to_double(key, val);
            } else if (key == "chain.eta_m") {
                chain.eta_m = detail::to_double(key, val);
            } else if (key == "chain.eta_chopper") {
                chain.eta_chopper = detail::to_double(key, val);
            } else if (key == "chain.eta_d") {
                chain.eta_d = detail::to_double(key, val);
            } else if (key == "ensemble.c_max") {
                c_max = detail::to_double(key, val);
            } else if (key == "ensemble.density_per_ghz") {
                density_per_hz = detail::to_double(key, val) / 1e9;
            } else if (key == "ensemble.inhom_shape") {
                if (val == "gaussian")
                    shape = ProfileShape::gaussian;
                else if (val == "lorentzian")
                    shape = ProfileShape::lorentzian;
                else
                    throw validation_error(
                        "config: ensemble.inhom_shape must be gaussian or lorentzian");
            } else {
                bool tolerated = false;
                for (const auto& p : tolerated_prefixes)
                    if (key.rfind(p, 0) == 0) tolerated = true;
                if (!tolerated)
                    throw validation_error("config: unknown key " + key);
            }
        }
        if (!f0_explicit && kv.count("emitter.lambda0_nm"))
            cavity.f0_hz = freq_from_wavelength(emitter.lambda0_m);
        if (have_g && have_tauc)
            throw validation_error("config: give cqed.g_mhz or cqed.tau_c_us, not both");
        if (have_tauc)
            g_hz = coupling_from_lifetimes(emitter.tau0_s, tau_c_s, kappa_hz());
        validate();
    }

    static DeviceConfig from_file(const std::string& path,
                                  const std::vector<std::string>& tolerated_prefixes = {}) {
        DeviceConfig d = defaults();
        d.apply(parse_kv_file(resolve_config_path(path)), tolerated_prefixes);
        return d;
    }

    // Canonical rendering of every effective value; basis of the hash.
    std::string canonical() const {
        std::string s;
        auto add = [&](const char* k, double v) {
            s += str_printf("%s=%.17g\n", k, v);
        };
        add("actuator.coeff_mhz_per_v", actuator.coeff_hz_per_v * 1e-6);
        add("actuator.tau_sw_us", actuator.tau_sw_s * 1e6);
        add("actuator.vmax_v", actuator.vmax_v);
        add("cavity.f0_thz", cavity.f0_hz * 1e-12);
        add("cavity.mode_volume", cavity.mode_volume);
        add("cavity.q", cavity.q);
        add("cavity.rest_offset_ghz", rest_offset_hz * 1e-9);
        add("chain.eta_c", chain.eta_c);
        add("chain.eta_chopper", chain.eta_chopper);
        add("chain.eta_d", chain.eta_d);
        add("chain.eta_e", chain.eta_e);
        add("chain.eta_m", chain.eta_m);
        add("chain.eta_o", chain.eta_o);
        add("cqed.g_mhz", g_hz * 1e-6);
        add("emitter.b0", emitter.b0);
        add("emitter.diffusion_fwhm_mhz", emitter.diffusion_fwhm_hz * 1e-6);
        add("emitter.gamma_h_mhz", emitter.gamma_h_hz * 1e-6);
        add("emitter.inhom_fwhm_ghz", emitter.inhom_fwhm_hz * 1e-9);
        add("emitter.lambda0_nm", emitter.lambda0_m * 1e9);
        add("emitter.tau0_us", emitter.tau0_s * 1e6);
        add("ensemble.c_max", c_max);
        add("ensemble.density_per_ghz", density_per_hz * 1e9);
        s += str_printf("ensemble.inhom_shape=%s\n",
                        shape == ProfileShape::gaussian ? "gaussian" : "lorentzian");
        return s;
    }

    std::uint64_t hash() const { return fnv1a64(canonical()); }

    static std::uint64_t fnv1a64(const std::string& s) {
        std::uint64_t h = 14695981039346656037ULL;
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ULL;
        }
        return h;
    }
};

// Sweep-plan file: plan.* keys, plus device overrides that are merged over
// the device config by the caller. A plan may override ensemble.* keys and
// cavity.rest_offset_ghz (the rest position belongs to the chip a sweep was
// planned for).
struct PlanFile {
    SweepPlan plan;
    std::size_t n_ions = 0;     // 0 = draw from density
    bool n_ions_explicit = false;
    Window window;              // ion-sampling window
    bool window_explicit = false;
    bool noise = true;
    KvMap device_overrides;

    static PlanFile parse(const std::string& path) {
        const KvMap kv = parse_kv_file(resolve_config_path(path));
        PlanFile pf;
        bool have_setpoints = false, have_range = false, have_step = false,
             have_dwell = false, have_power = false;
        double wlo = 0.0, whi = 0.0;
        bool have_wlo = false, have_whi = false;
        for (const auto& [key, val] : kv) {
            if (key == "plan.setpoints_ghz") {
                for (double v : detail::to_double_list(key, val))
                    pf.plan.setpoints_hz.push_back(v * 1e9);
                have_setpoints = true;
            } else if (key == "plan.scan_range_ghz") {
                pf.plan.scan_range_hz = detail::to_double(key, val) * 1e9;
                have_range = true;
            } else if (key == "plan.step_mhz") {
                pf.plan.step_hz = detail::to_double(key, val) * 1e6;
                have_step = true;
            } else if (key == "plan.dwell_s") {
                pf.plan.dwell_s = detail::to_double(key, val);
                have_dwell = true;
            } else if (key == "plan.power_nw") {
                pf.plan.power_w = detail::to_double(key, val) * 1e-9;
                have_power = true;
            } else if (key == "plan.p_sat_nw") {
                pf.plan.p_sat_w = detail::to_double(key, val) * 1e-9;
            } else if (key == "plan.dark_rate_per_s") {
                pf.plan.dark_rate_per_s = detail::to_double(key, val);
            } else if (key == "plan.noise") {
                if (val == "on")
                    pf.noise = true;
                else if (val == "off")
                    pf.noise = false;
                else
                    throw validation_error("config: plan.noise must be on or off");
            } else if (key == "plan.n_ions") {
                pf.n_ions = static_cast<std::size_t>(detail::to_double(key, val));
                pf.n_ions_explicit = true;
            } else if (key == "plan.window_lo_ghz") {
                wlo = detail::to_double(key, val) * 1e9;
                have_wlo = true;
            } else if (key == "plan.window_hi_ghz") {
                whi = detail::to_double(key, val) * 1e9;
                have_whi = true;
            } else if (key.rfind("ensemble.", 0) == 0 ||
                       key == "cavity.rest_offset_ghz") {
                pf.device_overrides[key] = val;
            } else {
                throw validation_error("config: unknown plan key " + key);
            }
        }
        if (!have_setpoints || !have_range || !have_step || !have_dwell || !have_power)
            throw validation_error(
                "plan: plan.setpoints_ghz, plan.scan_range_ghz, plan.step_mhz, "
                "plan.dwell_s, plan.power_nw are required");
        if (have_wlo != have_whi)
            throw validation_error("plan: window needs both plan.window_lo_ghz and _hi_ghz");
        if (have_wlo) {
            pf.window = {wlo, whi};
            pf.window.validate();
            pf.window_explicit = true;
        } else {
            double lo = pf.plan.setpoints_hz.front(), hi = lo;
            for (double sp : pf.plan.setpoints_hz) {
                lo = std::min(lo, sp);
                hi = std::max(hi, sp);
            }
            pf.window = {lo - pf.plan.scan_range_hz, hi + pf.plan.scan_range_hz};
        }
        return pf;
    }
};

// Protocol file for the time-domain simulator: segment lines plus scalars.
//   duration_us 1000
//   samples 4000
//   pump_fraction 1.0
//   pop <weight> <c0>            # optional, default one pop at the config C
//   segment <t_us> <voltage_v> [pump]
// Pumped segments must form a prefix; the population is held at
// pump_fraction until the last pumped segment ends.
struct ProtocolFile {
    VoltageWaveform waveform;
    std::vector<Subpopulation> pops;  // empty = single pop at the device C
    double pump_fraction = 1.0;
    double pump_until_s = 0.0;
    std::size_t n_samples = 0;

    static ProtocolFile parse(const std::string& path) {
        std::ifstream f(resolve_config_path(path));
        if (!f) throw validation_error("cannot open protocol file: " + path);
        ProtocolFile pr;
        std::string line;
        std::size_t lineno = 0;
        double duration_us = 0.0;
        bool pump_open = true;
        std::vector<std::pair<VoltageStep, bool>> steps;
        while (std::getline(f, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            const auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            std::istringstream ss(line);
            std::string word;
            if (!(ss >> word)) continue;
            auto num = [&](double& out) {
                std::string v;
                if (!(ss >> v))
                    throw validation_error(
                        str_printf("%s:%zu: missing value", path.c_str(), lineno));
                out = detail::to_double(word, v);
            };
            if (word == "duration_us") {
                num(duration_us);
            } else if (word == "samples") {
                double v;
                num(v);
                pr.n_samples = static_cast<std::size_t>(v);
            } else if (word == "pump_fraction") {
                num(pr.pump_fraction);
            } else if (word == "pop") {
                double w, c0;
                num(w);
                num(c0);
                pr.pops.push_back({w, c0});
            } else if (word == "segment") {
                double t_us, volts;
                num(t_us);
                num(volts);
                std::string flag;
                bool pumped = false;
                if (ss >> flag) {
                    if (flag != "pump")
                        throw validation_error(str_printf(
                            "%s:%zu: unknown segment flag '%s'", path.c_str(), lineno,
                            flag.c_str()));
                    pumped = true;
                }
                steps.push_back({{t_us * 1e-6, volts}, pumped});
            } else {
                throw validation_error(str_printf("%s:%zu: unknown directive '%s'",
                                                  path.c_str(), lineno, word.c_str()));
            }
            std::string rest;
            if (ss >> rest)
                throw validation_error(
                    str_printf("%s:%zu: trailing text '%s'", path.c_str(), lineno,
                               rest.c_str()));
        }
        if (steps.empty())
            throw validation_error("protocol: needs at least one segment line");
        if (!(duration_us > 0.0))
            throw validation_error("protocol: duration_us is required");
        if (pr.n_samples < 2)
            throw validation_error("protocol: samples (>= 2) is required");
        for (std::size_t i = 0; i < steps.size(); ++i) {
            pr.waveform.steps.push_back(steps[i].first);
            if (steps[i].second) {
                if (!pump_open)
                    throw validation_error(
                        "protocol: pumped segments must form a prefix of the waveform");
                pr.pump_until_s = (i + 1 < steps.size())
                                      ? steps[i + 1].first.t_s
                                      : duration_us * 1e-6;
            } else {
                pump_open = false;
            }
        }
        pr.waveform.duration_s = duration_us * 1e-6;
        return pr;
    }
};

}  // namespace eocav
