#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "eocav/eocav.hpp"

using namespace eocav;
namespace fs = std::filesystem;

namespace {

void echo_config(const DeviceConfig& d, std::optional<std::uint64_t> seed) {
    std::cout << "# eocav " << kVersion << "\n";
    std::istringstream ss(d.canonical());
    std::string line;
    while (std::getline(ss, line)) std::cout << "# " << line << "\n";
    std::cout << str_printf("# config_hash=0x%016llx\n",
                            static_cast<unsigned long long>(d.hash()));
    if (seed)
        std::cout << str_printf("# seed=%llu\n", static_cast<unsigned long long>(*seed));
}

CsvMeta meta_for(const DeviceConfig& d, std::optional<std::uint64_t> seed) {
    CsvMeta m;
    m.config_hash = d.hash();
    if (seed) {
        m.seed = *seed;
        m.has_seed = true;
    }
    return m;
}

DeviceConfig load_config(const std::string& path) {
    if (path.empty()) return DeviceConfig::defaults();
    return DeviceConfig::from_file(path);
}

// Column selection for `fit`: explicit name, a preferred list, or the second
// column of a two-column file.
const std::vector<double>& pick_column(const CsvTable& t, const std::string& explicit_name,
                                       const std::vector<std::string>& preferred) {
    if (!explicit_name.empty()) return t.column(explicit_name);
    for (const auto& name : preferred)
        if (t.has_column(name)) return t.column(name);
    if (t.columns.size() == 2) return t.data[1];
    std::string have;
    for (const auto& c : t.columns) have += " " + c;
    throw validation_error("fit: cannot choose a value column, pass --column (have:" +
                           have + ")");
}

const std::vector<double>& pick_axis(const CsvTable& t, const std::string& name) {
    if (t.has_column(name)) return t.column(name);
    if (t.columns.size() == 2) return t.data[0];
    throw validation_error("fit: input needs a '" + name + "' column or exactly 2 columns");
}

void print_fit(const FitResult& r, const std::vector<std::string>& labels,
               const std::vector<double>& scales) {
    for (std::size_t i = 0; i < r.names.size(); ++i) {
        std::cout << str_printf("%s = %.10g\n", labels[i].c_str(), r.params[i] * scales[i]);
        std::cout << str_printf("stderr_%s = %.10g\n", labels[i].c_str(),
                                r.stderrs[i] * scales[i]);
    }
    std::cout << str_printf("residual_norm = %.10g\n", r.residual_norm);
    std::cout << str_printf("converged = %s\n", r.converged ? "true" : "false");
    std::cout << str_printf("iterations = %d\n", r.iterations);
    if (r.degenerate) std::cout << "degenerate = true\n";
}

void write_fit_json(const std::string& path, const std::string& model, const FitResult& r,
                    const std::vector<std::string>& labels,
                    const std::vector<double>& scales) {
    nlohmann::json j;
    j["model"] = model;
    for (std::size_t i = 0; i < r.names.size(); ++i) {
        j["params"][labels[i]] = r.params[i] * scales[i];
        j["stderr"][labels[i]] = r.stderrs[i] * scales[i];
    }
    j["residual_norm"] = r.residual_norm;
    j["converged"] = r.converged;
    j["iterations"] = r.iterations;
    j["degenerate"] = r.degenerate;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw validation_error("cannot open output file: " + path);
    f << j.dump(2) << "\n";
}

int run(int argc, char** argv) {
    CLI::App app{"tunable-microcavity emitter simulator and analysis toolkit"};
    app.require_subcommand(1);

    std::string cfg_path, plan_path, proto_path, in_path, out_path, model, column;
    std::uint64_t seed = 1;
    double c_override = -1.0, tau0_us = -1.0, tau_sw_us = -1.0;
    double pump_end_us = 1.0, pump_fraction = 1.0, t_detune_us = 0.0, t_wait_us = 0.0;
    double detune_v = 0.0, t_end_us = 0.0;
    std::size_t samples = 4000, points = 2001;
    double burn_offset_mhz = 0.0, saturation = 0.0, scan_range_mhz = 1000.0,
           step_mhz = 1.0;
    double bias_v = 0.0, scan_lo_ghz = 0.0, scan_hi_ghz = 0.0, depth = 0.9;
    double min_prominence = 0.05, min_separation_mhz = 100.0, gamma_h_mhz = -1.0;
    bool poisson_weights = false;

    auto* cqed_cmd = app.add_subcommand("cqed", "steady-state cavity QED report");
    cqed_cmd->add_option("--config", cfg_path, "device config file");

    auto* budget_cmd = app.add_subcommand("budget", "detection-chain count-rate report");
    budget_cmd->add_option("--config", cfg_path, "device config file");
    budget_cmd->add_option("--c", c_override, "cooperativity (default: from config)");
    budget_cmd->add_option("--tau0-us", tau0_us, "natural lifetime (default: from config)");

    auto* sim_cmd = app.add_subcommand("simulate", "run a protocol file, write a trace CSV");
    sim_cmd->add_option("--config", cfg_path, "device config file");
    sim_cmd->add_option("--protocol", proto_path, "protocol description file")->required();
    sim_cmd->add_option("--out", out_path, "output trace CSV")->required();
    sim_cmd->add_option("--tau-sw-us", tau_sw_us, "override actuator response time");

    auto* proto_cmd =
        app.add_subcommand("protocol", "storage protocol: detune, wait, re-tune");
    proto_cmd->add_option("--config", cfg_path, "device config file");
    proto_cmd->add_option("--pump-end-us", pump_end_us, "pump window end [us]");
    proto_cmd->add_option("--pump-fraction", pump_fraction, "prepared excited fraction");
    proto_cmd->add_option("--t-detune-us", t_detune_us, "detuning step time [us]")
        ->required();
    proto_cmd->add_option("--t-wait-us", t_wait_us, "storage duration [us]")->required();
    proto_cmd->add_option("--detune-v", detune_v, "storage voltage [V]")->required();
    proto_cmd->add_option("--t-end-us", t_end_us, "trace end [us]")->required();
    proto_cmd->add_option("--samples", samples, "trace sample intervals");
    proto_cmd->add_option("--tau-sw-us", tau_sw_us, "override actuator response time");
    proto_cmd->add_option("--out", out_path, "optional output trace CSV");

    auto* ple_cmd = app.add_subcommand("synth-ple", "Monte Carlo PLE sweep synthesis");
    ple_cmd->add_option("--config", cfg_path, "device config file");
    ple_cmd->add_option("--plan", plan_path, "sweep plan file")->required();
    ple_cmd->add_option("--seed", seed, "random seed");
    ple_cmd->add_option("--out", out_path, "output directory, one CSV per set-point")
        ->required();

    auto* hole_cmd = app.add_subcommand("synth-hole", "spectral-hole spectrum synthesis");
    hole_cmd->add_option("--config", cfg_path, "device config file");
    hole_cmd->add_option("--burn-offset-mhz", burn_offset_mhz, "burn laser offset [MHz]");
    hole_cmd->add_option("--saturation", saturation, "burn saturation parameter")
        ->required();
    hole_cmd->add_option("--scan-range-mhz", scan_range_mhz, "scan span [MHz]");
    hole_cmd->add_option("--step-mhz", step_mhz, "scan step [MHz]");
    hole_cmd->add_option("--gamma-h-mhz", gamma_h_mhz, "override homogeneous linewidth");
    hole_cmd->add_option("--out", out_path, "optional output CSV");

    auto* fit_cmd = app.add_subcommand("fit", "fit or analyze a CSV");
    fit_cmd
        ->add_option("--model", model,
                     "one of lorentzian|gaussian|exp1|exp2|peaks|switch")
        ->required();
    fit_cmd->add_option("--in", in_path, "input CSV")->required();
    fit_cmd->add_option("--column", column, "value column (default: auto)");
    fit_cmd->add_option("--out", out_path, "optional JSON report path");
    fit_cmd->add_flag("--poisson-weights", poisson_weights,
                      "weight residuals by 1/sqrt(max(y,1))");
    fit_cmd->add_option("--min-prominence", min_prominence,
                        "peaks: prominence relative to data range");
    fit_cmd->add_option("--min-separation-mhz", min_separation_mhz,
                        "peaks: merge radius [MHz]");

    auto* trans_cmd = app.add_subcommand("transmission", "cavity transmission spectrum");
    trans_cmd->add_option("--config", cfg_path, "device config file");
    trans_cmd->add_option("--bias-v", bias_v, "DC bias voltage [V]");
    trans_cmd->add_option("--scan-lo-ghz", scan_lo_ghz, "scan start, offset from f0 [GHz]")
        ->required();
    trans_cmd->add_option("--scan-hi-ghz", scan_hi_ghz, "scan end, offset from f0 [GHz]")
        ->required();
    trans_cmd->add_option("--points", points, "number of scan points");
    trans_cmd->add_option("--depth", depth, "dip depth in (0,1]");
    trans_cmd->add_option("--out", out_path, "output CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        std::cout << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n" << app.help();
        return 2;
    }

    if (cqed_cmd->parsed()) {
        const DeviceConfig d = load_config(cfg_path);
        echo_config(d, std::nullopt);
        std::cout << cqed_report(d);
        return 0;
    }

    if (budget_cmd->parsed()) {
        const DeviceConfig d = load_config(cfg_path);
        const double c = c_override >= 0.0 ? c_override : d.cooperativity0();
        const double tau0 = tau0_us > 0.0 ? tau0_us * 1e-6 : d.emitter.tau0_s;
        echo_config(d, std::nullopt);
        std::cout << format_chain_report(chain_report(c, tau0, d.chain));
        return 0;
    }

    if (sim_cmd->parsed()) {
        DeviceConfig d = load_config(cfg_path);
        if (tau_sw_us >= 0.0) d.actuator.tau_sw_s = tau_sw_us * 1e-6;
        const ProtocolFile pr = ProtocolFile::parse(proto_path);
        std::vector<Subpopulation> pops = pr.pops;
        if (pops.empty()) pops.push_back({1.0, d.cooperativity0()});
        DetuningTrajectory traj(d.actuator, pr.waveform);
        SimGrid grid{pr.waveform.duration_s, pr.n_samples};
        std::vector<double> pump(pops.size(), pr.pump_fraction);
        const Trace tr = simulate_decay(pops, traj, d.gamma0_hz(), d.kappa_hz(), pump,
                                        grid, pr.pump_until_s);
        echo_config(d, std::nullopt);
        write_trace_csv(out_path, tr, meta_for(d, std::nullopt));
        std::cout << "wrote " << out_path << " (" << tr.size() << " rows)\n";
        return 0;
    }

    if (proto_cmd->parsed()) {
        DeviceConfig d = load_config(cfg_path);
        if (tau_sw_us >= 0.0) d.actuator.tau_sw_s = tau_sw_us * 1e-6;
        ProtocolSpec spec;
        spec.pump_end_s = pump_end_us * 1e-6;
        spec.pump_fraction = pump_fraction;
        spec.t_detune_s = t_detune_us * 1e-6;
        spec.t_wait_s = t_wait_us * 1e-6;
        spec.detune_voltage_v = detune_v;
        spec.t_end_s = t_end_us * 1e-6;
        spec.n_samples = samples;
        const std::vector<Subpopulation> pops{{1.0, d.cooperativity0()}};
        const ProtocolResult r =
            simulate_storage_protocol(pops, d.actuator, spec, d.gamma0_hz(), d.kappa_hz());
        echo_config(d, std::nullopt);
        std::cout << str_printf("delta_off_ghz = %.10g\n",
                                d.actuator.detuning_from_voltage(detune_v) * 1e-9);
        std::cout << str_printf("resume_ratio = %.10g\n", r.resume_ratio);
        std::cout << str_printf("predicted_resume_ratio = %.10g\n",
                                r.predicted_resume_ratio);
        std::cout << str_printf("suppression_ratio = %.10g\n", r.suppression_ratio);
        std::cout << str_printf("predicted_suppression_ratio = %.10g\n",
                                r.predicted_suppression_ratio);
        if (!out_path.empty()) {
            write_trace_csv(out_path, r.trace, meta_for(d, std::nullopt));
            std::cout << "wrote " << out_path << " (" << r.trace.size() << " rows)\n";
        }
        return 0;
    }

    if (ple_cmd->parsed()) {
        DeviceConfig d = load_config(cfg_path);
        const PlanFile pf = PlanFile::parse(plan_path);
        if (!pf.device_overrides.empty()) d.apply(pf.device_overrides);
        // Reject unreachable set-points before the (possibly expensive)
        // ensemble draw.
        pf.plan.validate(d.actuator, d.rest_offset_hz);
        std::size_t n_ions = pf.n_ions;
        if (!pf.n_ions_explicit) {
            auto eng = make_engine(substream_seed(seed, 0x6e696f6e73ULL, 0));
            n_ions = static_cast<std::size_t>(
                sample_poisson(eng, d.density_per_hz * pf.window.width()));
        }
        const IonEnsemble ens =
            sample_ensemble(n_ions, pf.window, d.emitter, {d.coupling_c_max()},
                            substream_seed(seed, 0x656e73656dULL, 0), d.shape);
        const std::vector<Spectrum> spectra =
            synth_ple(ens, d.cavity, d.actuator, pf.plan, d.emitter, d.chain, pf.noise,
                      seed, d.rest_offset_hz);
        fs::create_directories(out_path);
        echo_config(d, seed);
        std::cout << str_printf("n_ions = %zu\n", n_ions);
        for (std::size_t i = 0; i < spectra.size(); ++i) {
            CsvMeta m = meta_for(d, seed);
            m.extra.push_back(
                str_printf("setpoint_ghz=%.17g", pf.plan.setpoints_hz[i] * 1e-9));
            m.extra.push_back(std::string("noise=") + (pf.noise ? "on" : "off"));
            m.extra.push_back(str_printf("n_ions=%zu", n_ions));
            const fs::path file = fs::path(out_path) / str_printf("sp%02zu.csv", i);
            write_spectrum_csv(file.string(), spectra[i],
                               pf.noise ? "counts" : "rate_per_s", m);
            std::cout << "wrote " << file.string() << "\n";
        }
        return 0;
    }

    if (hole_cmd->parsed()) {
        DeviceConfig d = load_config(cfg_path);
        if (gamma_h_mhz > 0.0) d.emitter.gamma_h_hz = gamma_h_mhz * 1e6;
        BurnSpec burn{burn_offset_mhz * 1e6, saturation};
        const Spectrum s =
            synth_hole_burning(d.emitter, burn, scan_range_mhz * 1e6, step_mhz * 1e6);
        echo_config(d, std::nullopt);
        std::cout << str_printf("hole_fwhm_mhz = %.10g\n",
                                hole_fwhm_hz(d.emitter.gamma_h_hz, saturation) * 1e-6);
        std::cout << str_printf("hole_depth = %.10g\n", saturation / (1.0 + saturation));
        if (!out_path.empty()) {
            write_spectrum_csv(out_path, s, "delta_a_norm", meta_for(d, std::nullopt));
            std::cout << "wrote " << out_path << " (" << s.size() << " rows)\n";
        }
        return 0;
    }

    if (fit_cmd->parsed()) {
        const CsvTable t = read_csv(in_path);
        LmOptions opt;
        opt.poisson_weights = poisson_weights;
        if (model == "lorentzian" || model == "gaussian") {
            const auto& fg = pick_axis(t, "f_ghz");
            const auto& v = pick_column(t, column,
                                        {"counts", "rate_per_s", "delta_a_norm",
                                         "transmission"});
            Spectrum s;
            s.f_hz.reserve(fg.size());
            for (double f : fg) s.f_hz.push_back(f * 1e9);
            s.v = v;
            const FitResult r = (model == "lorentzian") ? fit_lorentzian(s, {}, opt)
                                                        : fit_gaussian(s, {}, opt);
            print_fit(r, {"center_ghz", "fwhm_ghz", "amplitude", "offset"},
                      {1e-9, 1e-9, 1.0, 1.0});
            std::cout << str_printf("fwhm_mhz = %.10g\n", r.params[1] * 1e-6);
            if (!out_path.empty())
                write_fit_json(out_path, model, r,
                               {"center_ghz", "fwhm_ghz", "amplitude", "offset"},
                               {1e-9, 1e-9, 1.0, 1.0});
        } else if (model == "exp1" || model == "exp2") {
            const auto& tu = pick_axis(t, "t_us");
            const auto& v = pick_column(t, column, {"population", "flux_free_per_s"});
            const int nc = (model == "exp1") ? 1 : 2;
            const FitResult r = fit_exponential(tu, v, nc, {}, opt);
            const std::vector<std::string> labels =
                (nc == 1) ? std::vector<std::string>{"tau_us", "amplitude", "offset"}
                          : std::vector<std::string>{"tau1_us", "tau2_us", "a1", "a2",
                                                     "offset"};
            print_fit(r, labels, std::vector<double>(labels.size(), 1.0));
            if (!out_path.empty())
                write_fit_json(out_path, model, r, labels,
                               std::vector<double>(labels.size(), 1.0));
        } else if (model == "peaks") {
            const auto& fg = pick_axis(t, "f_ghz");
            const auto& v = pick_column(t, column,
                                        {"counts", "rate_per_s", "delta_a_norm"});
            Spectrum s;
            s.f_hz.reserve(fg.size());
            for (double f : fg) s.f_hz.push_back(f * 1e9);
            s.v = v;
            const auto peaks = detect_peaks(s, min_prominence, min_separation_mhz * 1e6);
            std::cout << str_printf("n_peaks = %zu\n", peaks.size());
            for (std::size_t i = 0; i < peaks.size(); ++i)
                std::cout << str_printf("peak_%02zu: center_ghz = %.10g, height = %.10g\n",
                                        i, peaks[i].center_hz * 1e-9, peaks[i].height);
            if (!out_path.empty()) {
                nlohmann::json j;
                j["model"] = "peaks";
                j["n_peaks"] = peaks.size();
                for (const auto& p : peaks)
                    j["peaks"].push_back(
                        {{"center_ghz", p.center_hz * 1e-9}, {"height", p.height}});
                std::ofstream f(out_path, std::ios::binary);
                if (!f) throw validation_error("cannot open output file: " + out_path);
                f << j.dump(2) << "\n";
            }
        } else if (model == "switch") {
            const auto& tu = pick_axis(t, "t_us");
            const auto& v = pick_column(t, column, {"delta_ghz", "flux_cavity_per_s"});
            const double sw = estimate_switching_time(tu, v);
            std::cout << str_printf("switching_time_us = %.10g\n", sw);
            if (!out_path.empty()) {
                nlohmann::json j;
                j["model"] = "switch";
                j["switching_time_us"] = sw;
                std::ofstream f(out_path, std::ios::binary);
                if (!f) throw validation_error("cannot open output file: " + out_path);
                f << j.dump(2) << "\n";
            }
        } else {
            throw validation_error(
                "fit: unknown model (use lorentzian|gaussian|exp1|exp2|peaks|switch)");
        }
        return 0;
    }

    if (trans_cmd->parsed()) {
        const DeviceConfig d = load_config(cfg_path);
        const Spectrum abs_spec = transmission_spectrum(
            d.cavity, bias_v, d.actuator, d.cavity.f0_hz + scan_lo_ghz * 1e9,
            d.cavity.f0_hz + scan_hi_ghz * 1e9, points, depth);
        Spectrum rel = abs_spec;
        for (double& f : rel.f_hz) f -= d.cavity.f0_hz;
        echo_config(d, std::nullopt);
        CsvMeta m = meta_for(d, std::nullopt);
        m.extra.push_back(str_printf("f0_thz=%.17g", d.cavity.f0_hz * 1e-12));
        m.extra.push_back(str_printf("bias_v=%.17g", bias_v));
        write_spectrum_csv(out_path, rel, "transmission", m);
        std::cout << "wrote " << out_path << " (" << rel.size() << " rows)\n";
        return 0;
    }

    return 2;  // unreachable with require_subcommand(1)
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const validation_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
}
