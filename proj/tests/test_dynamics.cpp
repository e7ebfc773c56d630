#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "eocav/dynamics.hpp"
#include "eocav/units.hpp"

using namespace eocav;

namespace {

constexpr double kGamma0 = 370.12777463231475;
constexpr double kKappa = 3.8318824474662283e9;

TuningActuator step_act(double tau = 0.0) {
    TuningActuator a;
    a.coeff_hz_per_v = 270e6;
    a.vmax_v = 300.0;
    a.tau_sw_s = tau;
    return a;
}

double simpson(const std::vector<double>& t, const std::vector<double>& y) {
    // Composite Simpson on a uniform grid with an even interval count.
    const std::size_t n = t.size() - 1;
    const double h = (t.back() - t.front()) / static_cast<double>(n);
    double s = y.front() + y.back();
    for (std::size_t i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * y[i];
    return s * h / 3.0;
}

}  // namespace

TEST_CASE("resonant single population decays at the enhanced rate") {
    const double c0 = 7.5878801557298425;
    SimGrid grid{400e-6, 4000};
    const auto tr =
        simulate_decay_const({{1.0, c0}}, 0.0, kGamma0, kKappa, {1.0}, grid);

    REQUIRE(tr.size() == 4001);
    const double rate = kTwoPi * kGamma0 * (1.0 + c0);
    for (std::size_t i : {std::size_t{100}, std::size_t{1000}, std::size_t{4000}}) {
        const double expect = std::exp(-rate * tr.t_s[i]);
        CHECK(tr.population[i] == Catch::Approx(expect).epsilon(1e-8));
    }
    CHECK(lifetime_from_gamma(total_decay_rate(kGamma0, c0)) ==
          Catch::Approx(50.0705636551185e-6).epsilon(1e-13));
}

TEST_CASE("detuned decay approaches the natural rate") {
    const double c0 = 7.6;
    const double delta = 54e9;
    SimGrid grid{1000e-6, 4000};
    const auto tr =
        simulate_decay_const({{1.0, c0}}, delta, kGamma0, kKappa, {1.0}, grid);

    const double c_det = detuned_cooperativity(c0, delta, kKappa);
    CHECK(c_det == Catch::Approx(0.00955529424044533).epsilon(1e-12));
    const double rate = kTwoPi * kGamma0 * (1.0 + c_det);
    CHECK(tr.population.back() ==
          Catch::Approx(std::exp(-rate * grid.t_end_s)).epsilon(1e-8));
    CHECK(lifetime_from_gamma(total_decay_rate(kGamma0, c_det)) ==
          Catch::Approx(425.9301124496774e-6).epsilon(1e-12));
}

TEST_CASE("grid halving changes the solution by less than 1e-9") {
    const double c0 = 7.6;
    VoltageWaveform wf;
    wf.steps = {{0.0, 0.0}, {100e-6, 200.0}};
    wf.duration_s = 400e-6;
    const auto act = step_act(2.2755980665670935e-6);
    DetuningTrajectory traj(act, wf);

    // dt must sit well below tau_sw for the step-splitting error to reach
    // the 1e-9 scale; the error falls off as dt^4 from there.
    SimGrid coarse{400e-6, 32000};
    SimGrid fine{400e-6, 64000};
    const auto a = simulate_decay({{1.0, c0}}, traj, kGamma0, kKappa, {1.0}, coarse);
    const auto b = simulate_decay({{1.0, c0}}, traj, kGamma0, kKappa, {1.0}, fine);

    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(a.population[i] - b.population[i * 2]));
    CHECK(worst < 1e-9);
}

TEST_CASE("piecewise constant trajectory matches the analytic product") {
    const double c0 = 5.0;
    const auto act = step_act(0.0);
    VoltageWaveform wf;
    wf.steps = {{0.0, 0.0}, {100e-6, 200.0}, {250e-6, 0.0}};
    wf.duration_s = 400e-6;
    DetuningTrajectory traj(act, wf);
    SimGrid grid{400e-6, 4000};
    const auto tr = simulate_decay({{1.0, c0}}, traj, kGamma0, kKappa, {1.0}, grid);

    const double c_det = detuned_cooperativity(c0, act.detuning_from_voltage(200.0), kKappa);
    const double r_on = kTwoPi * kGamma0 * (1.0 + c0);
    const double r_off = kTwoPi * kGamma0 * (1.0 + c_det);
    auto analytic = [&](double t) {
        if (t <= 100e-6) return std::exp(-r_on * t);
        if (t <= 250e-6) return std::exp(-r_on * 100e-6 - r_off * (t - 100e-6));
        return std::exp(-r_on * 100e-6 - r_off * 150e-6 - r_on * (t - 250e-6));
    };
    double worst = 0.0;
    for (std::size_t i = 0; i < tr.size(); ++i)
        worst = std::max(worst, std::abs(tr.population[i] - analytic(tr.t_s[i])));
    CHECK(worst < 1e-8);
}

TEST_CASE("total emitted photons equal the pumped fraction") {
    const double c0 = 7.6;
    SimGrid grid{4e-3, 8000};  // ~ 80 enhanced lifetimes
    const auto tr =
        simulate_decay_const({{1.0, c0}}, 0.0, kGamma0, kKappa, {1.0}, grid);

    std::vector<double> total(tr.size());
    for (std::size_t i = 0; i < tr.size(); ++i)
        total[i] = tr.flux_cavity_per_s[i] + tr.flux_free_per_s[i];
    CHECK(simpson(tr.t_s, total) == Catch::Approx(1.0).epsilon(1e-6));

    SECTION("branching between channels follows the beta factor") {
        const double into_cavity = simpson(tr.t_s, tr.flux_cavity_per_s);
        CHECK(into_cavity == Catch::Approx(beta_factor(c0)).epsilon(1e-6));
    }
}

TEST_CASE("pump fraction scales the whole trace linearly") {
    SimGrid grid{400e-6, 2000};
    const auto full =
        simulate_decay_const({{1.0, 7.6}}, 0.0, kGamma0, kKappa, {1.0}, grid);
    const auto half =
        simulate_decay_const({{1.0, 7.6}}, 0.0, kGamma0, kKappa, {0.5}, grid);
    for (std::size_t i : {std::size_t{0}, std::size_t{500}, std::size_t{2000}}) {
        CHECK(half.population[i] == Catch::Approx(0.5 * full.population[i]).epsilon(1e-12));
        CHECK(half.flux_cavity_per_s[i] ==
              Catch::Approx(0.5 * full.flux_cavity_per_s[i]).epsilon(1e-12));
    }
}

TEST_CASE("two subpopulations superpose independently") {
    const double c1 = 7.431372549019608;
    const double c2 = 1.3626373626373627;
    SimGrid grid{1e-3, 2500};
    const auto mix = simulate_decay_const({{0.5, c1}, {0.5, c2}}, 0.0, kGamma0, kKappa,
                                          {1.0, 1.0}, grid);
    const auto only1 = simulate_decay_const({{1.0, c1}}, 0.0, kGamma0, kKappa, {1.0}, grid);
    const auto only2 = simulate_decay_const({{1.0, c2}}, 0.0, kGamma0, kKappa, {1.0}, grid);
    for (std::size_t i : {std::size_t{1}, std::size_t{1250}, std::size_t{2500}}) {
        CHECK(mix.population[i] ==
              Catch::Approx(0.5 * only1.population[i] + 0.5 * only2.population[i])
                  .epsilon(1e-12));
    }
    REQUIRE(mix.pop_i.size() == 2);
    CHECK(mix.pop_i[0][1250] == Catch::Approx(only1.population[1250]).epsilon(1e-12));
}

TEST_CASE("pinned pump window holds the population") {
    const auto act = step_act(0.0);
    VoltageWaveform wf;
    wf.steps = {{0.0, 0.0}};
    wf.duration_s = 400e-6;
    DetuningTrajectory traj(act, wf);
    SimGrid grid{400e-6, 2000};
    const auto tr =
        simulate_decay({{1.0, 7.6}}, traj, kGamma0, kKappa, {0.8}, grid, 50e-6);

    const double dt = grid.dt_s();
    const auto i_pin = static_cast<std::size_t>(std::llround(50e-6 / dt));
    for (std::size_t i = 0; i <= i_pin; ++i) CHECK(tr.population[i] == 0.8);
    CHECK(tr.population[i_pin + 1] < 0.8);
    const double rate = kTwoPi * kGamma0 * (1.0 + 7.6);
    CHECK(tr.population.back() ==
          Catch::Approx(0.8 * std::exp(-rate * (400e-6 - 50e-6))).epsilon(1e-8));
}

TEST_CASE("validation rejects bad inputs") {
    SimGrid grid{400e-6, 2000};
    CHECK_THROWS_AS(
        simulate_decay_const({{0.7, 7.6}}, 0.0, kGamma0, kKappa, {1.0}, grid),
        validation_error);
    CHECK_THROWS_AS(simulate_decay_const({}, 0.0, kGamma0, kKappa, {}, grid),
                    validation_error);
    CHECK_THROWS_AS(
        simulate_decay_const({{1.0, 7.6}}, 0.0, kGamma0, kKappa, {1.5}, grid),
        validation_error);

    SECTION("grid too coarse for the fastest rate") {
        SimGrid coarse{4.0, 2000};  // dt = 2 ms >> 1/(100 max rate)
        CHECK_THROWS_AS(
            simulate_decay_const({{1.0, 7.6}}, 0.0, kGamma0, kKappa, {1.0}, coarse),
            validation_error);
    }
    SECTION("grid too coarse for the actuator response") {
        const auto act = step_act(2.2755980665670935e-6);
        VoltageWaveform wf;
        wf.steps = {{0.0, 0.0}, {100e-6, 200.0}};
        wf.duration_s = 400e-6;
        DetuningTrajectory traj(act, wf);
        SimGrid coarse{400e-6, 100};  // dt = 4 us > tau_sw/10
        CHECK_THROWS_AS(
            simulate_decay({{1.0, 7.6}}, traj, kGamma0, kKappa, {1.0}, coarse),
            validation_error);
    }
}

TEST_CASE("storage protocol suppresses and resumes emission") {
    const double c0 = 7.6;
    ProtocolSpec spec;
    spec.pump_end_s = 1e-6;
    spec.pump_fraction = 1.0;
    spec.t_detune_s = 100e-6;
    spec.t_wait_s = 100e-6;
    spec.detune_voltage_v = 200.0;
    spec.t_end_s = 400e-6;
    spec.n_samples = 4000;
    const auto act = step_act(0.0);

    const auto r = simulate_storage_protocol({{1.0, c0}}, act, spec, kGamma0, kKappa);

    CHECK(r.predicted_resume_ratio == Catch::Approx(0.790744556345676).epsilon(1e-12));
    CHECK(r.resume_ratio == Catch::Approx(r.predicted_resume_ratio).epsilon(1e-3));

    CHECK(r.predicted_suppression_ratio ==
          Catch::Approx(0.0012572755579533328).epsilon(1e-12));
    CHECK(r.suppression_ratio ==
          Catch::Approx(r.predicted_suppression_ratio).epsilon(1e-3));

    SECTION("emission rate at mid-wait is suppressed by the same factor") {
        // flux_cavity mid-wait over flux_cavity just before the step.
        const double dt = spec.t_end_s / static_cast<double>(spec.n_samples);
        const auto i_pre = static_cast<std::size_t>(std::llround(spec.t_detune_s / dt)) - 1;
        const auto i_mid = static_cast<std::size_t>(
            std::llround((spec.t_detune_s + 0.5 * spec.t_wait_s) / dt));
        const double ratio = (r.trace.flux_cavity_per_s[i_mid] / r.trace.population[i_mid]) /
                             (r.trace.flux_cavity_per_s[i_pre] / r.trace.population[i_pre]);
        CHECK(ratio == Catch::Approx(r.predicted_suppression_ratio).epsilon(1e-6));
    }
}

TEST_CASE("protocol spec validation") {
    ProtocolSpec spec;
    spec.pump_end_s = 1e-6;
    spec.t_detune_s = 100e-6;
    spec.t_wait_s = 100e-6;
    spec.detune_voltage_v = 200.0;
    spec.t_end_s = 400e-6;
    spec.n_samples = 4000;
    REQUIRE_NOTHROW(spec.validate());

    auto bad = spec;
    bad.t_detune_s = 0.5e-6;  // inside the pump window
    CHECK_THROWS_AS(bad.validate(), validation_error);
    bad = spec;
    bad.t_end_s = 150e-6;  // ends inside the storage window
    CHECK_THROWS_AS(bad.validate(), validation_error);
}

TEST_CASE("transmission spectrum dip shape") {
    CavityParams cav;
    cav.f0_hz = freq_from_wavelength(980e-9);
    cav.q = 244730.0;
    cav.mode_volume = 50.0;
    const auto act = step_act(0.0);

    const double center = cav.f0_hz + 27e9;  // coeff * bias
    const double span = 20e9;
    const auto s = transmission_spectrum(cav, 100.0, act, center - 0.5 * span,
                                         center + 0.5 * span, 4001, 0.9);
    REQUIRE(s.size() == 4001);

    // Dip minimum sits at f0 + coeff*bias; the grid lands on it exactly.
    std::size_t imin = 0;
    for (std::size_t i = 1; i < s.size(); ++i)
        if (s.v[i] < s.v[imin]) imin = i;
    CHECK(std::abs(s.f_hz[imin] - center) <= span / 4000.0);
    CHECK(s.v[imin] == Catch::Approx(0.1).epsilon(1e-6));

    // Half-depth crossings sit kappa apart.
    const double kappa = cav.kappa_hz();
    const double at_half = 1.0 - 0.9 * 0.5;
    auto crossing = [&](std::size_t from, int dir) {
        std::size_t i = from;
        while (s.v[i] < at_half) i = static_cast<std::size_t>(static_cast<long>(i) + dir);
        const std::size_t j = static_cast<std::size_t>(static_cast<long>(i) - dir);
        const double f = (at_half - s.v[j]) / (s.v[i] - s.v[j]);
        return s.f_hz[j] + f * (s.f_hz[i] - s.f_hz[j]);
    };
    const double fwhm = crossing(imin, +1) - crossing(imin, -1);
    CHECK(fwhm == Catch::Approx(kappa).epsilon(1e-4));

    SECTION("scan beyond the tunable window is rejected") {
        CHECK_THROWS_AS(transmission_spectrum(cav, 0.0, act, cav.f0_hz - 200e9,
                                              cav.f0_hz + 200e9, 101, 0.9),
                        validation_error);
    }
    SECTION("depth outside (0,1] is rejected") {
        CHECK_THROWS_AS(transmission_spectrum(cav, 0.0, act, cav.f0_hz - span,
                                              cav.f0_hz + span, 101, 0.0),
                        validation_error);
        CHECK_THROWS_AS(transmission_spectrum(cav, 0.0, act, cav.f0_hz - span,
                                              cav.f0_hz + span, 101, 1.1),
                        validation_error);
    }
}
