#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "eocav/config.hpp"
#include "eocav/csv.hpp"

using namespace eocav;

namespace {

struct TempFile {
    std::filesystem::path path;
    explicit TempFile(const std::string& name, const std::string& content) {
        path = std::filesystem::temp_directory_path() /
               ("eocav_test_" + std::to_string(::getpid()) + "_" + name);
        std::ofstream f(path);
        f << content;
    }
    ~TempFile() { std::filesystem::remove(path); }
    std::string str() const { return path.string(); }
};

}  // namespace

TEST_CASE("kv parser") {
    TempFile f("kv.cfg",
               "# comment\n"
               "a.b = 1.5\n"
               "\n"
               "c.d=hello   # trailing comment\n");
    const auto kv = parse_kv_file(f.str());
    REQUIRE(kv.size() == 2);
    CHECK(kv.at("a.b") == "1.5");
    CHECK(kv.at("c.d") == "hello");

    SECTION("rejects malformed lines") {
        TempFile bad("kv_bad.cfg", "just words\n");
        CHECK_THROWS_AS(parse_kv_file(bad.str()), validation_error);
    }
    SECTION("rejects duplicates") {
        TempFile dup("kv_dup.cfg", "a=1\na=2\n");
        CHECK_THROWS_AS(parse_kv_file(dup.str()), validation_error);
    }
    SECTION("missing file") {
        CHECK_THROWS_AS(parse_kv_file("/nonexistent/nope.cfg"), validation_error);
    }
}

TEST_CASE("default device config is self consistent") {
    const auto d = DeviceConfig::defaults();
    REQUIRE_NOTHROW(d.validate());
    CHECK(d.cavity.f0_hz == Catch::Approx(305.91067142857145e12).epsilon(1e-15));
    CHECK(d.kappa_hz() == Catch::Approx(3.8318824474662283e9).epsilon(1e-13));
    CHECK(d.gamma0_hz() == Catch::Approx(370.12777463231475).epsilon(1e-13));
    CHECK(d.cooperativity0() == Catch::Approx(7.585493382498483).epsilon(1e-13));
    CHECK(d.coupling_c_max() == Catch::Approx(d.cooperativity0()).epsilon(1e-15));
    CHECK(d.chain.product() == Catch::Approx(0.00945).epsilon(1e-13));
    CHECK(d.actuator.switching_time_10_90_s() == Catch::Approx(5e-6).epsilon(1e-13));
}

TEST_CASE("config file application and unit conversions") {
    TempFile f("dev.cfg",
               "cavity.q = 64065\n"
               "cqed.tau_c_us = 62.7\n"
               "cavity.rest_offset_ghz = 140\n"
               "ensemble.density_per_ghz = 3\n");
    const auto d = DeviceConfig::from_file(f.str());
    CHECK(d.cavity.q == 64065.0);
    CHECK(d.kappa_hz() == Catch::Approx(4.775004626997135e9).epsilon(1e-13));
    CHECK(d.g_hz == Catch::Approx(1608827.32725764).epsilon(1e-12));
    CHECK(d.cooperativity0() == Catch::Approx(430.0 / 62.7 - 1.0).epsilon(1e-12));
    CHECK(d.rest_offset_hz == Catch::Approx(140e9).epsilon(1e-13));
    CHECK(d.density_per_hz == Catch::Approx(3e-9).epsilon(1e-13));

    SECTION("unknown keys rejected") {
        TempFile bad("dev_bad.cfg", "cavity.qq = 1\n");
        CHECK_THROWS_AS(DeviceConfig::from_file(bad.str()), validation_error);
    }
    SECTION("g and tau_c are mutually exclusive") {
        TempFile both("dev_both.cfg", "cqed.g_mhz = 1.64\ncqed.tau_c_us = 62.7\n");
        CHECK_THROWS_AS(DeviceConfig::from_file(both.str()), validation_error);
    }
    SECTION("wavelength change re-derives the cavity frequency") {
        TempFile wl("dev_wl.cfg", "emitter.lambda0_nm = 981\n");
        const auto dw = DeviceConfig::from_file(wl.str());
        CHECK(dw.cavity.f0_hz ==
              Catch::Approx(freq_from_wavelength(981e-9)).epsilon(1e-15));
    }
}

TEST_CASE("canonical form and hash are stable and sensitive") {
    const auto d = DeviceConfig::defaults();
    const auto h1 = d.hash();
    CHECK(h1 == DeviceConfig::defaults().hash());

    auto d2 = d;
    d2.cavity.q = 64065.0;
    CHECK(d2.hash() != h1);

    const auto canon = d.canonical();
    CHECK(canon.find("cavity.q=79833\n") != std::string::npos);
    CHECK(canon.find("cqed.g_mhz=1.6399999999999999\n") != std::string::npos);
    CHECK(canon.find("ensemble.inhom_shape=gaussian") != std::string::npos);
    // Alphabetical key order.
    CHECK(canon.find("actuator.") < canon.find("cavity."));
    CHECK(canon.find("cavity.") < canon.find("chain."));
}

TEST_CASE("plan file parsing") {
    TempFile f("sweep.plan",
               "plan.setpoints_ghz = -10, 0, 10\n"
               "plan.scan_range_ghz = 4\n"
               "plan.step_mhz = 20\n"
               "plan.dwell_s = 1\n"
               "plan.power_nw = 10\n"
               "plan.dark_rate_per_s = 0.5\n"
               "plan.noise = off\n"
               "ensemble.c_max = 7.6\n");
    const auto pf = PlanFile::parse(f.str());
    REQUIRE(pf.plan.setpoints_hz.size() == 3);
    CHECK(pf.plan.setpoints_hz[0] == Catch::Approx(-10e9));
    CHECK(pf.plan.scan_range_hz == Catch::Approx(4e9));
    CHECK(pf.plan.step_hz == Catch::Approx(20e6));
    CHECK(pf.plan.saturation() == Catch::Approx(1.0));
    CHECK_FALSE(pf.noise);
    CHECK_FALSE(pf.n_ions_explicit);
    CHECK(pf.device_overrides.count("ensemble.c_max") == 1);
    // Default window: set-point hull widened by the scan range.
    CHECK(pf.window.lo_hz == Catch::Approx(-14e9));
    CHECK(pf.window.hi_hz == Catch::Approx(14e9));

    SECTION("required keys enforced") {
        TempFile bad("sweep_bad.plan", "plan.setpoints_ghz = 0\n");
        CHECK_THROWS_AS(PlanFile::parse(bad.str()), validation_error);
    }
    SECTION("grid size from range and step") {
        CHECK(pf.plan.grid_for(0.0).size() == 201);
        CHECK(pf.plan.grid_for(10e9).front() == Catch::Approx(8e9));
        CHECK(pf.plan.grid_for(10e9).back() == Catch::Approx(12e9));
    }
}

TEST_CASE("protocol file parsing") {
    TempFile f("store.protocol",
               "duration_us 400\n"
               "samples 4000\n"
               "pump_fraction 0.9\n"
               "pop 0.5 7.4\n"
               "pop 0.5 1.4\n"
               "segment 0 0 pump\n"
               "segment 100 200\n"
               "segment 200 0\n");
    const auto pr = ProtocolFile::parse(f.str());
    CHECK(pr.waveform.duration_s == Catch::Approx(400e-6));
    REQUIRE(pr.waveform.steps.size() == 3);
    CHECK(pr.waveform.steps[1].t_s == Catch::Approx(100e-6));
    CHECK(pr.waveform.steps[1].v == 200.0);
    CHECK(pr.pump_fraction == 0.9);
    CHECK(pr.pump_until_s == Catch::Approx(100e-6));
    CHECK(pr.n_samples == 4000);
    REQUIRE(pr.pops.size() == 2);
    CHECK(pr.pops[1].c0 == 1.4);

    SECTION("pump segments must be a prefix") {
        TempFile bad("store_bad.protocol",
                     "duration_us 400\nsamples 4000\n"
                     "segment 0 0\nsegment 100 200 pump\n");
        CHECK_THROWS_AS(ProtocolFile::parse(bad.str()), validation_error);
    }
    SECTION("unknown directives rejected") {
        TempFile bad("store_bad2.protocol",
                     "duration_us 400\nsamples 4000\nsegment 0 0\nwobble 3\n");
        CHECK_THROWS_AS(ProtocolFile::parse(bad.str()), validation_error);
    }
}

TEST_CASE("csv write and read round trip") {
    Spectrum s;
    s.f_hz = {1e9, 2e9, 3.5e9};
    s.v = {0.25, 7.125, 1.0 / 3.0};
    CsvMeta meta;
    meta.config_hash = 0xdeadbeef12345678ULL;
    meta.seed = 42;
    meta.has_seed = true;
    meta.extra = {"setpoint_ghz=1"};

    TempFile holder("spec.csv", "");
    write_spectrum_csv(holder.str(), s, "rate_per_s", meta);
    const auto t = read_csv(holder.str());
    REQUIRE(t.columns.size() == 2);
    CHECK(t.columns[0] == "f_ghz");
    CHECK(t.columns[1] == "rate_per_s");
    REQUIRE(t.rows() == 3);
    CHECK(t.column("f_ghz")[2] == Catch::Approx(3.5).epsilon(1e-15));
    CHECK(t.column("rate_per_s")[2] == Catch::Approx(1.0 / 3.0).epsilon(1e-16));

    SECTION("comment header carries the hash and seed") {
        std::ifstream f(holder.str());
        std::string all((std::istreambuf_iterator<char>(f)),
                        std::istreambuf_iterator<char>());
        CHECK(all.find("# config_hash=0xdeadbeef12345678") != std::string::npos);
        CHECK(all.find("# seed=42") != std::string::npos);
        CHECK(all.find("# setpoint_ghz=1") != std::string::npos);
    }
    SECTION("reader rejects ragged and non numeric rows") {
        TempFile ragged("ragged.csv", "a,b\n1,2\n3\n");
        CHECK_THROWS_AS(read_csv(ragged.str()), validation_error);
        TempFile alpha("alpha.csv", "a,b\n1,x\n");
        CHECK_THROWS_AS(read_csv(alpha.str()), validation_error);
    }
}

TEST_CASE("trace csv columns") {
    Trace tr;
    tr.t_s = {0.0, 1e-6};
    tr.delta_hz = {0.0, 54e9};
    tr.population = {1.0, 0.5};
    tr.flux_cavity_per_s = {100.0, 50.0};
    tr.flux_free_per_s = {10.0, 5.0};
    TempFile holder("trace.csv", "");
    write_trace_csv(holder.str(), tr, {});
    const auto t = read_csv(holder.str());
    CHECK(t.has_column("t_us"));
    CHECK(t.has_column("delta_ghz"));
    CHECK(t.has_column("population"));
    CHECK(t.has_column("flux_cavity_per_s"));
    CHECK(t.has_column("flux_free_per_s"));
    CHECK(t.column("t_us")[1] == Catch::Approx(1.0).epsilon(1e-15));
    CHECK(t.column("delta_ghz")[1] == Catch::Approx(54.0).epsilon(1e-15));
}

TEST_CASE("config dir resolution") {
    CHECK_THROWS_AS(resolve_config_path("definitely_missing.cfg"), validation_error);
}
