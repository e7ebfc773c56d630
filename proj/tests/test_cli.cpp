#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include "test_paths.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr
};

RunResult run_cli(const std::string& args) {
    const std::string cmd = std::string(kCliPath) + " " + args + " 2>&1";
    FILE* p = ::popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    RunResult r;
    char buf[4096];
    while (std::size_t n = std::fread(buf, 1, sizeof buf, p)) r.output.append(buf, n);
    const int status = ::pclose(p);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

double parse_value(const std::string& text, const std::string& key) {
    const auto pos = text.find(key + " = ");
    REQUIRE(pos != std::string::npos);
    return std::stod(text.substr(pos + key.size() + 3));
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("eocav_cli_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path);
    f << content;
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    return std::string((std::istreambuf_iterator<char>(f)),
                       std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("cqed report runs with built-in defaults") {
    const auto r = run_cli("cqed");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("cooperativity = 7.58") != std::string::npos);
    CHECK(r.output.find("config_hash=0x") != std::string::npos);
    CHECK(r.output.find("beta_factor = 0.88") != std::string::npos);
}

TEST_CASE("cqed report echoes the resolved config") {
    const auto r = run_cli("cqed");
    CHECK(r.output.find("# cavity.q=79833") != std::string::npos);
    CHECK(r.output.find("# emitter.tau0_us=430") != std::string::npos);
}

TEST_CASE("budget report shows the chain and the reference rate") {
    const auto r = run_cli("budget --c 7.6");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("emission_into_cavity_per_s = 8837.2") != std::string::npos);
    CHECK(r.output.find("detected_counts_per_s") != std::string::npos);
    CHECK(r.output.find("40 counts/s") != std::string::npos);
}

TEST_CASE("usage errors exit with 2") {
    CHECK(run_cli("frobnicate").exit_code == 2);
    CHECK(run_cli("fit --model lorentzian").exit_code == 2);  // missing --in
    CHECK(run_cli("").exit_code == 2);                        // no subcommand
}

TEST_CASE("help exits with 0") {
    const auto r = run_cli("--help");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("cqed") != std::string::npos);
}

TEST_CASE("validation failures exit 2 and leave no partial outputs") {
    TempDir dir;
    SECTION("unknown config key") {
        write_file(dir.file("bad.cfg"), "cavity.quality = 1\n");
        const auto r = run_cli("cqed --config " + dir.file("bad.cfg"));
        CHECK(r.exit_code == 2);
        CHECK(r.output.find("error:") != std::string::npos);
    }
    SECTION("grid too coarse for the actuator") {
        write_file(dir.file("coarse.protocol"),
                   "duration_us 400\nsamples 10\nsegment 0 0\nsegment 100 200\n");
        const std::string out = dir.file("trace.csv");
        const auto r =
            run_cli("simulate --protocol " + dir.file("coarse.protocol") + " --out " + out);
        CHECK(r.exit_code == 2);
        CHECK_FALSE(fs::exists(out));
    }
    SECTION("set-point beyond the tuning range") {
        write_file(dir.file("far.plan"),
                   "plan.setpoints_ghz = 200\nplan.scan_range_ghz = 2\n"
                   "plan.step_mhz = 20\nplan.dwell_s = 1\nplan.power_nw = 10\n"
                   "plan.n_ions = 5\n");
        const auto r = run_cli("synth-ple --plan " + dir.file("far.plan") + " --out " +
                               dir.file("sweep"));
        CHECK(r.exit_code == 2);
        CHECK_FALSE(fs::exists(dir.file("sweep") + "/sp00.csv"));
    }
}

TEST_CASE("synth-ple output is byte identical for a fixed seed") {
    TempDir dir;
    write_file(dir.file("sweep.plan"),
               "plan.setpoints_ghz = 0\nplan.scan_range_ghz = 4\nplan.step_mhz = 20\n"
               "plan.dwell_s = 0.5\nplan.power_nw = 10\nplan.n_ions = 30\n");
    const std::string base = "synth-ple --plan " + dir.file("sweep.plan") + " --seed 7 ";
    const auto r1 = run_cli(base + "--out " + dir.file("a"));
    const auto r2 = run_cli(base + "--out " + dir.file("b"));
    REQUIRE(r1.exit_code == 0);
    REQUIRE(r2.exit_code == 0);
    CHECK(r1.output.find("n_ions = 30") != std::string::npos);
    CHECK(slurp(dir.file("a") + "/sp00.csv") == slurp(dir.file("b") + "/sp00.csv"));

    const auto r3 = run_cli("synth-ple --plan " + dir.file("sweep.plan") +
                            " --seed 8 --out " + dir.file("c"));
    REQUIRE(r3.exit_code == 0);
    CHECK(slurp(dir.file("a") + "/sp00.csv") != slurp(dir.file("c") + "/sp00.csv"));

    SECTION("seed appears in the file header") {
        const auto text = slurp(dir.file("a") + "/sp00.csv");
        CHECK(text.find("# seed=7") != std::string::npos);
        CHECK(text.find("# config_hash=0x") != std::string::npos);
        CHECK(text.find("f_ghz,counts") != std::string::npos);
    }
}

TEST_CASE("hole synthesis and lorentzian fit round trip") {
    TempDir dir;
    const std::string out = dir.file("hole.csv");
    const auto rs = run_cli("synth-hole --saturation 1 --out " + out);
    REQUIRE(rs.exit_code == 0);
    CHECK(parse_value(rs.output, "hole_fwhm_mhz") == Catch::Approx(137.178).epsilon(1e-3));
    CHECK(parse_value(rs.output, "hole_depth") == Catch::Approx(0.5).epsilon(1e-10));

    const auto rf = run_cli("fit --model lorentzian --in " + out);
    REQUIRE(rf.exit_code == 0);
    CHECK(parse_value(rf.output, "fwhm_mhz") == Catch::Approx(137.178).epsilon(1e-3));
    CHECK(parse_value(rf.output, "center_ghz") == Catch::Approx(0.0).margin(1e-6));
    CHECK(rf.output.find("converged = true") != std::string::npos);
}

TEST_CASE("transmission scan and dip fit round trip") {
    TempDir dir;
    const std::string out = dir.file("dip.csv");
    const auto rt = run_cli(
        "transmission --bias-v 100 --scan-lo-ghz -20 --scan-hi-ghz 60 --out " + out);
    REQUIRE(rt.exit_code == 0);

    const auto rf = run_cli("fit --model lorentzian --in " + out);
    REQUIRE(rf.exit_code == 0);
    CHECK(parse_value(rf.output, "center_ghz") == Catch::Approx(27.0).epsilon(1e-6));
    CHECK(parse_value(rf.output, "fwhm_ghz") == Catch::Approx(3.8318824).epsilon(1e-5));
    CHECK(parse_value(rf.output, "amplitude") == Catch::Approx(-0.9).epsilon(1e-6));
}

TEST_CASE("simulate then switch fit recovers the actuator response") {
    TempDir dir;
    write_file(dir.file("step.protocol"),
               "duration_us 60\nsamples 4000\nsegment 0 0\nsegment 10 200\n");
    const std::string out = dir.file("step.csv");
    const auto rs =
        run_cli("simulate --protocol " + dir.file("step.protocol") + " --out " + out);
    REQUIRE(rs.exit_code == 0);

    const auto rf = run_cli("fit --model switch --in " + out + " --column delta_ghz");
    REQUIRE(rf.exit_code == 0);
    CHECK(parse_value(rf.output, "switching_time_us") ==
          Catch::Approx(5.0).epsilon(1e-3));
}

TEST_CASE("protocol command reports storage metrics") {
    const auto r = run_cli(
        "protocol --t-detune-us 100 --t-wait-us 100 --detune-v 200 --t-end-us 400 "
        "--tau-sw-us 0");
    REQUIRE(r.exit_code == 0);
    CHECK(parse_value(r.output, "delta_off_ghz") == Catch::Approx(54.0).epsilon(1e-10));
    const double resume = parse_value(r.output, "resume_ratio");
    const double predicted = parse_value(r.output, "predicted_resume_ratio");
    CHECK(resume == Catch::Approx(predicted).epsilon(2e-3));
    CHECK(parse_value(r.output, "suppression_ratio") ==
          Catch::Approx(parse_value(r.output, "predicted_suppression_ratio"))
              .epsilon(2e-3));
}

TEST_CASE("fit reads json output path") {
    TempDir dir;
    const std::string csv = dir.file("hole.csv");
    REQUIRE(run_cli("synth-hole --saturation 3 --out " + csv).exit_code == 0);
    const std::string json = dir.file("fit.json");
    const auto r = run_cli("fit --model lorentzian --in " + csv + " --out " + json);
    REQUIRE(r.exit_code == 0);
    const auto text = slurp(json);
    CHECK(text.find("\"model\": \"lorentzian\"") != std::string::npos);
    CHECK(text.find("\"converged\": true") != std::string::npos);
}
