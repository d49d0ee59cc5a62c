// End-to-end checks of the command-line front end: exit codes, output files,
// manifest stamping, and bit-identical re-runs.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "echosim/cli.hpp"
#include "echosim/fit.hpp"
#include "echosim/levels.hpp"
#include "echosim/rng.hpp"

#include "json.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace echosim;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int run(const std::vector<std::string>& args) { return run_cli(args); }

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json slurp_json(const std::string& path) { return json::parse(slurp(path)); }

std::string fresh_dir(const std::string& name) {
    const std::string dir = "/tmp/echosim_cli_" + name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string first_line(const std::string& text) {
    return text.substr(0, text.find('\n'));
}

} // namespace

TEST_CASE("the levels subcommand reproduces the clock transition and reruns "
          "bit-identically") {
    const std::string dir = fresh_dir("levels");
    const std::vector<std::string> cmd = {"levels", "--iz=-1.5", "--bz-mt=38.25",
                                          "--out", dir};
    REQUIRE(run(cmd) == 0);

    const json j = slurp_json(dir + "/levels.json");
    REQUIRE(j["levels"].size() == 1);
    CHECK(std::abs(j["levels"][0]["energy_hz"].get<double>() - 27.8e9) < 0.05e9);
    CHECK(std::abs(j["levels"][0]["clock_field_mt"].get<double>() - 38.25) < 0.5);

    const json manifest = slurp_json(dir + "/manifest.json");
    CHECK(manifest["subcommand"] == "levels");
    CHECK(manifest["toolkit_version"] == std::string(toolkit_version));
    const std::string hash = manifest["manifest_hash"].get<std::string>();
    CHECK(hash.size() == 16);
    CHECK(j["manifest_hash"].get<std::string>() == hash);
    CHECK(first_line(slurp(dir + "/levels.csv")) == "# manifest " + hash);

    // re-running the same command reproduces every output byte for byte
    const std::string csv1 = slurp(dir + "/levels.csv");
    const std::string json1 = slurp(dir + "/levels.json");
    const std::string man1 = slurp(dir + "/manifest.json");
    REQUIRE(run(cmd) == 0);
    CHECK(slurp(dir + "/levels.csv") == csv1);
    CHECK(slurp(dir + "/levels.json") == json1);
    CHECK(slurp(dir + "/manifest.json") == man1);
}

TEST_CASE("usage and validation errors exit with code 1") {
    const std::string dir = fresh_dir("errors");
    CHECK(run({"frobnicate"}) == 1);                            // unknown subcommand
    CHECK(run({"levels", "--bogus-flag=3", "--out", dir}) == 1); // unknown flag
    CHECK(run({"kernel", "--out", dir}) == 1);                   // missing required
    CHECK(run({"echo", "--regime=quux", "--out", dir}) == 1);    // bad regime name
    CHECK(run({"levels", "--iz=0.7", "--out", dir}) == 1);       // invalid projection
    CHECK(run({"mc-validate", "--suite=nope", "--out", dir}) == 1);
    CHECK(run({}) == 1);                                         // no subcommand
    CHECK(run({"--help"}) == 0);
}

TEST_CASE("empty trace files fail validation") {
    const std::string dir = fresh_dir("empty_trace");
    const std::string path = dir + "/empty.csv";
    std::ofstream(path).close();
    CHECK(run({"fit-trace", "--trace", path, "--out", dir}) == 1);
}

TEST_CASE("fit-trace recovers a synthesized stretched decay") {
    const std::string dir = fresh_dir("fit_trace");
    echo_trace tr;
    rng_stream noise(88);
    const std::vector<double> grid = log_time_grid(2.0e-7, 2.0e-4, 64);
    for (double t : grid) {
        tr.t_s.push_back(t);
        tr.intensity.push_back(std::exp(-std::pow(t / 5.0e-6, 0.8)) + 0.01 +
                               noise.normal(0.0, 0.005));
        tr.sigma.push_back(0.005);
    }
    write_trace_csv(dir + "/trace.csv", tr);

    REQUIRE(run({"fit-trace", "--trace", dir + "/trace.csv", "--out", dir}) == 0);
    const json j = slurp_json(dir + "/fit_trace.json");
    CHECK(std::abs(j["t_char_s"].get<double>() / 5.0e-6 - 1.0) < 0.05);
    CHECK(std::abs(j["beta"].get<double>() - 0.8) < 0.05);
    CHECK(j["converged"].get<bool>());
    CHECK(first_line(slurp(dir + "/fit_curve.csv")).rfind("# manifest ", 0) == 0);
}

TEST_CASE("mc-validate is deterministic for a fixed seed") {
    const std::string dir = fresh_dir("mc");
    const std::vector<std::string> cmd = {"mc-validate", "--suite=kernels",
                                          "--seed=42", "--samples=400", "--out", dir};
    REQUIRE(run(cmd) == 0);
    const std::string bytes1 = slurp(dir + "/mc_validate.json");
    REQUIRE(run(cmd) == 0);
    CHECK(slurp(dir + "/mc_validate.json") == bytes1);

    const json j = json::parse(bytes1);
    CHECK(j["seed"] == 42);
    CHECK(j["cases"].size() == 6);
    for (const auto& c : j["cases"]) CHECK(c["max_rel_dln_i"].get<double>() >= 0.0);
}

TEST_CASE("echo writes a readable trace with the manifest stamp") {
    const std::string dir = fresh_dir("echo");
    REQUIRE(run({"echo", "--regime=nnn-pair", "--n-pulses=2", "--t-min-us=0.2",
                 "--t-max-us=30", "--points-per-decade=12", "--out", dir}) == 0);
    const echo_trace back = read_trace_csv(dir + "/echo.csv");
    CHECK(back.t_s.size() > 20);
    CHECK(back.intensity.front() > 0.9);
    const json manifest = slurp_json(dir + "/manifest.json");
    CHECK(first_line(slurp(dir + "/echo.csv")) ==
          "# manifest " + manifest["manifest_hash"].get<std::string>());
    const json j = slurp_json(dir + "/echo.json");
    CHECK(j["species"].size() == 4);
    CHECK(j["regime"] == "nnn-pair");
}

TEST_CASE("the global fit subcommand closes the loop on synthesized traces") {
    const std::string dir = fresh_dir("fit");
    material_params m;
    fluorine_model f;
    disorder_model dis;
    rate_params rp;
    const double clock_mt = clock_field_t(m, -1.5) * 1e3;

    std::vector<trace_metadata> metas(2);
    for (int k = 0; k < 2; ++k) {
        metas[k].regime = probe_regime::nnn_pair;
        metas[k].abundance_x = 1.0e-3;
        metas[k].n_pulses = k == 0 ? 1 : 3;
        metas[k].b_z_t = clock_mt * 1e-3;
        metas[k].probe_frequency_hz = nnn_coupling_times().detune_hz;
    }
    const auto traces = synthesize_trace_set(m, f, dis, rp, metas,
                                             log_time_grid(2.0e-7, 3.0e-5, 16), 0.01, 7);
    write_trace_csv(dir + "/tr0.csv", traces[0]);
    write_trace_csv(dir + "/tr1.csv", traces[1]);
    char ini[512];
    std::snprintf(ini, sizeof ini,
                  "[trace a]\nfile = tr0.csv\nregime = nnn-pair\nbz_mt = %.12g\n"
                  "x = 1e-3\nn_pulses = 1\n\n"
                  "[trace b]\nfile = tr1.csv\nregime = nnn-pair\nbz_mt = %.12g\n"
                  "x = 1e-3\nn_pulses = 3\n",
                  clock_mt, clock_mt);
    std::ofstream(dir + "/traces.ini") << ini;

    REQUIRE(run({"fit", "--traces", dir + "/traces.ini", "--c1-min=0.41",
                 "--c1-max=0.41", "--c1-steps=1", "--c2-min=1.67", "--c2-max=1.67",
                 "--c2-steps=1", "--out", dir}) == 0);
    const json j = slurp_json(dir + "/fit_state.json");
    CHECK(std::abs(j["w_delta_at_ref_hz"].get<double>() - 21.0e6) < 3.0e6);
    CHECK(j["nuisance"].size() == 2);
    CHECK(j["valid_cells"] == 1);
    CHECK(fs::exists(dir + "/residual_surface.csv"));
    CHECK(fs::exists(dir + "/rate_table.csv"));
    CHECK(fs::exists(dir + "/trace_0_fit.csv"));
    CHECK(fs::exists(dir + "/trace_1_fit.csv"));
}

TEST_CASE("abundance reports the dilution trade-off and rejects impossible targets") {
    const std::string dir = fresh_dir("abundance");
    REQUIRE(run({"abundance", "--t2-target-us=100", "--out", dir}) == 0);
    const json j = slurp_json(dir + "/abundance.json");

    abundance_reference ref;
    ref.t2_single_s = 0.45e-6; // CLI defaults
    ref.t2_pair_s = 3.8e-6;
    const abundance_result expect = abundance_tradeoff(100.0e-6, ref);
    CHECK(std::abs(j["x_single"].get<double>() / expect.x_single - 1.0) < 1e-9);
    CHECK(std::abs(j["x_pair"].get<double>() / expect.x_pair - 1.0) < 1e-9);
    CHECK(j["x_single"].get<double>() < j["x_pair"].get<double>());

    CHECK(run({"abundance", "--t2-target-us=0.1", "--out", dir}) == 1);
}

TEST_CASE("rates defaults to the clock field and honors the abundance override") {
    const std::string dir = fresh_dir("rates");
    REQUIRE(run({"rates", "--out", dir}) == 0);
    const json j = slurp_json(dir + "/rates.json");
    const double kappa_ref = j["rates"][0]["kappa_hz"].get<double>();
    CHECK(std::abs(1.0 / kappa_ref / 0.45e-6 - 1.0) < 0.2);
    CHECK(j["rates"][3]["quasi_static"].get<bool>());

    const std::string dir2 = fresh_dir("rates_dilute");
    REQUIRE(run({"rates", "--x=1e-4", "--out", dir2}) == 0);
    const json j2 = slurp_json(dir2 + "/rates.json");
    CHECK(j2["rates"][0]["kappa_hz"].get<double>() < kappa_ref / 5.0);
}

TEST_CASE("kernel emits the interpolated curve and channel scales") {
    const std::string dir = fresh_dir("kernel");
    REQUIRE(run({"kernel", "--gamma=3", "--v0=1", "--kappa-hz=1", "--density-m3=1",
                 "--points=50", "--out", dir}) == 0);
    const json j = slurp_json(dir + "/kernel.json");
    CHECK(std::abs(j["vbar_rad_s"].get<double>() / 10.13016668 - 1.0) < 1e-6);
    CHECK(j["t_short_s"].get<double>() > 0.0);
    CHECK(j["t_long_s"].get<double>() > 0.0);

    const std::string csv = slurp(dir + "/kernel.csv");
    int lines = 0;
    for (char c : csv)
        if (c == '\n') ++lines;
    CHECK(lines == 52); // comment + header + 50 rows
}
