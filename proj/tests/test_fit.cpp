// Trace IO, nuclear-modulation filtering, coupling extraction, and the
// global (c1, c2, W_Delta) scan: round trips on synthesized data.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "echosim/errors.hpp"
#include "echosim/fit.hpp"
#include "echosim/levels.hpp"
#include "echosim/rng.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

using namespace echosim;

namespace {

double rel_diff(double a, double b) { return std::abs(a - b) / std::abs(b); }

std::string temp_path(const std::string& name) { return "/tmp/echosim_test_" + name; }

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

trace_metadata nnn_meta(const material_params& m, int n_pulses, double x = 1.0e-3) {
    trace_metadata meta;
    meta.regime = probe_regime::nnn_pair;
    meta.abundance_x = x;
    meta.n_pulses = n_pulses;
    meta.b_z_t = clock_field_t(m, -1.5);
    meta.probe_frequency_hz = nnn_coupling_times().detune_hz;
    return meta;
}

trace_metadata single_meta(const material_params& m, double x) {
    trace_metadata meta;
    meta.regime = probe_regime::single;
    meta.abundance_x = x;
    meta.n_pulses = 1;
    meta.b_z_t = clock_field_t(m, -1.5);
    meta.probe_frequency_hz = 0.0;
    return meta;
}

trace_metadata loose_meta(const material_params& m, double x = 1.0e-3) {
    trace_metadata meta;
    meta.regime = probe_regime::loose_pair;
    meta.abundance_x = x;
    meta.n_pulses = 1;
    meta.b_z_t = clock_field_t(m, -1.5);
    meta.probe_frequency_hz = loose_coupling_times().detune_hz;
    return meta;
}

// modulated stretched-exponential trace on a uniform grid
echo_trace modulated_trace(const material_params& m, const fluorine_model& f,
                           double bz_t, double nu_f_hz, double t_char_s, double beta,
                           double i0, double c_off, int n_pulses, double dt_s,
                           int n_points, double noise_sigma, std::uint64_t seed) {
    const double iz = bz_t > 0.5 * (clock_field_t(m, -1.5) + clock_field_t(m, -0.5))
                          ? -1.5
                          : -0.5;
    const double delta_e = m.full_moment_hz_per_t() * bz_t + m.hyperfine_a_hz * iz;
    echo_trace tr;
    tr.meta.b_z_t = bz_t;
    tr.meta.n_pulses = n_pulses;
    rng_stream rs(seed);
    for (int i = 1; i <= n_points; ++i) {
        const double t = i * dt_s;
        double y = i0 * std::exp(-std::pow(t / t_char_s, beta)) *
                       mims_model_envelope(m, f, delta_e, nu_f_hz, 1.0, t, n_pulses) +
                   c_off;
        if (noise_sigma > 0) {
            y += rs.normal(0.0, noise_sigma);
            tr.sigma.push_back(noise_sigma);
        }
        tr.t_s.push_back(t);
        tr.intensity.push_back(y);
    }
    return tr;
}

} // namespace

TEST_CASE("trace csv round-trip preserves numbers, comments, and the sigma column") {
    echo_trace tr;
    tr.t_s = {1.0e-7, 3.33333333333e-6, 1.23456789012e-5, 2.0e-5, 9.9e-5};
    tr.intensity = {0.987654321098, 0.5, 0.1, -0.003, 1.5e-4};
    tr.sigma = {0.01, 0.01, 0.02, 0.02, 0.02};
    const std::string path = temp_path("roundtrip.csv");
    write_trace_csv(path, tr, {"synthetic check", "second comment"});

    std::ifstream in(path);
    std::string first;
    std::getline(in, first);
    CHECK(first == "# synthetic check");

    const echo_trace back = read_trace_csv(path);
    REQUIRE(back.t_s.size() == tr.t_s.size());
    REQUIRE(back.sigma.size() == tr.sigma.size());
    for (std::size_t i = 0; i < tr.t_s.size(); ++i) {
        CHECK(rel_diff(back.t_s[i], tr.t_s[i]) < 1e-11);
        CHECK(std::abs(back.intensity[i] - tr.intensity[i]) < 1e-11);
        CHECK(rel_diff(back.sigma[i], tr.sigma[i]) < 1e-11);
    }

    tr.sigma.clear();
    write_trace_csv(path, tr);
    const echo_trace plain = read_trace_csv(path);
    CHECK(plain.sigma.empty());
    CHECK(plain.t_s.size() == tr.t_s.size());
    std::remove(path.c_str());
}

TEST_CASE("trace csv reader reports precise locations for malformed input") {
    const std::string path = temp_path("malformed.csv");

    write_text(path, "# comment\nt_s,intensity\n1e-6,0.5\n2e-6,abc\n");
    const std::string bad_number = path + ":4:6: not a number";
    CHECK_THROWS_WITH_AS(read_trace_csv(path), doctest::Contains(bad_number.c_str()),
                         validation_error);

    write_text(path, "t_s,intensity\n1e-6,0.5,0.01,9\n");
    CHECK_THROWS_WITH_AS(read_trace_csv(path), doctest::Contains(":2:1: expected 2 or 3"),
                         validation_error);

    write_text(path, "");
    CHECK_THROWS_WITH_AS(read_trace_csv(path), doctest::Contains(path.c_str()),
                         validation_error);
    CHECK_THROWS_WITH_AS(read_trace_csv(path), doctest::Contains("empty trace file"),
                         validation_error);

    write_text(path, "t_s,intensity\n");
    CHECK_THROWS_AS(read_trace_csv(path), validation_error);

    write_text(path, "t_s,intensity,sigma\n1e-6,0.5,0.01\n2e-6,0.4\n");
    CHECK_THROWS_WITH_AS(read_trace_csv(path), doctest::Contains("sigma column"),
                         validation_error);

    write_text(path, "frequency,amplitude\n1,2\n");
    CHECK_THROWS_WITH_AS(read_trace_csv(path), doctest::Contains("expected header"),
                         validation_error);

    CHECK_THROWS_WITH_AS(read_trace_csv(temp_path("does_not_exist.csv")),
                         doctest::Contains("cannot open"), validation_error);
    std::remove(path.c_str());
}

TEST_CASE("the free-parameter modulation model reduces to the fixed-coupling envelope") {
    material_params m;
    fluorine_model f;
    const mims_frequencies bare = shell_frequencies(6.4e5, 0.0, 0.0);
    CHECK(rel_diff(bare.w_plus_rad_s, 2.0 * M_PI * 6.4e5) < 1e-12);
    CHECK(rel_diff(bare.w_minus_rad_s, 2.0 * M_PI * 6.4e5) < 1e-12);

    const double bz = 16.0e-3;
    for (double iz : {-1.5, -0.5}) {
        const double delta_e = m.full_moment_hz_per_t() * bz + m.hyperfine_a_hz * iz;
        const double nu_f = m.fluorine_larmor_hz_per_t() * bz;
        for (int n_pulses : {1, 2}) {
            for (double t : {0.3e-6, 1.7e-6, 5.0e-6, 11.0e-6}) {
                const double free_form =
                    mims_model_envelope(m, f, delta_e, nu_f, 1.0, t, n_pulses);
                const double fixed_form = mims_envelope(m, f, iz, bz, t, n_pulses);
                CHECK(rel_diff(free_form, fixed_form) < 1e-12);
            }
        }
    }
}

TEST_CASE("the modulation filter recovers frequency and scale and demodulates the decay") {
    material_params m;
    fluorine_model f;
    const double bz = 16.0e-3;
    const double nu_true = m.fluorine_larmor_hz_per_t() * bz;
    const double t_char = 4.0e-6, beta = 1.1, i0 = 1.0, c_off = 0.02;
    const echo_trace tr = modulated_trace(m, f, bz, nu_true, t_char, beta, i0, c_off, 1,
                                          0.05e-6, 240, 2.0e-3, 421);

    const mims_filter_result res = filter_mims(tr, m, f);
    CHECK(!res.degenerate);
    CHECK(rel_diff(res.nu_f_hz, nu_true) < 0.02);
    CHECK(std::abs(res.coupling_scale - 1.0) < 0.05);
    CHECK(rel_diff(res.decay.t_char_s, t_char) < 0.05);
    CHECK(std::abs(res.decay.beta - beta) < 0.1);

    const double iz = -0.5; // probed branch nearest to 16 mT
    const double delta_e = m.full_moment_hz_per_t() * bz + m.hyperfine_a_hz * iz;
    double env_err = 0.0, demod_err = 0.0;
    for (std::size_t i = 0; i < tr.t_s.size(); ++i) {
        const double truth = mims_model_envelope(m, f, delta_e, nu_true, 1.0, tr.t_s[i], 1);
        env_err = std::max(env_err, std::abs(res.envelope[i] - truth));
        // dividing by a near-zero envelope rightly amplifies the noise, so
        // judge the demodulation only where the envelope is usable
        if (truth < 0.3) continue;
        // the offset sits outside the envelope, so division maps it to c/V
        const double expected =
            i0 * std::exp(-std::pow(tr.t_s[i] / t_char, beta)) + c_off / truth;
        demod_err = std::max(demod_err,
                             std::abs(res.demodulated.intensity[i] - expected));
    }
    CHECK(env_err < 0.02);
    CHECK(demod_err < 0.02); // leftover is the injected noise, not modulation
}

TEST_CASE("the filter fits the fluorine larmor frequency rather than assuming it") {
    material_params m;
    fluorine_model f;
    const double bz = 13.1e-3;
    // generate at a Larmor frequency 3% off the bare-moment value
    const double w_true = 3.20e6; // rad/s
    const double nu_true = w_true / (2.0 * M_PI);
    CHECK(rel_diff(2.0 * M_PI * m.fluorine_larmor_hz_per_t() * bz, 3.30e6) < 0.01);

    const echo_trace tr = modulated_trace(m, f, bz, nu_true, 3.0e-6, 1.0, 1.0, 0.0, 1,
                                          0.06e-6, 220, 2.0e-3, 97);
    const mims_filter_result res = filter_mims(tr, m, f);
    CHECK(!res.degenerate);
    CHECK(std::abs(2.0 * M_PI * res.nu_f_hz - w_true) < 0.05e6);
}

TEST_CASE("clock-field traces have no modulation to filter") {
    material_params m;
    fluorine_model f;
    const double bz = clock_field_t(m, -1.5);
    const echo_trace tr = modulated_trace(m, f, bz, m.fluorine_larmor_hz_per_t() * bz,
                                          3.0e-6, 1.0, 1.0, 0.0, 1, 0.1e-6, 120, 0.0, 7);
    const mims_filter_result res = filter_mims(tr, m, f);
    CHECK(res.degenerate);
    REQUIRE(res.envelope.size() == tr.t_s.size());
    for (double v : res.envelope) CHECK(v == 1.0);
    for (std::size_t i = 0; i < tr.t_s.size(); ++i)
        CHECK(res.demodulated.intensity[i] == tr.intensity[i]);
    CHECK(rel_diff(res.decay.t_char_s, 3.0e-6) < 0.01);
}

TEST_CASE("field-swept modulation fits recover the dipolar coupling slope") {
    material_params m;
    fluorine_model f;
    const double clock = clock_field_t(m, -1.5);
    const shell_couplings sc = fluorine_shell_couplings(m, f.nn_r_m, f.nn_theta_deg);
    const double slope_true = m.full_moment_hz_per_t() * std::abs(sc.j_zx_hz) / m.delta_hz;

    std::vector<echo_trace> traces;
    std::vector<double> b_true;
    for (double db_mt : {0.0, 2.0, 3.5, 5.0, 6.5}) {
        const double bz = clock + db_mt * 1.0e-3;
        traces.push_back(modulated_trace(m, f, bz, m.fluorine_larmor_hz_per_t() * bz,
                                         5.0e-6, 1.0, 1.0, 0.0, 1, 0.05e-6, 300, 1.0e-3,
                                         1000 + static_cast<std::uint64_t>(db_mt * 10)));
        b_true.push_back(slope_true * (bz - clock));
    }

    const mims_coupling_result res = fit_mims_coupling(traces, m, f);
    REQUIRE(res.points.size() == traces.size());
    for (std::size_t i = 1; i < res.points.size(); ++i) {
        CHECK(res.points[i].valid);
        CHECK(rel_diff(res.points[i].b_nn_hz, b_true[i]) < 0.03);
        CHECK(rel_diff(res.points[i].a_nn_hz, res.ratios.a_over_b * res.points[i].b_nn_hz) <
              1e-12);
        CHECK(rel_diff(res.points[i].t_1e_s, 5.0e-6) < 0.05);
    }
    // exactly at the clock field the extracted coupling collapses
    CHECK(res.points[0].b_nn_hz < 0.05 * res.points[1].b_nn_hz);
    CHECK(!res.points[0].valid); // no contrast to fit at the clock point

    CHECK(rel_diff(res.slope_hz_per_t, slope_true) < 0.03);
    // in ordinary frequency units: MHz per mT
    CHECK(std::abs(res.slope_hz_per_t * 1.0e-9 - 0.537) < 0.012);

    const std::vector<echo_trace> none;
    CHECK_THROWS_AS(fit_mims_coupling(none, m, f), validation_error);
    const std::vector<echo_trace> two_clock = {traces[0], traces[0]};
    CHECK_THROWS_AS(fit_mims_coupling(two_clock, m, f), convergence_error);
}

TEST_CASE("pair-peak width converts to splitting disorder under both assumptions") {
    const double w_corr = disorder_from_lineshape(42.0e6, pair_site_correlation::correlated);
    const double w_unc = disorder_from_lineshape(42.0e6, pair_site_correlation::uncorrelated);
    CHECK(std::abs(w_corr - 17.8e6) < 0.1e6);
    CHECK(std::abs(w_unc - 25.0e6) < 0.3e6);
    CHECK(rel_diff(w_unc, std::sqrt(2.0) * w_corr) < 1e-12);
    CHECK_THROWS_AS(disorder_from_lineshape(0.0, pair_site_correlation::correlated),
                    validation_error);
    CHECK_THROWS_AS(disorder_from_lineshape(-1.0, pair_site_correlation::uncorrelated),
                    validation_error);
}

TEST_CASE("the trace-set residual profiles per-trace amplitude and offset exactly") {
    material_params m;
    fluorine_model f;
    disorder_model dis;
    rate_params rp;
    const trace_metadata meta = nnn_meta(m, 2);
    echo_model_config cfg = build_echo_model(m, f, dis, rp, meta);
    cfg.i0 = 0.8;
    cfg.c_off = 0.05;
    const std::vector<double> grid = log_time_grid(2.0e-7, 3.0e-5, 16);
    const echo_trace noiseless = synthesize_trace(cfg, meta, grid, 0.0, 11);

    std::vector<std::array<double, 2>> nuisance;
    const double sse =
        trace_set_residual({noiseless}, m, f, dis, rp, false, &nuisance);
    CHECK(sse < 1e-16);
    REQUIRE(nuisance.size() == 1);
    CHECK(rel_diff(nuisance[0][0], 0.8) < 1e-6);
    CHECK(std::abs(nuisance[0][1] - 0.05) < 1e-6);

    // uniform sigmas with the weighting flag rescale the residual by 1/sigma^2
    echo_trace noisy = synthesize_trace(cfg, meta, grid, 0.01, 12);
    const double sse_eq = trace_set_residual({noisy}, m, f, dis, rp, false);
    const double sse_w = trace_set_residual({noisy}, m, f, dis, rp, true);
    CHECK(rel_diff(sse_w, sse_eq * 1.0e4) < 1e-9);
}

TEST_CASE("time-stretched data cannot be absorbed by the per-trace nuisance parameters") {
    material_params m;
    fluorine_model f;
    disorder_model dis;
    rate_params rp;
    const trace_metadata meta = nnn_meta(m, 1);
    const echo_model_config cfg = build_echo_model(m, f, dis, rp, meta);
    const std::vector<double> grid = log_time_grid(2.0e-7, 3.0e-5, 16);
    const echo_trace tr = synthesize_trace(cfg, meta, grid, 0.0, 5);

    pulse_sequence seq;
    seq.n_pulses = meta.n_pulses;
    seq.probe_frequency_hz = meta.probe_frequency_hz;
    seq.b_z_t = meta.b_z_t;
    auto profiled_sse = [&](double stretch) {
        std::vector<double> basis(tr.t_s.size());
        for (std::size_t i = 0; i < tr.t_s.size(); ++i) {
            seq.total_time_s = tr.t_s[i] / stretch;
            basis[i] = compose_echo(cfg, seq, tr.t_s[i] / stretch);
        }
        double s_bb = 0, s_b = 0, s_1 = 0, s_yb = 0, s_y = 0;
        for (std::size_t i = 0; i < tr.t_s.size(); ++i) {
            s_bb += basis[i] * basis[i];
            s_b += basis[i];
            s_1 += 1.0;
            s_yb += tr.intensity[i] * basis[i];
            s_y += tr.intensity[i];
        }
        const double det = s_bb * s_1 - s_b * s_b;
        const double a = (s_yb * s_1 - s_y * s_b) / det;
        const double c = (s_y * s_bb - s_yb * s_b) / det;
        double sse = 0;
        for (std::size_t i = 0; i < tr.t_s.size(); ++i) {
            const double r = tr.intensity[i] - a * basis[i] - c;
            sse += r * r;
        }
        return sse;
    };
    const double exact = profiled_sse(1.0);
    const double stretched = profiled_sse(2.0);
    CHECK(exact < 1e-16);
    CHECK(stretched > 1e-3); // doubling every coherence time is always visible
}

TEST_CASE("per-regime closed loops converge before the joint fit") {
    material_params m;
    fluorine_model f;
    disorder_model dis;
    rate_params rp; // defaults are the generating values
    const std::uint64_t seed = 2024;

    scan_spec scan;
    scan.c1_values = {rp.c1};
    scan.c2_values = {rp.c2};

    SUBCASE("tight-pair traces") {
        const std::vector<double> grid = log_time_grid(2.0e-7, 3.0e-5, 16);
        const auto traces = synthesize_trace_set(
            m, f, dis, rp, {nnn_meta(m, 1), nnn_meta(m, 3)}, grid, 0.01, seed);
        const auto res = global_fit(traces, m, f, dis, scan);
        CHECK(res.surface.best().valid);
        CHECK(std::abs(res.state.w_delta_at_ref_hz - dis.w_delta_hz) < 3.0e6);
    }
    SUBCASE("single-ion traces at two abundances") {
        const auto traces = synthesize_trace_set(
            m, f, dis, rp, {single_meta(m, 1.0e-3), single_meta(m, 1.0e-4)},
            log_time_grid(5.0e-8, 5.0e-5, 12), 0.01, seed);
        const auto res = global_fit(traces, m, f, dis, scan);
        CHECK(res.surface.best().valid);
        CHECK(std::abs(res.state.w_delta_at_ref_hz - dis.w_delta_hz) < 3.0e6);
    }
    SUBCASE("loose-pair traces") {
        const auto traces = synthesize_trace_set(m, f, dis, rp, {loose_meta(m)},
                                                 log_time_grid(5.0e-8, 1.0e-5, 16), 0.01,
                                                 seed);
        const auto res = global_fit(traces, m, f, dis, scan);
        CHECK(res.surface.best().valid);
        CHECK(std::abs(res.state.w_delta_at_ref_hz - dis.w_delta_hz) < 3.0e6);
    }
}

TEST_CASE("the joint scan recovers the generating parameters and is order- and "
          "thread-invariant") {
    material_params m;
    fluorine_model f;
    disorder_model dis;
    rate_params rp;

    std::vector<trace_metadata> metas = {nnn_meta(m, 1), nnn_meta(m, 3), nnn_meta(m, 5),
                                         single_meta(m, 1.0e-3), single_meta(m, 1.0e-4),
                                         loose_meta(m)};
    const std::vector<double> grid = log_time_grid(1.0e-7, 4.0e-5, 14);
    const auto traces = synthesize_trace_set(m, f, dis, rp, metas, grid, 0.01, 31415);

    scan_spec scan;
    scan.c1_values = {rp.c1 - 0.1, rp.c1, rp.c1 + 0.1};
    scan.c2_values = {rp.c2 - 0.3, rp.c2, rp.c2 + 0.3};

    const auto res = global_fit(traces, m, f, dis, scan);
    CHECK(std::abs(res.state.c1 - rp.c1) <= 0.1 + 1e-12);
    CHECK(std::abs(res.state.c2 - rp.c2) <= 0.3 + 1e-12);
    CHECK(std::abs(res.state.w_delta_at_ref_hz - dis.w_delta_hz) < 3.0e6);
    CHECK(res.state.x_ref == dis.x_ref);
    REQUIRE(res.state.nuisance.size() == traces.size());
    for (const auto& nu : res.state.nuisance) {
        CHECK(std::abs(nu[0] - 1.0) < 0.05);
        CHECK(std::abs(nu[1]) < 0.05);
    }
    // the returned rate table is evaluated at the reference abundance
    CHECK(rel_diff(1.0 / res.rates_at_ref[0].kappa_hz, 0.45e-6) < 0.2);

    // trace order only changes floating-point accumulation order
    std::vector<echo_trace> reversed(traces.rbegin(), traces.rend());
    const auto res_rev = global_fit(reversed, m, f, dis, scan);
    CHECK(res_rev.state.c1 == res.state.c1);
    CHECK(res_rev.state.c2 == res.state.c2);
    CHECK(rel_diff(res_rev.state.w_delta_at_ref_hz, res.state.w_delta_at_ref_hz) < 1e-6);
    CHECK(rel_diff(res_rev.state.residual_sum, res.state.residual_sum) < 1e-6);

    // cells are independent: a thread partition must not change any of them
    scan_spec scan_mt = scan;
    scan_mt.threads = 3;
    const auto res_mt = global_fit(traces, m, f, dis, scan_mt);
    REQUIRE(res_mt.surface.cells.size() == res.surface.cells.size());
    for (std::size_t i = 0; i < res.surface.cells.size(); ++i) {
        CHECK(res_mt.surface.cells[i].w_delta_hz == res.surface.cells[i].w_delta_hz);
        CHECK(res_mt.surface.cells[i].residual == res.surface.cells[i].residual);
    }
    CHECK(res_mt.surface.best_index == res.surface.best_index);
}

TEST_CASE("scan input validation") {
    material_params m;
    fluorine_model f;
    disorder_model dis;
    rate_params rp;
    const auto traces = synthesize_trace_set(m, f, dis, rp, {nnn_meta(m, 1)},
                                             log_time_grid(1.0e-6, 1.0e-5, 8), 0.0, 1);
    scan_spec scan;
    scan.c1_values = {0.41};
    scan.c2_values = {1.67};

    const std::vector<echo_trace> none;
    CHECK_THROWS_AS(global_fit(none, m, f, dis, scan), validation_error);
    scan_spec bad = scan;
    bad.c1_values.clear();
    CHECK_THROWS_AS(global_fit(traces, m, f, dis, bad), validation_error);
    bad = scan;
    bad.c2_values = {-1.0};
    CHECK_THROWS_AS(global_fit(traces, m, f, dis, bad), validation_error);
    bad = scan;
    bad.w_delta_hi_hz = bad.w_delta_lo_hz;
    CHECK_THROWS_AS(global_fit(traces, m, f, dis, bad), validation_error);
    bad = scan;
    bad.threads = 0;
    CHECK_THROWS_AS(global_fit(traces, m, f, dis, bad), validation_error);
    CHECK_THROWS_AS(trace_set_residual(none, m, f, dis, rp, false), validation_error);
}
