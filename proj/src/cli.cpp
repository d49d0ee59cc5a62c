#include "echosim/cli.hpp"

#include "echosim/errors.hpp"
#include "echosim/fit.hpp"
#include "echosim/levels.hpp"
#include "echosim/mc.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

namespace echosim {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr double nan_d = std::numeric_limits<double>::quiet_NaN();

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string fmt_g(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

// Collects everything a run must record, freezes the manifest hash once the
// output list is known, and writes manifest.json next to the outputs.
class run_context {
public:
    run_context(const std::string& subcommand, const std::vector<std::string>& args,
                const std::string& out_dir)
        : dir_(out_dir.empty() ? "." : out_dir) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw validation_error("cannot create output directory: " + dir_);
        manifest_["toolkit_version"] = toolkit_version;
        manifest_["subcommand"] = subcommand;
        manifest_["arguments"] = args;
        manifest_["configs"] = json::array();
        manifest_["output_dir"] = dir_;
        manifest_["outputs"] = json::array();
    }

    void add_config(const std::string& path) { manifest_["configs"].push_back(path); }
    void set_seed(std::uint64_t seed) { manifest_["seed"] = seed; }

    void declare_outputs(const std::vector<std::string>& names) {
        for (const auto& n : names) manifest_["outputs"].push_back(n);
        hash_ = fnv1a_hex(manifest_.dump());
    }

    const std::string& hash() const { return hash_; }
    std::string path_of(const std::string& name) const { return dir_ + "/" + name; }

    void write_csv(const std::string& name, const std::string& header,
                   const std::vector<std::vector<double>>& rows) const {
        std::ofstream out(path_of(name));
        if (!out) throw validation_error("cannot open output file: " + path_of(name));
        out << "# manifest " << hash_ << "\n" << header << "\n";
        for (const auto& r : rows) {
            for (std::size_t i = 0; i < r.size(); ++i)
                out << (i ? "," : "") << fmt_g(r[i]);
            out << "\n";
        }
    }

    void write_json(const std::string& name, json j) const {
        j["manifest_hash"] = hash_;
        std::ofstream out(path_of(name));
        if (!out) throw validation_error("cannot open output file: " + path_of(name));
        out << j.dump(2) << "\n";
    }

    void write_manifest() const {
        json j = manifest_;
        j["manifest_hash"] = hash_;
        std::ofstream out(path_of("manifest.json"));
        if (!out)
            throw validation_error("cannot open output file: " + path_of("manifest.json"));
        out << j.dump(2) << "\n";
    }

private:
    std::string dir_;
    json manifest_;
    std::string hash_;
};

std::string resolve_config(const std::string& spec) {
    return fs::exists(spec) ? spec : resolve_config_path(spec);
}

std::vector<double> linspace(double lo, double hi, int steps) {
    if (steps < 1) throw validation_error("grid steps must be >= 1");
    std::vector<double> v;
    if (steps == 1) {
        v.push_back(lo);
        return v;
    }
    for (int i = 0; i < steps; ++i)
        v.push_back(lo + (hi - lo) * i / (steps - 1));
    return v;
}

dephasing_channel unit_vbar_channel(double gamma) {
    dephasing_channel ch;
    ch.gamma = gamma;
    ch.angular_factor = channel_angular_factor(gamma);
    ch.n_m3 = 1.0;
    ch.kappa_hz = 1.0;
    ch.v0 = 1.0;
    ch.v0 = 1.0 / vbar(ch);
    return ch;
}

json channel_json(const dephasing_channel& ch, int n_pulses) {
    json j;
    j["gamma"] = ch.gamma;
    j["v0_rad_s_m_gamma"] = ch.v0;
    j["kappa_hz"] = ch.kappa_hz;
    j["density_m3"] = ch.n_m3;
    j["vbar_rad_s"] = vbar(ch);
    j["t_short_s"] = t_short(ch, n_pulses);
    j["t_long_s"] = t_long(ch);
    return j;
}

double default_probe_hz(probe_regime regime) {
    switch (regime) {
    case probe_regime::nnn_pair: return nnn_coupling_times().detune_hz;
    case probe_regime::loose_pair: return loose_coupling_times().detune_hz;
    case probe_regime::single: return 0.0;
    }
    return 0.0;
}

// ---- subcommand option blocks -------------------------------------------

struct common_opts {
    std::string config = "liyf4_tb.ini";
    std::string out = ".";
};

struct levels_opts : common_opts {
    double iz = nan_d;
    double bz_mt = 0.0;
    double dh_mhz = 0.0;
};

struct rates_opts : common_opts {
    double bz_mt = nan_d;
    double x = nan_d;
    double w_delta_mhz = nan_d;
    double c1 = nan_d;
    double c2 = nan_d;
};

struct kernel_opts : common_opts {
    double gamma = 3.0;
    double v0 = 0.0;
    double kappa_hz = 0.0;
    double density_m3 = 0.0;
    int n_pulses = 1;
    double beta = nan_d;
    double t_max_us = nan_d;
    int points = 200;
};

struct echo_opts : common_opts {
    std::string regime = "nnn-pair";
    double x = nan_d;
    double bz_mt = nan_d;
    double probe_ghz = nan_d;
    int n_pulses = 1;
    double t_min_us = 0.05;
    double t_max_us = 50.0;
    int points_per_decade = 32;
    double noise_sigma = 0.0;
    std::uint64_t seed = 1;
    bool no_mims = false;
};

struct fit_trace_opts : common_opts {
    std::string trace;
    double bz_mt = 0.0;
    int n_pulses = 1;
    bool filter = false;
    bool log_space = false;
    double fix_beta = nan_d;
    bool no_offset = false;
};

struct fit_opts : common_opts {
    std::string traces_ini;
    double c1_min = 0.11, c1_max = 1.01;
    int c1_steps = 10;
    double c2_min = 0.47, c2_max = 3.17;
    int c2_steps = 10;
    double w_min_mhz = 5.0, w_max_mhz = 60.0;
    int threads = 1;
    bool sigma_weighting = false;
    bool no_x_scaling = false;
};

struct mc_opts : common_opts {
    std::string suite = "kernels";
    std::size_t samples = 20000;
    std::uint64_t seed = 42;
};

struct abundance_opts : common_opts {
    double t2_target_us = 0.0;
    double t2_single_us = 0.45;
    double t2_pair_us = 3.8;
    double x_ref = 1.0e-3;
};

// ---- runners ------------------------------------------------------------

int run_levels(const levels_opts& o, const std::vector<std::string>& args) {
    const std::string cfg_path = resolve_config(o.config);
    const material_params m = material_from_config(load_config_file(cfg_path));
    const double bz = o.bz_mt * 1e-3, dh = o.dh_mhz * 1e6;

    std::vector<double> izs;
    if (std::isnan(o.iz))
        izs.assign(iz_values.begin(), iz_values.end());
    else
        izs.push_back(o.iz);

    run_context ctx("levels", args, o.out);
    ctx.add_config(cfg_path);
    ctx.declare_outputs({"levels.csv", "levels.json"});

    std::vector<std::vector<double>> rows;
    json jrows = json::array();
    for (double iz : izs) {
        const level_state lv = level_at(m, iz, bz, dh);
        const double clock_mt = clock_field_t(m, iz) * 1e3;
        rows.push_back({iz, lv.h_hz, lv.energy_hz, lv.m_off, lv.m_diag, clock_mt});
        jrows.push_back({{"iz", iz},
                         {"h_hz", lv.h_hz},
                         {"energy_hz", lv.energy_hz},
                         {"m_off", lv.m_off},
                         {"m_diag", lv.m_diag},
                         {"clock_field_mt", clock_mt}});
        std::printf("iz=%+.1f  h=%.6g Hz  energy=%.6g Hz  m_off=%.4f  m_diag=%.4f  "
                    "clock=%.2f mT\n",
                    iz, lv.h_hz, lv.energy_hz, lv.m_off, lv.m_diag, clock_mt);
    }
    ctx.write_csv("levels.csv", "iz,h_hz,energy_hz,m_off,m_diag,clock_field_mt", rows);
    ctx.write_json("levels.json",
                   {{"b_z_t", bz}, {"dh_hz", dh}, {"levels", jrows}});
    ctx.write_manifest();
    return 0;
}

int run_rates(const rates_opts& o, const std::vector<std::string>& args) {
    const std::string cfg_path = resolve_config(o.config);
    const config_map cfg = load_config_file(cfg_path);
    material_params m = material_from_config(cfg);
    disorder_model dis = disorder_from_config(cfg);
    rate_params rp = rate_params_from_config(cfg);
    if (!std::isnan(o.x)) m.dopant_fraction = o.x;
    if (!std::isnan(o.w_delta_mhz)) dis.w_delta_hz = o.w_delta_mhz * 1e6;
    if (!std::isnan(o.c1)) rp.c1 = o.c1;
    if (!std::isnan(o.c2)) rp.c2 = o.c2;
    const double bz = std::isnan(o.bz_mt) ? clock_field_t(m, -1.5) : o.bz_mt * 1e-3;

    const auto table = rate_table(m, dis, rp, bz);

    run_context ctx("rates", args, o.out);
    ctx.add_config(cfg_path);
    ctx.declare_outputs({"rates.csv", "rates.json"});
    std::vector<std::vector<double>> rows;
    json jrows = json::array();
    for (const auto& r : table) {
        rows.push_back({r.iz, r.alpha, r.width_hz, r.m_off, r.kappa_hz, r.tau_s_s,
                        r.quasi_static ? 1.0 : 0.0});
        jrows.push_back({{"iz", r.iz},
                         {"alpha", r.alpha},
                         {"width_hz", r.width_hz},
                         {"m_off", r.m_off},
                         {"kappa_hz", r.kappa_hz},
                         {"tau_s_s", r.tau_s_s},
                         {"quasi_static", r.quasi_static}});
        std::printf("iz=%+.1f  alpha=%.4g  kappa=%.6g 1/s  tau_s=%.6g s%s\n", r.iz,
                    r.alpha, r.kappa_hz, r.tau_s_s, r.quasi_static ? "  (quasi-static)" : "");
    }
    ctx.write_csv("rates.csv", "iz,alpha,width_hz,m_off,kappa_hz,tau_s_s,quasi_static",
                  rows);
    ctx.write_json("rates.json", {{"b_z_t", bz},
                                  {"dopant_fraction", m.dopant_fraction},
                                  {"w_delta_hz", dis.w_delta_hz},
                                  {"c1", rp.c1},
                                  {"c2", rp.c2},
                                  {"rates", jrows}});
    ctx.write_manifest();
    return 0;
}

int run_kernel(const kernel_opts& o, const std::vector<std::string>& args) {
    dephasing_channel ch;
    ch.gamma = o.gamma;
    ch.v0 = o.v0;
    ch.kappa_hz = o.kappa_hz;
    ch.n_m3 = o.density_m3;
    ch.angular_factor = channel_angular_factor(o.gamma);
    ch.validate();
    if (o.n_pulses < 1) throw validation_error("--n-pulses must be >= 1");
    if (o.points < 2) throw validation_error("--points must be >= 2");
    double t_max;
    if (!std::isnan(o.t_max_us)) {
        t_max = o.t_max_us * 1e-6;
    } else if (ch.kappa_hz > 0) {
        t_max = 20.0 / ch.kappa_hz;
    } else {
        throw validation_error("--t-max-us is required when --kappa-hz is 0");
    }
    if (!(t_max > 0)) throw validation_error("--t-max-us must be positive");
    const double beta_used =
        std::isnan(o.beta) ? crossover_beta(o.gamma, o.n_pulses) : o.beta;

    run_context ctx("kernel", args, o.out);
    ctx.declare_outputs({"kernel.csv", "kernel.json"});
    std::vector<std::vector<double>> rows;
    for (int i = 1; i <= o.points; ++i) {
        const double t = t_max * i / o.points;
        const double xs = -std::log(kernel_short(t, ch, o.n_pulses));
        const double xl = -std::log(kernel_long(t, ch));
        const double xc = std::isnan(o.beta)
                              ? crossover_exponent(t, ch, o.n_pulses)
                              : crossover_exponent(t, ch, o.n_pulses, o.beta);
        rows.push_back({t, xs, xl, xc, std::exp(-xc)});
    }
    ctx.write_csv("kernel.csv",
                  "t_s,exponent_short,exponent_long,exponent_crossover,intensity", rows);
    json j = channel_json(ch, o.n_pulses);
    j["n_pulses"] = o.n_pulses;
    j["beta"] = beta_used;
    j["t_max_s"] = t_max;
    ctx.write_json("kernel.json", j);
    ctx.write_manifest();
    std::printf("vbar=%.6g rad/s  T_short=%.6g s  T_long=%.6g s  beta=%.3f\n", vbar(ch),
                t_short(ch, o.n_pulses), t_long(ch), beta_used);
    return 0;
}

int run_echo(const echo_opts& o, const std::vector<std::string>& args) {
    const std::string cfg_path = resolve_config(o.config);
    const config_map cfg = load_config_file(cfg_path);
    const material_params m = material_from_config(cfg);
    const fluorine_model f = fluorine_from_config(cfg);
    const disorder_model dis = disorder_from_config(cfg);
    const rate_params rp = rate_params_from_config(cfg);

    trace_metadata meta;
    meta.regime = regime_from_name(o.regime);
    meta.abundance_x = std::isnan(o.x) ? m.dopant_fraction : o.x;
    meta.n_pulses = o.n_pulses;
    meta.b_z_t = std::isnan(o.bz_mt) ? clock_field_t(m, -1.5) : o.bz_mt * 1e-3;
    meta.probe_frequency_hz =
        std::isnan(o.probe_ghz) ? default_probe_hz(meta.regime) : o.probe_ghz * 1e9;

    echo_model_config model = build_echo_model(m, f, dis, rp, meta);
    if (o.no_mims) model.include_mims = false;
    const std::vector<double> grid =
        log_time_grid(o.t_min_us * 1e-6, o.t_max_us * 1e-6, o.points_per_decade);
    const echo_trace trace = synthesize_trace(model, meta, grid, o.noise_sigma, o.seed);

    run_context ctx("echo", args, o.out);
    ctx.add_config(cfg_path);
    ctx.set_seed(o.seed);
    ctx.declare_outputs({"echo.csv", "echo.json"});
    write_trace_csv(ctx.path_of("echo.csv"), trace, {"manifest " + ctx.hash()});

    json jspecies = json::array();
    for (const auto& sp : model.species) {
        json js;
        js["iz"] = sp.iz;
        js["ring"] = channel_json(sp.ring, meta.n_pulses);
        js["magnetic"] = channel_json(sp.magnetic, meta.n_pulses);
        js["tau_s_s"] = std::isfinite(sp.tau_s_s) ? json(sp.tau_s_s) : json();
        js["t1_s"] = std::isfinite(sp.t1_s) ? json(sp.t1_s) : json();
        jspecies.push_back(js);
    }
    ctx.write_json("echo.json", {{"regime", regime_name(meta.regime)},
                                 {"abundance_x", meta.abundance_x},
                                 {"b_z_t", meta.b_z_t},
                                 {"probe_frequency_hz", meta.probe_frequency_hz},
                                 {"n_pulses", meta.n_pulses},
                                 {"include_mims", model.include_mims},
                                 {"n_points", trace.t_s.size()},
                                 {"species", jspecies}});
    ctx.write_manifest();
    std::printf("wrote %zu echo points for regime %s (I(t_min)=%.4f, I(t_max)=%.4g)\n",
                trace.t_s.size(), regime_name(meta.regime),
                trace.intensity.front(), trace.intensity.back());
    return 0;
}

int run_fit_trace(const fit_trace_opts& o, const std::vector<std::string>& args) {
    const std::string cfg_path = resolve_config(o.config);
    const config_map cfg = load_config_file(cfg_path);
    const material_params m = material_from_config(cfg);
    const fluorine_model f = fluorine_from_config(cfg);

    echo_trace tr = read_trace_csv(o.trace);
    tr.meta.b_z_t = o.bz_mt * 1e-3;
    tr.meta.n_pulses = o.n_pulses;

    run_context ctx("fit-trace", args, o.out);
    ctx.add_config(cfg_path);
    ctx.declare_outputs({"fit_trace.json", "fit_curve.csv"});

    stretched_fit_result fit;
    json jmims;
    std::vector<std::vector<double>> rows;
    if (o.filter) {
        const mims_filter_result res = filter_mims(tr, m, f);
        fit = res.decay;
        jmims = {{"nu_f_hz", res.nu_f_hz},
                 {"coupling_scale", res.coupling_scale},
                 {"degenerate", res.degenerate},
                 {"residual", res.residual}};
        for (std::size_t i = 0; i < tr.t_s.size(); ++i) {
            const double stretched =
                fit.i0 * std::exp(-std::pow(tr.t_s[i] / fit.t_char_s, fit.beta)) +
                fit.c_off;
            rows.push_back({tr.t_s[i], tr.intensity[i], stretched * res.envelope[i],
                            res.envelope[i], res.demodulated.intensity[i]});
        }
    } else {
        stretched_fit_options opts;
        opts.log_space = o.log_space;
        opts.fit_offset = !o.no_offset;
        if (!std::isnan(o.fix_beta)) opts.beta_fixed = o.fix_beta;
        fit = stretched_exp_fit(tr, opts);
        for (std::size_t i = 0; i < tr.t_s.size(); ++i) {
            const double model =
                fit.i0 * std::exp(-std::pow(tr.t_s[i] / fit.t_char_s, fit.beta)) +
                fit.c_off;
            rows.push_back({tr.t_s[i], tr.intensity[i], model});
        }
    }
    if (!fit.converged)
        throw convergence_error("stretched fit did not converge within the evaluation "
                                "budget for trace " + o.trace);

    ctx.write_csv("fit_curve.csv",
                  o.filter ? "t_s,intensity,model,envelope,demodulated"
                           : "t_s,intensity,model",
                  rows);
    json j = {{"trace", o.trace},
              {"t_char_s", fit.t_char_s},
              {"beta", fit.beta},
              {"i0", fit.i0},
              {"c_off", fit.c_off},
              {"t_char_err_s", fit.t_char_err},
              {"beta_err", fit.beta_err},
              {"i0_err", fit.i0_err},
              {"c_off_err", fit.c_off_err},
              {"residual", fit.residual},
              {"evaluations", fit.evaluations},
              {"converged", fit.converged}};
    if (!jmims.is_null()) j["mims"] = jmims;
    ctx.write_json("fit_trace.json", j);
    ctx.write_manifest();
    std::printf("T_char=%.6g s  beta=%.3f  i0=%.4f  c_off=%.4f  residual=%.4g\n",
                fit.t_char_s, fit.beta, fit.i0, fit.c_off, fit.residual);
    return 0;
}

int run_fit(const fit_opts& o, const std::vector<std::string>& args) {
    const std::string cfg_path = resolve_config(o.config);
    const config_map cfg = load_config_file(cfg_path);
    const material_params m = material_from_config(cfg);
    const fluorine_model f = fluorine_from_config(cfg);
    disorder_model dis = disorder_from_config(cfg);
    if (o.no_x_scaling) dis.w_delta_scales_with_x = false;

    const config_map tcfg = load_config_file(o.traces_ini);
    const fs::path base = fs::path(o.traces_ini).parent_path();
    std::vector<echo_trace> traces;
    std::vector<std::string> trace_names;
    for (const auto& [section, keys] : tcfg.sections()) {
        if (section.rfind("trace", 0) != 0) continue;
        (void)keys;
        const std::string file = tcfg.get_string(section, "file");
        fs::path p(file);
        if (p.is_relative()) p = base / p;
        echo_trace tr = read_trace_csv(p.string());
        tr.meta.regime = regime_from_name(tcfg.get_string(section, "regime"));
        tr.meta.b_z_t = tcfg.get_double(section, "bz_mt") * 1e-3;
        tr.meta.abundance_x = tcfg.get_double(section, "x");
        tr.meta.n_pulses =
            tcfg.has(section, "n_pulses") ? tcfg.get_int(section, "n_pulses") : 1;
        tr.meta.probe_frequency_hz =
            tcfg.has(section, "probe_ghz")
                ? tcfg.get_double(section, "probe_ghz") * 1e9
                : default_probe_hz(tr.meta.regime);
        traces.push_back(std::move(tr));
        trace_names.push_back(section);
    }
    if (traces.empty())
        throw validation_error("no [trace ...] sections in " + o.traces_ini);

    scan_spec scan;
    scan.c1_values = linspace(o.c1_min, o.c1_max, o.c1_steps);
    scan.c2_values = linspace(o.c2_min, o.c2_max, o.c2_steps);
    scan.w_delta_lo_hz = o.w_min_mhz * 1e6;
    scan.w_delta_hi_hz = o.w_max_mhz * 1e6;
    scan.sigma_weighting = o.sigma_weighting;
    scan.threads = o.threads;

    const global_fit_result res = global_fit(traces, m, f, dis, scan);

    run_context ctx("fit", args, o.out);
    ctx.add_config(cfg_path);
    ctx.add_config(o.traces_ini);
    std::vector<std::string> outputs = {"fit_state.json", "residual_surface.csv",
                                        "rate_table.csv"};
    for (std::size_t k = 0; k < traces.size(); ++k)
        outputs.push_back("trace_" + std::to_string(k) + "_fit.csv");
    ctx.declare_outputs(outputs);

    // best-fit state
    json jnuisance = json::array();
    for (const auto& nu : res.state.nuisance) jnuisance.push_back({nu[0], nu[1]});
    std::size_t valid_cells = 0;
    for (const auto& cell : res.surface.cells)
        if (cell.valid) ++valid_cells;
    ctx.write_json("fit_state.json",
                   {{"c1", res.state.c1},
                    {"c2", res.state.c2},
                    {"w_delta_at_ref_hz", res.state.w_delta_at_ref_hz},
                    {"x_ref", res.state.x_ref},
                    {"residual_sum", res.state.residual_sum},
                    {"nuisance", jnuisance},
                    {"traces", trace_names},
                    {"valid_cells", valid_cells},
                    {"total_cells", res.surface.cells.size()}});

    std::vector<std::vector<double>> srows;
    for (const auto& cell : res.surface.cells)
        srows.push_back(
            {cell.c1, cell.c2, cell.w_delta_hz, cell.residual, cell.valid ? 1.0 : 0.0});
    ctx.write_csv("residual_surface.csv", "c1,c2,w_delta_hz,residual,valid", srows);

    std::vector<std::vector<double>> rrows;
    for (const auto& r : res.rates_at_ref)
        rrows.push_back({r.iz, r.alpha, r.width_hz, r.m_off, r.kappa_hz, r.tau_s_s,
                         r.quasi_static ? 1.0 : 0.0});
    ctx.write_csv("rate_table.csv", "iz,alpha,width_hz,m_off,kappa_hz,tau_s_s,quasi_static",
                  rrows);

    // per-trace fitted curves at the recovered optimum
    rate_params best_rp;
    best_rp.c1 = res.state.c1;
    best_rp.c2 = res.state.c2;
    disorder_model best_dis = dis;
    best_dis.w_delta_hz = res.state.w_delta_at_ref_hz;
    for (std::size_t k = 0; k < traces.size(); ++k) {
        const echo_trace& tr = traces[k];
        const echo_model_config model = build_echo_model(m, f, best_dis, best_rp, tr.meta);
        pulse_sequence seq;
        seq.n_pulses = tr.meta.n_pulses;
        seq.probe_frequency_hz = tr.meta.probe_frequency_hz;
        seq.b_z_t = tr.meta.b_z_t;
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < tr.t_s.size(); ++i) {
            seq.total_time_s = tr.t_s[i];
            const double y = res.state.nuisance[k][0] * compose_echo(model, seq, tr.t_s[i]) +
                             res.state.nuisance[k][1];
            rows.push_back({tr.t_s[i], tr.intensity[i], y});
        }
        ctx.write_csv("trace_" + std::to_string(k) + "_fit.csv", "t_s,intensity,model",
                      rows);
    }
    ctx.write_manifest();
    std::printf("best cell: c1=%.3f c2=%.3f W_Delta=%.4g Hz residual=%.6g (%zu/%zu cells "
                "valid)\n",
                res.state.c1, res.state.c2, res.state.w_delta_at_ref_hz,
                res.state.residual_sum, valid_cells, res.surface.cells.size());
    return 0;
}

int run_mc_validate(const mc_opts& o, const std::vector<std::string>& args) {
    if (o.samples < 1) throw validation_error("--samples must be >= 1");
    run_context ctx("mc-validate", args, o.out);
    ctx.set_seed(o.seed);
    ctx.declare_outputs({"mc_validate.json"});

    json jcases = json::array();
    if (o.suite == "kernels") {
        // sampled echo against the closed-form crossover kernel; relative in
        // ln I once the decay is appreciable, absolute before that
        bool all_ok = true;
        for (double gamma : {3.0, 6.0}) {
            const dephasing_channel ch = unit_vbar_channel(gamma);
            for (int n_pulses : {1, 3, 5}) {
                const auto grid = oracle_time_grid(ch.kappa_hz);
                const auto ens =
                    make_ensemble(ch, n_pulses, grid.back(), o.samples, o.seed);
                const auto curve = mc_echo(ens, grid);
                double max_err = 0.0, t_at = 0.0;
                for (std::size_t i = 0; i < grid.size(); ++i) {
                    const double ln_mc = std::log(std::max(curve.intensity[i], 1e-12));
                    if (std::abs(ln_mc) < 0.2) continue;
                    const double ln_kernel =
                        std::log(kernel_crossover(grid[i], ch, n_pulses));
                    const double err =
                        std::abs(ln_kernel - ln_mc) / std::max(1.0, std::abs(ln_mc));
                    if (err > max_err) {
                        max_err = err;
                        t_at = grid[i];
                    }
                }
                all_ok = all_ok && max_err <= 0.10;
                jcases.push_back({{"gamma", gamma},
                                  {"n_pulses", n_pulses},
                                  {"max_rel_dln_i", max_err},
                                  {"worst_t_s", t_at},
                                  {"mean_site_count", ens.mean_count},
                                  {"radius_m", ens.radius_m}});
                std::printf("gamma=%g N=%d  max |dln I| = %.4f at t=%.3g s\n", gamma,
                            n_pulses, max_err, t_at);
            }
        }
        ctx.write_json("mc_validate.json", {{"suite", o.suite},
                                            {"seed", o.seed},
                                            {"samples", o.samples},
                                            {"threshold", 0.10},
                                            {"all_below_threshold", all_ok},
                                            {"cases", jcases}});
    } else if (o.suite == "beta") {
        const std::vector<double> ref6 = {1.2, 1.1, 1.1, 1.0, 0.93};
        const std::vector<double> ref3 = {0.93, 0.74, 0.63, 0.58, 0.54};
        for (double gamma : {6.0, 3.0}) {
            const dephasing_channel ch = unit_vbar_channel(gamma);
            const refit_scale scale =
                gamma == 6.0 ? refit_scale::n_scaled : refit_scale::hahn;
            for (int n_pulses = 1; n_pulses <= 5; ++n_pulses) {
                const auto r = beta_refit(ch, n_pulses, o.samples, o.seed, scale);
                const double ref =
                    (gamma == 6.0 ? ref6 : ref3)[static_cast<std::size_t>(n_pulses - 1)];
                jcases.push_back({{"gamma", gamma},
                                  {"n_pulses", n_pulses},
                                  {"beta", r.beta},
                                  {"reference", ref}});
                std::printf("gamma=%g N=%d  beta=%.3f (reference %.2f)\n", gamma, n_pulses,
                            r.beta, ref);
            }
        }
        ctx.write_json("mc_validate.json", {{"suite", o.suite},
                                            {"seed", o.seed},
                                            {"samples", o.samples},
                                            {"cases", jcases}});
    } else {
        throw validation_error("unknown --suite value: " + o.suite +
                               " (expected kernels or beta)");
    }
    ctx.write_manifest();
    return 0;
}

int run_abundance(const abundance_opts& o, const std::vector<std::string>& args) {
    abundance_reference ref;
    ref.x_ref = o.x_ref;
    ref.t2_single_s = o.t2_single_us * 1e-6;
    ref.t2_pair_s = o.t2_pair_us * 1e-6;
    const abundance_result res = abundance_tradeoff(o.t2_target_us * 1e-6, ref);

    run_context ctx("abundance", args, o.out);
    ctx.declare_outputs({"abundance.json"});
    ctx.write_json("abundance.json", {{"t2_target_s", o.t2_target_us * 1e-6},
                                      {"x_single", res.x_single},
                                      {"x_pair", res.x_pair},
                                      {"qubit_density_ratio", res.qubit_density_ratio}});
    ctx.write_manifest();
    std::printf("x_single=%.4g  x_pair=%.4g  pair/single qubit density ratio=%.4g\n",
                res.x_single, res.x_pair, res.qubit_density_ratio);
    return 0;
}

} // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"Spin-echo decoherence toolkit for dense dipolar two-level networks"};
    app.require_subcommand(1);

    levels_opts lo;
    auto* levels_cmd = app.add_subcommand("levels", "Electro-nuclear level structure");
    levels_cmd->add_option("--config", lo.config, "config file path or name (INI)");
    levels_cmd->add_option("--out", lo.out, "output directory");
    levels_cmd->add_option("--iz", lo.iz,
                           "nuclear projection I_z, one of -1.5 -0.5 0.5 1.5 "
                           "(dimensionless; default: all four)");
    levels_cmd->add_option("--bz-mt", lo.bz_mt, "longitudinal field B_z (mT)");
    levels_cmd->add_option("--dh-mhz", lo.dh_mhz, "extra longitudinal bias (MHz)");

    rates_opts ro;
    auto* rates_cmd = app.add_subcommand("rates", "Per-species fluctuation rates");
    rates_cmd->add_option("--config", ro.config, "config file path or name (INI)");
    rates_cmd->add_option("--out", ro.out, "output directory");
    rates_cmd->add_option("--bz-mt", ro.bz_mt,
                          "field B_z (mT; default: -3/2 clock field)");
    rates_cmd->add_option("--x", ro.x, "dopant fraction (dimensionless)");
    rates_cmd->add_option("--w-delta-mhz", ro.w_delta_mhz,
                          "splitting disorder W_Delta at the given x (MHz)");
    rates_cmd->add_option("--c1", ro.c1, "localisation constant c1 (dimensionless)");
    rates_cmd->add_option("--c2", ro.c2, "rate prefactor constant c2 (dimensionless)");

    kernel_opts ko;
    auto* kernel_cmd =
        app.add_subcommand("kernel", "Dephasing kernel of one power-law channel");
    kernel_cmd->add_option("--out", ko.out, "output directory");
    kernel_cmd->add_option("--gamma", ko.gamma, "coupling power gamma (3 or 6)")
        ->required();
    kernel_cmd->add_option("--v0", ko.v0, "coupling amplitude v0 (rad/s m^gamma)")
        ->required();
    kernel_cmd->add_option("--kappa-hz", ko.kappa_hz, "fluctuator flip rate (1/s)")
        ->required();
    kernel_cmd->add_option("--density-m3", ko.density_m3, "fluctuator density (1/m^3)")
        ->required();
    kernel_cmd->add_option("--n-pulses", ko.n_pulses, "number of pi pulses (CPMG)");
    kernel_cmd->add_option("--beta", ko.beta,
                           "crossover sharpness override (dimensionless)");
    kernel_cmd->add_option("--t-max-us", ko.t_max_us,
                           "largest echo time (us; default 20/kappa)");
    kernel_cmd->add_option("--points", ko.points, "number of grid points");

    echo_opts eo;
    auto* echo_cmd = app.add_subcommand("echo", "Composed model echo trace");
    echo_cmd->add_option("--config", eo.config, "config file path or name (INI)");
    echo_cmd->add_option("--out", eo.out, "output directory");
    echo_cmd->add_option("--regime", eo.regime,
                         "probe regime: single, loose-pair, or nnn-pair");
    echo_cmd->add_option("--x", eo.x, "dopant fraction (dimensionless; default: config)");
    echo_cmd->add_option("--bz-mt", eo.bz_mt,
                         "field B_z (mT; default: -3/2 clock field)");
    echo_cmd->add_option("--probe-ghz", eo.probe_ghz,
                         "probe detuning from the single-ion line (GHz; default by regime)");
    echo_cmd->add_option("--n-pulses", eo.n_pulses, "number of pi pulses (CPMG)");
    echo_cmd->add_option("--t-min-us", eo.t_min_us, "first echo time (us)");
    echo_cmd->add_option("--t-max-us", eo.t_max_us, "last echo time (us)");
    echo_cmd->add_option("--points-per-decade", eo.points_per_decade,
                         "log-grid density (points per decade)");
    echo_cmd->add_option("--noise-sigma", eo.noise_sigma,
                         "additive Gaussian noise sigma (intensity units)");
    echo_cmd->add_option("--seed", eo.seed, "noise RNG seed");
    echo_cmd->add_flag("--no-mims", eo.no_mims, "drop the nuclear-modulation envelope");

    fit_trace_opts fo;
    auto* fit_trace_cmd =
        app.add_subcommand("fit-trace", "Stretched-exponential fit of one trace");
    fit_trace_cmd->add_option("--config", fo.config, "config file path or name (INI)");
    fit_trace_cmd->add_option("--out", fo.out, "output directory");
    fit_trace_cmd->add_option("--trace", fo.trace, "trace CSV path (t_s,intensity[,sigma])")
        ->required();
    fit_trace_cmd->add_option("--bz-mt", fo.bz_mt,
                              "field B_z the trace was taken at (mT)");
    fit_trace_cmd->add_option("--n-pulses", fo.n_pulses, "number of pi pulses (CPMG)");
    fit_trace_cmd->add_flag("--filter-mims", fo.filter,
                            "filter the fluorine modulation before fitting");
    fit_trace_cmd->add_flag("--log-space", fo.log_space, "fit in ln I instead of I");
    fit_trace_cmd->add_option("--fix-beta", fo.fix_beta,
                              "hold the stretching exponent fixed (dimensionless)");
    fit_trace_cmd->add_flag("--no-offset", fo.no_offset, "drop the constant offset term");

    fit_opts go;
    auto* fit_cmd = app.add_subcommand("fit", "Global (c1, c2, W_Delta) fit");
    fit_cmd->add_option("--config", go.config, "config file path or name (INI)");
    fit_cmd->add_option("--out", go.out, "output directory");
    fit_cmd->add_option("--traces", go.traces_ini,
                        "INI manifest listing trace CSVs and their metadata")
        ->required();
    fit_cmd->add_option("--c1-min", go.c1_min, "lowest c1 on the grid (dimensionless)");
    fit_cmd->add_option("--c1-max", go.c1_max, "highest c1 on the grid (dimensionless)");
    fit_cmd->add_option("--c1-steps", go.c1_steps, "number of c1 grid values");
    fit_cmd->add_option("--c2-min", go.c2_min, "lowest c2 on the grid (dimensionless)");
    fit_cmd->add_option("--c2-max", go.c2_max, "highest c2 on the grid (dimensionless)");
    fit_cmd->add_option("--c2-steps", go.c2_steps, "number of c2 grid values");
    fit_cmd->add_option("--w-min-mhz", go.w_min_mhz,
                        "lower W_Delta search bound at x_ref (MHz)");
    fit_cmd->add_option("--w-max-mhz", go.w_max_mhz,
                        "upper W_Delta search bound at x_ref (MHz)");
    fit_cmd->add_option("--threads", go.threads, "worker threads over grid cells");
    fit_cmd->add_flag("--sigma-weighting", go.sigma_weighting,
                      "weight residuals by 1/sigma^2 instead of equally");
    fit_cmd->add_flag("--no-x-scaling", go.no_x_scaling,
                      "do not scale W_Delta proportionally to x");

    mc_opts mo;
    auto* mc_cmd = app.add_subcommand("mc-validate",
                                      "Monte Carlo oracle checks of the kernels");
    mc_cmd->add_option("--out", mo.out, "output directory");
    mc_cmd->add_option("--suite", mo.suite, "validation suite: kernels or beta");
    mc_cmd->add_option("--samples", mo.samples, "Monte Carlo samples per case");
    mc_cmd->add_option("--seed", mo.seed, "base RNG seed");

    abundance_opts ao;
    auto* abundance_cmd =
        app.add_subcommand("abundance", "Dopant-fraction coherence trade-off");
    abundance_cmd->add_option("--out", ao.out, "output directory");
    abundance_cmd->add_option("--t2-target-us", ao.t2_target_us,
                              "coherence-time target (us)")
        ->required();
    abundance_cmd->add_option("--t2-single-us", ao.t2_single_us,
                              "single-ion T2 at the reference fraction (us)");
    abundance_cmd->add_option("--t2-pair-us", ao.t2_pair_us,
                              "tight-pair T2 at the reference fraction (us)");
    abundance_cmd->add_option("--x-ref", ao.x_ref,
                              "reference dopant fraction (dimensionless)");

    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("echosim");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1; // unknown flag / bad value / missing subcommand
    }

    try {
        if (levels_cmd->parsed()) return run_levels(lo, args);
        if (rates_cmd->parsed()) return run_rates(ro, args);
        if (kernel_cmd->parsed()) return run_kernel(ko, args);
        if (echo_cmd->parsed()) return run_echo(eo, args);
        if (fit_trace_cmd->parsed()) return run_fit_trace(fo, args);
        if (fit_cmd->parsed()) return run_fit(go, args);
        if (mc_cmd->parsed()) return run_mc_validate(mo, args);
        if (abundance_cmd->parsed()) return run_abundance(ao, args);
    } catch (const validation_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const convergence_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

} // namespace echosim
