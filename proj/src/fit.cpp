#include "echosim/fit.hpp"

#include "echosim/constants.hpp"
#include "echosim/errors.hpp"
#include "echosim/optimize.hpp"
#include "echosim/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <thread>
#include <tuple>

namespace echosim {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

// weighted linear fit of y = a * basis + c; returns {a, c, sse}
struct amplitude_fit {
    double a = 0.0;
    double c = 0.0;
    double sse = inf;
};

amplitude_fit profile_linear(const std::vector<double>& y, const std::vector<double>& basis,
                             const std::vector<double>& w, bool with_offset) {
    double s_bb = 0, s_b = 0, s_1 = 0, s_yb = 0, s_y = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        s_bb += w[i] * basis[i] * basis[i];
        s_b += w[i] * basis[i];
        s_1 += w[i];
        s_yb += w[i] * y[i] * basis[i];
        s_y += w[i] * y[i];
    }
    amplitude_fit out;
    if (with_offset) {
        const double det = s_bb * s_1 - s_b * s_b;
        if (std::abs(det) > 1e-14 * std::max(s_bb * s_1, 1e-300)) {
            out.a = (s_yb * s_1 - s_y * s_b) / det;
            out.c = (s_y * s_bb - s_yb * s_b) / det;
        } else {
            out.a = s_bb > 0 ? s_yb / s_bb : 0.0;
        }
    } else {
        out.a = s_bb > 0 ? s_yb / s_bb : 0.0;
    }
    out.sse = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double r = y[i] - (out.a * basis[i] + out.c);
        out.sse += w[i] * r * r;
    }
    return out;
}

double nearest_clock_iz(const material_params& m, double bz_t) {
    double best_iz = -1.5, best = inf;
    for (double iz : iz_values) {
        const double d = std::abs(clock_field_t(m, iz) - bz_t);
        if (d < best) {
            best = d;
            best_iz = iz;
        }
    }
    return best_iz;
}

double trace_noise_rel(const echo_trace& tr) {
    if (tr.sigma.empty()) return 0.0; // treated as noiseless
    std::vector<double> s = tr.sigma;
    std::nth_element(s.begin(), s.begin() + s.size() / 2, s.end());
    double scale = 0.0;
    for (double y : tr.intensity) scale = std::max(scale, std::abs(y));
    return scale > 0 ? s[s.size() / 2] / scale : 0.0;
}

} // namespace

// ---- trace CSV IO -------------------------------------------------------

echo_trace read_trace_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("cannot open trace file: " + path);
    echo_trace tr;
    std::string line;
    int lineno = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line != "t_s,intensity" && line != "t_s,intensity,sigma")
                throw validation_error(path + ":" + std::to_string(lineno) +
                                       ":1: expected header 't_s,intensity[,sigma]', got '" +
                                       line + "'");
            header_seen = true;
            continue;
        }
        std::vector<std::pair<std::string, int>> fields;
        std::string cur;
        int cur_start = 1;
        for (std::size_t i = 0; i <= line.size(); ++i) {
            if (i == line.size() || line[i] == ',') {
                fields.emplace_back(cur, cur_start);
                cur.clear();
                cur_start = static_cast<int>(i) + 2;
            } else {
                cur += line[i];
            }
        }
        if (fields.size() < 2 || fields.size() > 3)
            throw validation_error(path + ":" + std::to_string(lineno) +
                                   ":1: expected 2 or 3 comma-separated values");
        auto parse = [&](const std::pair<std::string, int>& fld) {
            try {
                std::size_t used = 0;
                const double v = std::stod(fld.first, &used);
                while (used < fld.first.size() &&
                       std::isspace(static_cast<unsigned char>(fld.first[used])))
                    ++used;
                if (used != fld.first.size()) throw std::invalid_argument("trailing text");
                return v;
            } catch (const validation_error&) {
                throw;
            } catch (const std::exception&) {
                throw validation_error(path + ":" + std::to_string(lineno) + ":" +
                                       std::to_string(fld.second) + ": not a number: '" +
                                       fld.first + "'");
            }
        };
        tr.t_s.push_back(parse(fields[0]));
        tr.intensity.push_back(parse(fields[1]));
        if (fields.size() == 3) tr.sigma.push_back(parse(fields[2]));
    }
    if (!header_seen)
        throw validation_error(path + ": empty trace file (missing 't_s,intensity' header)");
    if (!tr.sigma.empty() && tr.sigma.size() != tr.t_s.size())
        throw validation_error(path + ": some rows carry a sigma column and some do not");
    try {
        tr.validate();
    } catch (const validation_error& e) {
        throw validation_error(path + ": " + e.what());
    }
    return tr;
}

void write_trace_csv(const std::string& path, const echo_trace& trace,
                     const std::vector<std::string>& comments) {
    trace.validate();
    std::ofstream out(path);
    if (!out) throw validation_error("cannot open trace file for writing: " + path);
    for (const auto& c : comments) out << "# " << c << "\n";
    const bool with_sigma = !trace.sigma.empty();
    out << (with_sigma ? "t_s,intensity,sigma" : "t_s,intensity") << "\n";
    char buf[128];
    for (std::size_t i = 0; i < trace.t_s.size(); ++i) {
        if (with_sigma)
            std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g\n", trace.t_s[i],
                          trace.intensity[i], trace.sigma[i]);
        else
            std::snprintf(buf, sizeof buf, "%.12g,%.12g\n", trace.t_s[i],
                          trace.intensity[i]);
        out << buf;
    }
    if (!out) throw validation_error("failed while writing trace file: " + path);
}

// ---- nuclear-modulation filtering ---------------------------------------

mims_frequencies shell_frequencies(double nu_f_hz, double a_hz, double b_hz) {
    const double wf = phys::two_pi * nu_f_hz;
    const double aa = phys::two_pi * a_hz;
    const double ba = phys::two_pi * b_hz;
    mims_frequencies out;
    out.w_plus_rad_s = std::hypot(wf + 0.5 * aa, 0.5 * ba);
    out.w_minus_rad_s = std::hypot(wf - 0.5 * aa, 0.5 * ba);
    return out;
}

double mims_model_envelope(const material_params& m, const fluorine_model& f,
                           double delta_e_hz, double nu_f_hz, double scale,
                           double t_s, int n_pulses) {
    double out = 1.0;
    for (bool nn : {true, false}) {
        const shell_couplings sc =
            nn ? fluorine_shell_couplings(m, f.nn_r_m, f.nn_theta_deg)
               : fluorine_shell_couplings(m, f.nnn_r_m, f.nnn_theta_deg);
        const double a = scale * delta_e_hz * sc.j_zz_hz / m.delta_hz;
        const double b = scale * delta_e_hz * sc.j_zx_hz / m.delta_hz;
        const double v = mims_site_envelope(nu_f_hz, a, b, t_s, n_pulses);
        out *= v * v * v * v;
    }
    return out;
}

mims_filter_result filter_mims(const echo_trace& trace, const material_params& m,
                               const fluorine_model& f) {
    trace.validate();
    const int n_pulses = trace.meta.n_pulses;
    const double bz = trace.meta.b_z_t;
    const double iz_probe = nearest_clock_iz(m, bz);
    const double delta_e = m.full_moment_hz_per_t() * bz + m.hyperfine_a_hz * iz_probe;
    const double nu_f0 = m.fluorine_larmor_hz_per_t() * bz;
    const std::size_t n = trace.t_s.size();

    const double noise_rel = trace_noise_rel(trace);
    double model_depth = 0.0;
    if (nu_f0 > 0)
        for (double t : trace.t_s)
            model_depth = std::max(
                model_depth,
                1.0 - mims_model_envelope(m, f, delta_e, nu_f0, 1.0, t, n_pulses));

    mims_filter_result out;
    out.nu_f_hz = nu_f0;
    auto make_degenerate = [&]() {
        out.degenerate = true;
        out.coupling_scale = 1.0;
        out.envelope.assign(n, 1.0);
        out.demodulated = trace;
        out.decay = stretched_exp_fit(trace);
        out.residual = out.decay.residual;
        return out;
    };
    if (nu_f0 <= 0 || model_depth < std::max(2.0 * noise_rel, 1e-4))
        return make_degenerate();

    std::vector<double> w(n, 1.0), basis(n), y(trace.intensity);
    auto sse_at = [&](double ln_t, double beta, double ln_nu, double ln_scale,
                      amplitude_fit* amp_out) {
        const double t_char = std::exp(ln_t);
        const double bc = std::clamp(beta, 0.1, 3.0);
        const double pen = (beta - bc) * (beta - bc) * 1e6;
        const double nu = std::exp(ln_nu);
        const double sc = std::exp(ln_scale);
        for (std::size_t i = 0; i < n; ++i)
            basis[i] = std::exp(-std::pow(trace.t_s[i] / t_char, bc)) *
                       mims_model_envelope(m, f, delta_e, nu, sc, trace.t_s[i], n_pulses);
        const amplitude_fit amp = profile_linear(y, basis, w, true);
        if (amp_out) *amp_out = amp;
        return amp.sse + pen;
    };

    // starting decay scales from the raw trace
    const stretched_fit_result rough = stretched_exp_fit(trace);
    const double ln_t0 = std::log(rough.t_char_s);
    const double beta0 = std::clamp(rough.beta, 0.3, 2.5);

    // the objective is oscillatory in nu_F (lobes spaced by ~1/t_max), so pick
    // the best start on a deterministic grid around the bare-moment value
    double ln_nu0 = std::log(nu_f0), best_sse = inf;
    for (int k = -15; k <= 15; ++k) {
        const double cand = std::log(nu_f0) + 0.02 * k;
        const double s = sse_at(ln_t0, beta0, cand, 0.0, nullptr);
        if (s < best_sse) {
            best_sse = s;
            ln_nu0 = cand;
        }
    }

    // simplex over offsets from the start so the steps are absolute and small
    simplex_options so;
    so.xtol = 1e-9;
    so.ftol = 1e-13;
    so.max_evals = 6000;
    so.initial_step = 0.1;
    const auto nm = nelder_mead(
        [&](const std::vector<double>& p) {
            return sse_at(ln_t0 + p[0], beta0 + p[1], ln_nu0 + p[2], p[3], nullptr);
        },
        {0.0, 0.0, 0.0, 0.0}, so);

    amplitude_fit amp;
    out.residual = sse_at(ln_t0 + nm.x[0], beta0 + nm.x[1], ln_nu0 + nm.x[2], nm.x[3], &amp);
    out.nu_f_hz = std::exp(ln_nu0 + nm.x[2]);
    out.coupling_scale = std::exp(nm.x[3]);
    out.decay.t_char_s = std::exp(ln_t0 + nm.x[0]);
    out.decay.beta = std::clamp(beta0 + nm.x[1], 0.1, 3.0);
    out.decay.i0 = amp.a;
    out.decay.c_off = amp.c;
    out.decay.residual = amp.sse;
    out.decay.converged = nm.converged;
    out.decay.evaluations = nm.evaluations;

    out.envelope.resize(n);
    double fitted_depth = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out.envelope[i] = mims_model_envelope(m, f, delta_e, out.nu_f_hz,
                                              out.coupling_scale, trace.t_s[i], n_pulses);
        fitted_depth = std::max(fitted_depth, 1.0 - out.envelope[i]);
    }
    if (fitted_depth < std::max(2.0 * noise_rel, 1e-4)) return make_degenerate();

    out.demodulated = trace;
    for (std::size_t i = 0; i < n; ++i) {
        out.demodulated.intensity[i] = trace.intensity[i] / out.envelope[i];
        if (!trace.sigma.empty())
            out.demodulated.sigma[i] = trace.sigma[i] / out.envelope[i];
    }
    return out;
}

// ---- field-swept coupling extraction ------------------------------------

double mims_ratio_envelope(double nu_f_hz, double b_nn_hz, const mims_ratios& ratios,
                           double t_s, int n_pulses) {
    const double a_nn = ratios.a_over_b * b_nn_hz;
    const double a_nnn = a_nn / ratios.a_nn_over_a_nnn;
    const double b_nnn = b_nn_hz / ratios.b_nn_over_b_nnn;
    const double v_nn = mims_site_envelope(nu_f_hz, a_nn, b_nn_hz, t_s, n_pulses);
    const double v_nnn = mims_site_envelope(nu_f_hz, a_nnn, b_nnn, t_s, n_pulses);
    return v_nn * v_nn * v_nn * v_nn * v_nnn * v_nnn * v_nnn * v_nnn;
}

mims_coupling_result fit_mims_coupling(const std::vector<echo_trace>& traces,
                                       const material_params& m,
                                       const fluorine_model& f,
                                       const mims_ratios& ratios) {
    if (traces.empty())
        throw validation_error("fit_mims_coupling: no traces given");
    mims_coupling_result out;
    out.ratios = ratios;
    for (const auto& tr : traces) {
        tr.validate();
        const int n_pulses = tr.meta.n_pulses;
        const double bz = tr.meta.b_z_t;
        const double nu_f = m.fluorine_larmor_hz_per_t() * bz;
        mims_coupling_point pt;
        pt.b_z_t = bz;
        if (nu_f <= 0) {
            out.points.push_back(pt);
            continue;
        }
        // model couplings at this field as the starting point
        const double iz_probe = nearest_clock_iz(m, bz);
        const double delta_e = m.full_moment_hz_per_t() * bz + m.hyperfine_a_hz * iz_probe;
        const shell_couplings sc = fluorine_shell_couplings(m, f.nn_r_m, f.nn_theta_deg);
        double b0 = std::abs(delta_e * sc.j_zx_hz / m.delta_hz);
        if (b0 < 1e3) b0 = 1e3; // exactly at the clock point: start off zero

        const std::size_t n = tr.t_s.size();
        std::vector<double> w(n, 1.0), basis(n);
        auto sse_at = [&](double ln_t, double b_nn, amplitude_fit* amp_out) {
            const double t_char = std::exp(ln_t);
            for (std::size_t i = 0; i < n; ++i)
                basis[i] = std::exp(-tr.t_s[i] / t_char) *
                           mims_ratio_envelope(nu_f, b_nn, ratios, tr.t_s[i], n_pulses);
            const amplitude_fit amp = profile_linear(tr.intensity, basis, w, false);
            if (amp_out) *amp_out = amp;
            return amp.sse;
        };
        // 1/e crossing of the raw trace for a coarse decay scale; it can land
        // on a modulation dip, so refine both starts on deterministic grids
        // (the objective has shallow side lobes in the coupling)
        double t0 = tr.t_s.back();
        const double top = tr.intensity.front();
        for (std::size_t i = 0; i < n; ++i)
            if (tr.intensity[i] <= top * std::exp(-1.0)) {
                t0 = tr.t_s[i];
                break;
            }
        double ln_t0 = std::log(t0), best = inf;
        for (int k = -10; k <= 10; ++k) {
            const double cand = std::log(t0) + 0.2 * k;
            const double s = sse_at(cand, b0, nullptr);
            if (s < best) {
                best = s;
                ln_t0 = cand;
            }
        }
        double lb0 = 0.0;
        best = inf;
        for (int k = -15; k <= 15; ++k) {
            const double cand = 0.02 * k;
            const double s = sse_at(ln_t0, b0 * std::exp(cand), nullptr);
            if (s < best) {
                best = s;
                lb0 = cand;
            }
        }
        simplex_options so;
        so.xtol = 1e-9;
        so.ftol = 1e-13;
        so.max_evals = 4000;
        so.initial_step = 0.05;
        const auto nm = nelder_mead(
            [&](const std::vector<double>& p) {
                return sse_at(ln_t0 + p[0], b0 * std::exp(lb0 + p[1]), nullptr);
            },
            {0.0, 0.0}, so);
        pt.b_nn_hz = b0 * std::exp(lb0 + nm.x[1]);
        pt.a_nn_hz = ratios.a_over_b * pt.b_nn_hz;
        pt.t_1e_s = std::exp(ln_t0 + nm.x[0]);
        pt.residual = nm.fx;
        // a point only counts when the fitted modulation rises above the noise
        double depth = 0.0;
        for (double t : tr.t_s)
            depth = std::max(depth,
                             1.0 - mims_ratio_envelope(nu_f, pt.b_nn_hz, ratios, t, n_pulses));
        pt.valid = nm.converged && std::isfinite(nm.fx) &&
                   depth >= std::max(2.0 * trace_noise_rel(tr), 1e-4);
        out.points.push_back(pt);
    }

    std::vector<const mims_coupling_point*> valid;
    for (const auto& pt : out.points)
        if (pt.valid) valid.push_back(&pt);
    if (valid.size() < 2)
        throw convergence_error(
            "fit_mims_coupling: fewer than two field points with usable modulation "
            "contrast; cannot extract a coupling slope");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto* pt : valid) {
        sx += pt->b_z_t;
        sy += pt->b_nn_hz;
        sxx += pt->b_z_t * pt->b_z_t;
        sxy += pt->b_z_t * pt->b_nn_hz;
    }
    const double nv = static_cast<double>(valid.size());
    out.slope_hz_per_t = (nv * sxy - sx * sy) / (nv * sxx - sx * sx);
    return out;
}

// ---- pair-peak disorder -------------------------------------------------

double disorder_from_lineshape(double peak_fwhm_hz, pair_site_correlation corr) {
    if (!(peak_fwhm_hz > 0))
        throw validation_error("disorder_from_lineshape: FWHM must be positive");
    const double w_pair = peak_fwhm_hz / phys::fwhm_over_sigma;
    return corr == pair_site_correlation::correlated ? w_pair : std::sqrt(2.0) * w_pair;
}

// ---- global fit ---------------------------------------------------------

double trace_set_residual(const std::vector<echo_trace>& traces,
                          const material_params& m, const fluorine_model& f,
                          const disorder_model& dis, const rate_params& rp,
                          bool sigma_weighting,
                          std::vector<std::array<double, 2>>* nuisance) {
    if (traces.empty()) throw validation_error("trace_set_residual: no traces");
    if (nuisance) nuisance->assign(traces.size(), {1.0, 0.0});

    // traces sharing (regime, x, B_z, probe line) share the same model build
    using cfg_key = std::tuple<int, double, double, double>;
    std::map<cfg_key, echo_model_config> cache;

    double total = 0.0;
    for (std::size_t idx = 0; idx < traces.size(); ++idx) {
        const echo_trace& tr = traces[idx];
        tr.validate();
        const cfg_key key{static_cast<int>(tr.meta.regime), tr.meta.abundance_x,
                          tr.meta.b_z_t, tr.meta.probe_frequency_hz};
        auto it = cache.find(key);
        if (it == cache.end())
            it = cache.emplace(key, build_echo_model(m, f, dis, rp, tr.meta)).first;
        const echo_model_config& cfg = it->second;

        pulse_sequence seq;
        seq.n_pulses = tr.meta.n_pulses;
        seq.probe_frequency_hz = tr.meta.probe_frequency_hz;
        seq.b_z_t = tr.meta.b_z_t;

        const std::size_t n = tr.t_s.size();
        std::vector<double> basis(n), w(n, 1.0);
        for (std::size_t i = 0; i < n; ++i) {
            seq.total_time_s = tr.t_s[i];
            basis[i] = compose_echo(cfg, seq, tr.t_s[i]);
        }
        if (sigma_weighting && !tr.sigma.empty())
            for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 / (tr.sigma[i] * tr.sigma[i]);
        const amplitude_fit amp = profile_linear(tr.intensity, basis, w, true);
        total += amp.sse;
        if (nuisance) (*nuisance)[idx] = {amp.a, amp.c};
    }
    return total;
}

global_fit_result global_fit(const std::vector<echo_trace>& traces,
                             const material_params& m, const fluorine_model& f,
                             const disorder_model& dis_template, const scan_spec& scan) {
    if (traces.empty()) throw validation_error("global_fit: no traces");
    if (scan.c1_values.empty() || scan.c2_values.empty())
        throw validation_error("global_fit: empty (c1, c2) grid");
    for (double c : scan.c1_values)
        if (!(c > 0)) throw validation_error("global_fit: c1 values must be positive");
    for (double c : scan.c2_values)
        if (!(c > 0)) throw validation_error("global_fit: c2 values must be positive");
    if (!(scan.w_delta_lo_hz > 0) || !(scan.w_delta_hi_hz > scan.w_delta_lo_hz))
        throw validation_error("global_fit: need 0 < w_delta_lo < w_delta_hi");
    if (scan.threads < 1) throw validation_error("global_fit: threads must be >= 1");
    for (const auto& tr : traces) tr.validate();

    global_fit_result out;
    out.surface.c1_values = scan.c1_values;
    out.surface.c2_values = scan.c2_values;
    const std::size_t n1 = scan.c1_values.size();
    const std::size_t n2 = scan.c2_values.size();
    out.surface.cells.resize(n1 * n2);

    auto eval_cell = [&](std::size_t ci) {
        residual_cell cell;
        cell.c1 = scan.c1_values[ci / n2];
        cell.c2 = scan.c2_values[ci % n2];
        rate_params rp;
        rp.c1 = cell.c1;
        rp.c2 = cell.c2;
        try {
            auto objective = [&](double ln_w) {
                disorder_model dis = dis_template;
                dis.w_delta_hz = std::exp(ln_w);
                return trace_set_residual(traces, m, f, dis, rp, scan.sigma_weighting);
            };
            const auto br =
                brent_min(objective, std::log(scan.w_delta_lo_hz),
                          std::log(scan.w_delta_hi_hz), scan.w_ln_xtol, 100);
            cell.w_delta_hz = std::exp(br.x);
            cell.residual = br.fx;
            cell.valid = std::isfinite(br.fx);
        } catch (const convergence_error&) {
            cell.valid = false;
        } catch (const validation_error&) {
            cell.valid = false;
        }
        out.surface.cells[ci] = cell;
    };

    const std::size_t n_cells = n1 * n2;
    const std::size_t n_workers =
        std::min<std::size_t>(static_cast<std::size_t>(scan.threads), n_cells);
    if (n_workers <= 1) {
        for (std::size_t ci = 0; ci < n_cells; ++ci) eval_cell(ci);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t wkr = 0; wkr < n_workers; ++wkr)
            pool.emplace_back([&, wkr]() {
                for (std::size_t ci = wkr; ci < n_cells; ci += n_workers) eval_cell(ci);
            });
        for (auto& th : pool) th.join();
    }

    bool any = false;
    for (std::size_t ci = 0; ci < n_cells; ++ci) {
        const residual_cell& cell = out.surface.cells[ci];
        if (!cell.valid) continue;
        if (!any || cell.residual < out.surface.cells[out.surface.best_index].residual) {
            out.surface.best_index = ci;
            any = true;
        }
    }
    if (!any) throw convergence_error("global_fit: no (c1, c2) grid cell converged");

    const residual_cell& best = out.surface.best();
    out.state.c1 = best.c1;
    out.state.c2 = best.c2;
    out.state.w_delta_at_ref_hz = best.w_delta_hz;
    out.state.x_ref = dis_template.x_ref;
    out.state.fluorine = f;
    rate_params best_rp;
    best_rp.c1 = best.c1;
    best_rp.c2 = best.c2;
    disorder_model best_dis = dis_template;
    best_dis.w_delta_hz = best.w_delta_hz;
    out.state.residual_sum = trace_set_residual(traces, m, f, best_dis, best_rp,
                                                scan.sigma_weighting, &out.state.nuisance);
    material_params m_ref = m;
    m_ref.dopant_fraction = dis_template.x_ref;
    out.rates_at_ref = rate_table(m_ref, best_dis, best_rp, clock_field_t(m_ref, -1.5));
    return out;
}

std::vector<echo_trace> synthesize_trace_set(
    const material_params& m, const fluorine_model& f, const disorder_model& dis,
    const rate_params& rp, const std::vector<trace_metadata>& metas,
    const std::vector<double>& grid, double noise_sigma, std::uint64_t seed) {
    std::vector<echo_trace> out;
    out.reserve(metas.size());
    for (std::size_t i = 0; i < metas.size(); ++i) {
        const echo_model_config cfg = build_echo_model(m, f, dis, rp, metas[i]);
        out.push_back(synthesize_trace(cfg, metas[i], grid, noise_sigma,
                                       seed + 0x9e3779b97f4a7c15ULL * (i + 1)));
    }
    return out;
}

} // namespace echosim
