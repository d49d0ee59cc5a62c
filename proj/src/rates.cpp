#include "echosim/rates.hpp"
#include "echosim/errors.hpp"
#include "echosim/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace echosim {

disorder_model disorder_from_config(const config_map& cfg) {
    disorder_model d;
    d.w_delta_hz = cfg.get_double_or("disorder", "w_delta_hz", d.w_delta_hz);
    d.x_ref = cfg.get_double_or("material", "dopant_fraction", d.x_ref);
    if (cfg.has("disorder", "w_delta_scales_with_x"))
        d.w_delta_scales_with_x = cfg.get_int("disorder", "w_delta_scales_with_x") != 0;
    d.dh_fwhm_clock_t = cfg.get_double_or("disorder", "dh_fwhm_clock_t", d.dh_fwhm_clock_t);
    d.dh_fwhm_magnetized_t =
        cfg.get_double_or("disorder", "dh_fwhm_magnetized_t", d.dh_fwhm_magnetized_t);
    if (!(d.w_delta_hz > 0)) throw validation_error("disorder: w_delta_hz must be positive");
    return d;
}

rate_params rate_params_from_config(const config_map& cfg) {
    rate_params rp;
    rp.c1 = cfg.get_double_or("rates", "c1", rp.c1);
    rp.c2 = cfg.get_double_or("rates", "c2", rp.c2);
    if (!(rp.c1 > 0)) throw validation_error("rates: c1 must be positive");
    if (!(rp.c2 > 0)) throw validation_error("rates: c2 must be positive");
    return rp;
}

double species_width_hz(const material_params& m, const disorder_model& dis, double iz,
                        double bz_t) {
    const level_state s = level_at(m, iz, bz_t);
    // the clock branch (vanishing diagonal moment) sees only splitting disorder;
    // magnetised branches add the field disorder through the full moment
    const double sigma_b =
        s.m_diag < 1e-3 ? dis.field_sigma_clock_t() : dis.field_sigma_magnetized_t();
    const double field_part = s.m_diag * m.full_moment_hz_per_t() * sigma_b;
    const double w_delta = dis.w_delta_at(m.dopant_fraction);
    return std::hypot(w_delta, field_part);
}

double resonance_alpha(const material_params& m, const disorder_model& dis, double iz,
                       double bz_t) {
    const level_state s = level_at(m, iz, bz_t);
    const double w = species_width_hz(m, dis, iz, bz_t);
    const double rho0 = 1.0 / (std::sqrt(phys::two_pi) * w);
    return 4.0 * m.j_typ_hz() * s.m_off * s.m_off * rho0;
}

species_rate flip_rate(const material_params& m, const disorder_model& dis,
                       const rate_params& rp, double iz, double bz_t) {
    species_rate r;
    r.iz = iz;
    const level_state s = level_at(m, iz, bz_t);
    r.m_off = s.m_off;
    r.width_hz = species_width_hz(m, dis, iz, bz_t);
    r.alpha = resonance_alpha(m, dis, iz, bz_t);
    const double j_eff = m.j_typ_hz() * s.m_off * s.m_off;
    r.kappa_hz = 2.0 * phys::euler_e * rp.c2 * (phys::two_pi * j_eff / r.alpha) *
                 std::exp(-1.0 / (rp.c1 * r.alpha));
    if (r.kappa_hz < 1e-12) r.kappa_hz = 0.0; // numerically frozen
    r.tau_s_s = r.kappa_hz > 0 ? 1.0 / r.kappa_hz : std::numeric_limits<double>::infinity();
    r.quasi_static = !(r.tau_s_s < rp.quasi_static_threshold_s);
    return r;
}

std::array<species_rate, 4> rate_table(const material_params& m, const disorder_model& dis,
                                       const rate_params& rp, double bz_t) {
    std::array<species_rate, 4> out;
    for (size_t i = 0; i < iz_values.size(); ++i)
        out[i] = flip_rate(m, dis, rp, iz_values[i], bz_t);
    return out;
}

double flip_rate_alt_form(double j_typ_m2_hz, double alpha, const rate_params& rp) {
    // e exp(-1/(c1 a)) = exp(-(1 - c1 a)/(c1 a)); same rate, different grouping
    return 2.0 * rp.c2 * (phys::two_pi * j_typ_m2_hz / alpha) *
           std::exp(-(1.0 - rp.c1 * alpha) / (rp.c1 * alpha));
}

double lorentzian_spectral(double detuning_hz, double kappa_hz) {
    if (!(kappa_hz > 0)) throw validation_error("lorentzian_spectral: kappa must be positive");
    const double eta = kappa_hz / (2.0 * phys::two_pi);
    return (kappa_hz / phys::two_pi) / (detuning_hz * detuning_hz + eta * eta);
}

double golden_rule_t1_inv(double j_hz, double sigma_hz, double kappa_hz,
                          double line_offset_hz, double rtol) {
    if (!(sigma_hz > 0)) throw validation_error("golden_rule_t1_inv: sigma must be positive");
    if (!(kappa_hz > 0)) return 0.0; // frozen bath cannot absorb the flip
    const double norm = 1.0 / (std::sqrt(phys::two_pi) * sigma_hz);
    auto integrand = [&](double d) {
        const double z = (d - line_offset_hz) / sigma_hz;
        return norm * std::exp(-0.5 * z * z) * std::sqrt(lorentzian_spectral(d, kappa_hz));
    };
    // +-8 sigma around the bath line, with the spectral-function peak at zero
    // detuning included when it lies anywhere near the window
    double lo = line_offset_hz - 8.0 * sigma_hz;
    double hi = line_offset_hz + 8.0 * sigma_hz;
    if (lo < 0.0 && hi > 0.0) {
        // split at the Lorentzian peak so the adaptive rule sees it
        const quad_result left = integrate_adaptive(integrand, lo, 0.0, rtol);
        const quad_result right = integrate_adaptive(integrand, 0.0, hi, rtol);
        const double b = left.value + right.value;
        return 4.0 * phys::pi * phys::pi * j_hz * j_hz * b * b;
    }
    const quad_result q = integrate_adaptive(integrand, lo, hi, rtol);
    return 4.0 * phys::pi * phys::pi * j_hz * j_hz * q.value * q.value;
}

double golden_rule_t1_inv_closed(double alpha, double kappa_hz, double sigma_hz) {
    const double eta = kappa_hz / (2.0 * phys::two_pi);
    const double g = 2.0 * std::log(1.5 * sigma_hz / eta);
    const double half = 0.5 * alpha * g;
    return 0.5 * phys::pi * kappa_hz * half * half;
}

double pair_t1_inv(double j_hz, double sigma_hz, double kappa_hz, double line_offset_hz,
                   double rtol) {
    return 3.0 * golden_rule_t1_inv(j_hz, sigma_hz, kappa_hz, line_offset_hz, rtol);
}

double decay_suppression(double t_s, double tau_s_s, double t1_s) {
    if (t_s < 0) throw validation_error("decay_suppression: t must be non-negative");
    if (t_s == 0.0) return 1.0;
    // exp(-t / (tau_s + sqrt(t T1))): plain exponential while the neighbourhood
    // is static, Laplace-averaged stretched root once rates redistribute
    return std::exp(-t_s / (tau_s_s + std::sqrt(t_s * t1_s)));
}

double rate_density(double gamma_hz, double t1_s) {
    if (!(gamma_hz > 0) || !(t1_s > 0))
        throw validation_error("rate_density: gamma and T1 must be positive");
    const double a = 4.0 * gamma_hz * t1_s;
    return std::exp(-1.0 / a) / std::sqrt(phys::two_pi * 2.0 * gamma_hz * gamma_hz * gamma_hz * t1_s);
}

double phonon_rate_ratio(double e1_hz, double e2_hz, double degeneracy) {
    if (!(e1_hz > 0) || !(e2_hz > 0))
        throw validation_error("phonon_rate_ratio: energies must be positive");
    const double r = e1_hz / e2_hz;
    return degeneracy * r * r * r;
}

} // namespace echosim
