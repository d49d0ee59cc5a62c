#include "echosim/kernels.hpp"
#include "echosim/constants.hpp"
#include "echosim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace echosim {

void dephasing_channel::validate() const {
    if (!(gamma >= 3.0))
        throw validation_error("dephasing_channel: gamma must be >= 3 (got " +
                               std::to_string(gamma) + ")");
    if (v0 < 0 || kappa_hz < 0 || n_m3 < 0)
        throw validation_error("dephasing_channel: v0, kappa and n must be non-negative");
}

double channel_angular_factor(double gamma) {
    // both built-in patterns, (1-3c^2) at gamma = 3 and (1-3c^2)^2 at gamma = 6,
    // reduce to int_0^1 |1-3c^2| dc = 4 / (3 sqrt 3)
    (void)gamma;
    return 4.0 / (3.0 * std::sqrt(3.0));
}

double fringe_coefficient(double s) {
    if (!(s > 0.0) || s > 1.0)
        throw validation_error("fringe_coefficient: s must lie in (0, 1]");
    // cos(s pi/2) |Gamma(-s)| = [sin(e pi/2)/e] Gamma(2-s)/s with e = 1-s,
    // finite at the s -> 1 pole cancellation
    const double e = 1.0 - s;
    double osc;
    if (std::abs(e) < 1e-8) {
        const double z = 0.5 * phys::pi * e;
        osc = 0.5 * phys::pi * (1.0 - z * z / 6.0);
    } else {
        osc = std::sin(0.5 * phys::pi * e) / e;
    }
    return osc * std::tgamma(2.0 - s) / s;
}

double vbar(const dephasing_channel& ch) {
    ch.validate();
    const double s = 3.0 / ch.gamma;
    const double inner = fringe_coefficient(s) * (2.0 * phys::two_pi / ch.gamma) * ch.n_m3 *
                         ch.angular_factor;
    return 2.0 * ch.v0 * std::pow(inner, ch.gamma / 3.0);
}

double t_short(const dephasing_channel& ch, int n_pulses) {
    ch.validate();
    if (n_pulses < 1) throw validation_error("t_short: n_pulses must be >= 1");
    const double vb = vbar(ch);
    if (!(vb > 0) || !(ch.kappa_hz > 0)) return std::numeric_limits<double>::infinity();
    const double a = ch.gamma / (ch.gamma + 3.0);
    const double inv_ts =
        std::pow(a * ch.kappa_hz * std::pow(vb / n_pulses, 3.0 / ch.gamma),
                 ch.gamma / (ch.gamma + 3.0));
    return 1.0 / inv_ts;
}

double kernel_short(double t_s, const dephasing_channel& ch, int n_pulses) {
    if (t_s < 0) throw validation_error("kernel_short: t must be non-negative");
    const double ts = t_short(ch, n_pulses);
    if (std::isinf(ts)) return 1.0;
    return std::exp(-std::pow(t_s / ts, 1.0 + 3.0 / ch.gamma));
}

double t_long(const dephasing_channel& ch) {
    ch.validate();
    if (!(ch.v0 > 0) || !(ch.kappa_hz > 0)) return std::numeric_limits<double>::infinity();
    const double s2 = 3.0 / (2.0 * ch.gamma); // in (0, 1/2]
    const double gam = std::abs(std::tgamma(2.0 - s2) / (s2 * (s2 - 1.0)));
    const double coeff = (2.0 * phys::two_pi / (2.0 * ch.gamma)) * gam * ch.angular_factor *
                         ch.n_m3 * std::pow(ch.v0, 3.0 / ch.gamma) *
                         std::pow(2.0 / ch.kappa_hz, s2);
    // exponent(t) = coeff t^{s2} = (t / T_l)^{s2}
    return std::pow(coeff, -1.0 / s2);
}

double kernel_long(double t_s, const dephasing_channel& ch) {
    if (t_s < 0) throw validation_error("kernel_long: t must be non-negative");
    const double tl = t_long(ch);
    if (std::isinf(tl)) return 1.0;
    return std::exp(-std::pow(t_s / tl, 3.0 / (2.0 * ch.gamma)));
}

double crossover_beta(double gamma, int n_pulses) {
    if (n_pulses < 1) throw validation_error("crossover_beta: n_pulses must be >= 1");
    static constexpr double beta6[5] = {1.2, 1.1, 1.1, 1.0, 0.93};
    static constexpr double beta3[5] = {0.93, 0.74, 0.63, 0.58, 0.54};
    const int idx = std::min(n_pulses, 5) - 1;
    if (std::abs(gamma - 6.0) < 0.5) return beta6[idx];
    if (std::abs(gamma - 3.0) < 0.5) return beta3[idx];
    throw validation_error("crossover_beta: no table for gamma = " + std::to_string(gamma));
}

double crossover_exponent_scales(double t_s, double gamma, double t_short_s,
                                 double t_long_s, double beta) {
    if (t_s < 0) throw validation_error("crossover_exponent: t must be non-negative");
    if (!(beta > 0)) throw validation_error("crossover_exponent: beta must be positive");
    if (t_s == 0.0) return 0.0;
    if (std::isinf(t_short_s) || std::isinf(t_long_s)) return 0.0;
    const double lx = (1.0 + 3.0 / gamma) * std::log(t_s / t_short_s);
    const double ly = (3.0 / (2.0 * gamma)) * std::log(t_s / t_long_s);
    const double d = beta * (lx - ly);
    // x / (1 + (x/y)^beta)^{1/beta} evaluated in logs; softplus keeps both tails
    const double softplus = d > 30.0 ? d : std::log1p(std::exp(d));
    return std::exp(lx - softplus / beta);
}

double crossover_exponent(double t_s, const dephasing_channel& ch, int n_pulses,
                          double beta) {
    return crossover_exponent_scales(t_s, ch.gamma, t_short(ch, n_pulses), t_long(ch),
                                     beta);
}

double crossover_exponent(double t_s, const dephasing_channel& ch, int n_pulses) {
    return crossover_exponent(t_s, ch, n_pulses, crossover_beta(ch.gamma, n_pulses));
}

double kernel_crossover(double t_s, const dephasing_channel& ch, int n_pulses) {
    return std::exp(-crossover_exponent(t_s, ch, n_pulses));
}

double kernel_crossover(double t_s, const dephasing_channel& ch, int n_pulses,
                        double beta) {
    return std::exp(-crossover_exponent(t_s, ch, n_pulses, beta));
}

double telegraph_suppression(double j_hz, double kappa_hz, double t_s) {
    if (t_s < 0) throw validation_error("telegraph_suppression: t must be non-negative");
    if (kappa_hz < 0) throw validation_error("telegraph_suppression: kappa must be >= 0");
    const double ja = phys::two_pi * std::abs(j_hz);
    if (ja == 0.0) return 1.0;       // no coupling
    if (kappa_hz == 0.0) return 1.0; // static shift refocuses exactly
    const double kt = kappa_hz * t_s;
    const double r = 2.0 * ja / kappa_hz;
    const double lam2 = 1.0 - r * r;
    if (lam2 > 1e-6) {
        const double lam = std::sqrt(lam2);
        // e^{-kt} cosh/sinh(k lam t) assembled from single exponentials so the
        // intermediate values stay bounded
        const double ep = std::exp(-kt * (1.0 - lam));
        const double em = std::exp(-kt * (1.0 + lam));
        const double ch = 0.5 * (ep + em);
        const double sh = 0.5 * (ep - em);
        return (ch - std::exp(-kt)) / lam2 + sh / lam + std::exp(-kt);
    }
    if (lam2 < -1e-6) {
        const double mu = std::sqrt(-lam2);
        const double e = std::exp(-kt);
        return e * ((1.0 - std::cos(kt * mu)) / (mu * mu) + std::sin(kt * mu) / mu + 1.0);
    }
    // series around lam = 0; even in lam so both signs join smoothly
    const double e = std::exp(-kt);
    const double kt2 = kt * kt;
    const double base = 1.0 + kt + 0.5 * kt2;
    const double c1 = kt2 * kt / 6.0 + kt2 * kt2 / 24.0;
    const double c2 = kt2 * kt2 * kt / 120.0 + kt2 * kt2 * kt2 / 720.0;
    return e * (base + lam2 * c1 + lam2 * lam2 * c2);
}

double telegraph_echo_approx(double j_hz, double kappa_hz, double t_s) {
    if (t_s < 0) throw validation_error("telegraph_echo_approx: t must be non-negative");
    const double ja = phys::two_pi * std::abs(j_hz);
    const double decay = std::exp(-kappa_hz * t_s);
    if (ja == 0.0) return decay;
    const double t_c = phys::pi / (2.0 * ja);
    if (t_s >= t_c) return decay;
    return decay * (1.0 + (kappa_hz / (2.0 * ja)) * std::sin(2.0 * ja * t_s));
}

fluorine_model fluorine_from_config(const config_map& cfg) {
    fluorine_model f;
    f.kappa_f_hz = cfg.get_double_or("fluorine", "kappa_f_hz", f.kappa_f_hz);
    f.m_p_telegraph = cfg.get_double_or("fluorine", "m_p_telegraph", f.m_p_telegraph);
    f.nn_r_m = cfg.get_double_or("fluorine", "nn_r_m", f.nn_r_m);
    f.nn_theta_deg = cfg.get_double_or("fluorine", "nn_theta_deg", f.nn_theta_deg);
    f.nnn_r_m = cfg.get_double_or("fluorine", "nnn_r_m", f.nnn_r_m);
    f.nnn_theta_deg = cfg.get_double_or("fluorine", "nnn_theta_deg", f.nnn_theta_deg);
    f.t_f_s = cfg.get_double_or("fluorine", "t_f_s", f.t_f_s);
    f.beta_f = cfg.get_double_or("fluorine", "beta_f", f.beta_f);
    if (!(f.kappa_f_hz >= 0)) throw validation_error("fluorine: kappa_f_hz must be >= 0");
    if (!(f.t_f_s > 0)) throw validation_error("fluorine: t_f_s must be positive");
    return f;
}

shell_couplings fluorine_shell_couplings(const material_params& m, double r_m,
                                         double theta_deg) {
    if (!(r_m > 0)) throw validation_error("fluorine_shell_couplings: r must be positive");
    const double th = theta_deg * phys::pi / 180.0;
    const double c = std::cos(th), s = std::sin(th);
    // moment difference 2 (g mu_B / 2) against a spin-1/2 fluorine in the
    // (1/2) J sz F convention: prefactor 4 x (half-moment dipole constant)
    const double pref = 4.0 * m.jf0_hz_m3() / (r_m * r_m * r_m);
    return {pref * (1.0 - 3.0 * c * c), pref * 3.0 * s * c};
}

double fluorine_j_par_hz(const material_params& m, const fluorine_model& f, bool nn_shell) {
    const double r = nn_shell ? f.nn_r_m : f.nnn_r_m;
    const double th = (nn_shell ? f.nn_theta_deg : f.nnn_theta_deg) * phys::pi / 180.0;
    const double c = std::cos(th);
    return m.jf0_hz_m3() / (r * r * r) * std::abs(1.0 - 3.0 * c * c) * f.m_p_telegraph;
}

double fluorine_nnn_suppression(const material_params& m, const fluorine_model& f,
                                double t_s, int n_pulses) {
    if (n_pulses < 1) throw validation_error("fluorine_nnn_suppression: n_pulses >= 1");
    if (t_s < 0) throw validation_error("fluorine_nnn_suppression: t must be non-negative");
    double total = 1.0;
    for (bool nn : {true, false}) {
        const double j = fluorine_j_par_hz(m, f, nn) / n_pulses;
        const double site = (f.kappa_f_hz >= 2.0 * phys::two_pi * j)
                                ? telegraph_suppression(j, f.kappa_f_hz, t_s)
                                : telegraph_echo_approx(j, f.kappa_f_hz, t_s);
        total *= std::pow(site, f.sites_per_shell);
    }
    return total;
}

double fluorine_loose_suppression(const fluorine_model& f, double t_s) {
    if (t_s < 0) throw validation_error("fluorine_loose_suppression: t must be non-negative");
    if (t_s == 0.0) return 1.0;
    return std::exp(-std::pow(t_s / f.t_f_s, f.beta_f));
}

double mims_site_envelope(double nu_f_hz, double a_hz, double b_hz, double t_s,
                          int n_pulses) {
    if (t_s < 0) throw validation_error("mims_site_envelope: t must be non-negative");
    if (n_pulses < 1) throw validation_error("mims_site_envelope: n_pulses >= 1");
    const double wf = phys::two_pi * nu_f_hz;
    const double aa = phys::two_pi * a_hz;
    const double ba = phys::two_pi * b_hz;
    const double wp = std::hypot(wf + 0.5 * aa, 0.5 * ba);
    const double wm = std::hypot(wf - 0.5 * aa, 0.5 * ba);
    if (wp == 0.0 || wm == 0.0) return 1.0;
    const double k = (wf * ba) / (wp * wm);
    const double depth = k * k; // <= 1 by (wf^2 - S)^2 >= 0
    if (n_pulses == 1) {
        const double sp = std::sin(0.25 * wp * t_s);
        const double sm = std::sin(0.25 * wm * t_s);
        return 1.0 - 2.0 * depth * sp * sp * sm * sm;
    }
    // refocusing trains re-phase the first-order modulation; the surviving
    // component oscillates at the doubled frequencies with stacked depth
    const double sp = std::sin(0.5 * wp * t_s);
    const double sm = std::sin(0.5 * wm * t_s);
    const double d = std::min(2.0 * depth * n_pulses, 1.0);
    return 1.0 - d * sp * sp * sm * sm;
}

double mims_envelope(const material_params& m, const fluorine_model& f, double iz,
                     double bz_t, double t_s, int n_pulses) {
    const double delta_e = m.full_moment_hz_per_t() * bz_t + m.hyperfine_a_hz * iz;
    const double nu_f = m.fluorine_larmor_hz_per_t() * bz_t;
    double out = 1.0;
    for (bool nn : {true, false}) {
        const shell_couplings sc = nn
            ? fluorine_shell_couplings(m, f.nn_r_m, f.nn_theta_deg)
            : fluorine_shell_couplings(m, f.nnn_r_m, f.nnn_theta_deg);
        const double a = delta_e * sc.j_zz_hz / m.delta_hz;
        const double b = delta_e * sc.j_zx_hz / m.delta_hz;
        const double v = mims_site_envelope(nu_f, a, b, t_s, n_pulses);
        out *= v * v * v * v; // 4 equivalent sites per shell
    }
    return out;
}

} // namespace echosim
