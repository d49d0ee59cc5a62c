#ifndef ECHOSIM_KERNELS_HPP
#define ECHOSIM_KERNELS_HPP

#include "echosim/config.hpp"
#include "echosim/material.hpp"

namespace echosim {

// One power-law dephasing channel: randomly placed fluctuators of density n
// couple to the probed coherence as v(r) = v0 g(cos theta) / r^gamma and flip
// at rate kappa.  gamma = 3 with g = 1 - 3 c^2 describes magnetic (single
// dipole) fluctuators, gamma = 6 with g = (1 - 3 c^2)^2 the ring-exchange
// channel of a probed pair.  v0 is an angular amplitude (rad/s m^gamma);
// kappa is a plain rate (1/s).
struct dephasing_channel {
    double gamma = 3.0;
    double v0 = 0.0;          // rad/s m^gamma
    double kappa_hz = 0.0;    // fluctuator flip rate
    double n_m3 = 0.0;        // fluctuator density
    double angular_factor = 0.769800358919501; // int_0^1 |g|^{3/gamma} dc, both patterns

    void validate() const;
};

// integral of |g|^{3/gamma} over half the sphere for the built-in patterns
double channel_angular_factor(double gamma);

// typical coupling strength: vbar = 2 v0 [ P(3/g) (4 pi / g) n I_ang ]^{g/3}
// with P(s) = cos(s pi / 2) |Gamma(-s)| evaluated through its s -> 1 limit
double vbar(const dephasing_channel& ch);

// fringe coefficient P(s) above, finite for s in (0, 1]
double fringe_coefficient(double s);

// short-time echo decay exp[-(t/T_s)^{1+3/gamma}] of N-pulse sequences;
// exponent = [gamma/(gamma+3)] kappa t (vbar t / N)^{3/gamma}
double t_short(const dephasing_channel& ch, int n_pulses);
double kernel_short(double t_s, const dephasing_channel& ch, int n_pulses);

// long-time (motionally narrowed) decay exp[-(t/T_l)^{3/2gamma}];
// exponent = (4 pi / 2 gamma) |Gamma(-3/2gamma)| I_ang n v0^{3/gamma} (2t/kappa)^{3/2gamma}
double t_long(const dephasing_channel& ch);
double kernel_long(double t_s, const dephasing_channel& ch);

// interpolated beta exponents of the short/long crossover, N = 1..5
double crossover_beta(double gamma, int n_pulses);

// full crossover kernel: exponent x / (1 + (x/y)^beta)^{1/beta} with
// x, y the short- and long-branch exponents
double kernel_crossover(double t_s, const dephasing_channel& ch, int n_pulses);
double crossover_exponent(double t_s, const dephasing_channel& ch, int n_pulses);

// same interpolation with an explicit beta (refits) or with explicit branch
// timescales (alternative short-branch conventions)
double kernel_crossover(double t_s, const dephasing_channel& ch, int n_pulses,
                        double beta);
double crossover_exponent(double t_s, const dephasing_channel& ch, int n_pulses,
                          double beta);
double crossover_exponent_scales(double t_s, double gamma, double t_short_s,
                                 double t_long_s, double beta);

// Exact Hahn-echo amplitude against a single telegraph fluctuator that shifts
// the probed angular frequency by +-2 J_a, J_a = 2 pi j_hz (flips in each
// direction at rate kappa):  e^{-kt}[cosh(k l t)/l^2 + sinh(k l t)/l - (1-l^2)/l^2],
// l = sqrt(1 - (2 J_a / kappa)^2), continued to trigonometric form for
// kappa < 2 J_a.  Static fluctuators refocus exactly (-> 1).
double telegraph_suppression(double j_hz, double kappa_hz, double t_s);

// the short form used for strongly coupled slow baths:
// e^{-kt}(1 + (kappa/2J_a) sin(2 J_a t)) below t_c = pi / (2 J_a), e^{-kt} after
double telegraph_echo_approx(double j_hz, double kappa_hz, double t_s);

// fluorine bath parameters
struct fluorine_model {
    double kappa_f_hz = 16393.44262295082; // 1/(61 us)
    double m_p_telegraph = 0.007;          // pair moment seen by the F telegraph bath
    double nn_r_m = 2.244e-10;
    double nn_theta_deg = 67.21;
    double nnn_r_m = 2.293e-10;
    double nnn_theta_deg = 37.94;
    double t_f_s = 10.6e-6;                // loose-probe stretched time
    double beta_f = 1.3;
    int sites_per_shell = 8;
};
fluorine_model fluorine_from_config(const config_map& cfg);

// dipolar couplings of a fluorine shell to the dopant moment difference, in
// the (1/2)(J_zz sz Fz + J_zx sz Fx) convention: {J_zz, J_zx} (ordinary Hz)
struct shell_couplings {
    double j_zz_hz = 0.0;
    double j_zx_hz = 0.0;
};
shell_couplings fluorine_shell_couplings(const material_params& m, double r_m,
                                         double theta_deg);

// longitudinal telegraph coupling of one fluorine site to a pair of moment
// fraction m_p: J_par = (mu0 mu_F g mu_B / 2) / (4 pi h r^3) |1-3c^2| m_p
double fluorine_j_par_hz(const material_params& m, const fluorine_model& f, bool nn_shell);

// 16-site fluorine product (8 nn + 8 nnn sites) for an N-pulse sequence on a
// tight pair: couplings divided by N, oscillatory short form below
// t_c = N pi / (2 J_par), exponential beyond; -> exp(-16 kappa_f t) at long t
double fluorine_nnn_suppression(const material_params& m, const fluorine_model& f,
                                double t_s, int n_pulses);

// loose-probe fluorine decay exp[-(t/T_F)^{beta_F}]
double fluorine_loose_suppression(const fluorine_model& f, double t_s);

// Nuclear-modulation (two-pulse ESEEM) envelope of one fluorine site with
// effective couplings A, B (ordinary Hz) at Larmor frequency nu_f:
//   V = 1 - 2 k sin^2(w+ t/4) sin^2(w- t/4),
//   w+- = 2 pi sqrt((nu_f +- A/2)^2 + B^2/4), k = (w_F B_a / (w+ w-))^2.
// n_pulses > 1 uses the doubled-frequency form with depth min(2kN, 1).
double mims_site_envelope(double nu_f_hz, double a_hz, double b_hz, double t_s,
                          int n_pulses);

// full modulation envelope: 4th power per shell, couplings scaled by the
// clock-field offset delta_e = g mu_B B_z + A I_z through A_i = delta_e J_zz/Delta
double mims_envelope(const material_params& m, const fluorine_model& f, double iz,
                     double bz_t, double t_s, int n_pulses);

} // namespace echosim

#endif
