#ifndef ECHOSIM_RATES_HPP
#define ECHOSIM_RATES_HPP

#include "echosim/config.hpp"
#include "echosim/levels.hpp"
#include "echosim/material.hpp"

#include <array>

namespace echosim {

// Quenched disorder widths.  The splitting disorder W_Delta tracks the dopant
// fraction (it is dominated by doping-induced strain); the magnetic-field
// disorder of the magnetised branches is dominated by the host nuclear bath
// and is therefore x-independent.  Both field widths are stored as FWHM.
struct disorder_model {
    double w_delta_hz = 21.0e6; // Gaussian sigma of the splitting disorder at x_ref
    double x_ref = 1.0e-3;
    bool w_delta_scales_with_x = true;
    double dh_fwhm_clock_t = 0.56e-3;
    double dh_fwhm_magnetized_t = 2.3548e-3;

    double w_delta_at(double x) const {
        return w_delta_scales_with_x ? w_delta_hz * (x / x_ref) : w_delta_hz;
    }
    double field_sigma_clock_t() const { return dh_fwhm_clock_t / phys::fwhm_over_sigma; }
    double field_sigma_magnetized_t() const {
        return dh_fwhm_magnetized_t / phys::fwhm_over_sigma;
    }
};
disorder_model disorder_from_config(const config_map& cfg);

// resonance-counting constants of the flip-rate law
struct rate_params {
    double c1 = 0.41; // localisation constant in exp(-1 / c1 alpha)
    double c2 = 1.67; // prefactor constant
    double quasi_static_threshold_s = 1.0; // tau_s above this counts as frozen
};
rate_params rate_params_from_config(const config_map& cfg);

// Total Gaussian sigma of one hyperfine branch's transition energy:
// sqrt(W_Delta^2 + (m_diag g mu_B sigma_B)^2).
double species_width_hz(const material_params& m, const disorder_model& dis, double iz,
                        double bz_t);

// resonance parameter alpha = 4 J_typ m_off^2 rho(0), rho the normalised
// Gaussian density of the branch's own line
double resonance_alpha(const material_params& m, const disorder_model& dis, double iz,
                       double bz_t);

struct species_rate {
    double iz = 0.0;
    double alpha = 0.0;
    double width_hz = 0.0;   // sigma of the branch line
    double m_off = 0.0;
    double kappa_hz = 0.0;   // flip rate 1/tau_s
    double tau_s_s = 0.0;
    bool quasi_static = false;
};

// kappa = 2 e c2 (2 pi J_typ m_off^2 / alpha) exp(-1 / (c1 alpha))
species_rate flip_rate(const material_params& m, const disorder_model& dis,
                       const rate_params& rp, double iz, double bz_t);
std::array<species_rate, 4> rate_table(const material_params& m, const disorder_model& dis,
                                       const rate_params& rp, double bz_t);

// same rate written with the prefactor folded into the exponent,
// kappa = 2 c2 (2 pi J m^2 / alpha) exp(-(1 - c1 alpha) / (c1 alpha));
// algebraically identical to flip_rate
double flip_rate_alt_form(double j_typ_m2_hz, double alpha, const rate_params& rp);

// Spectral function of a flip-broadened bath line (ordinary-frequency form):
// A(delta) = (kappa / 2 pi) / (delta^2 + eta^2), eta = kappa / 4 pi.
double lorentzian_spectral(double detuning_hz, double kappa_hz);

// Golden-rule decay against a disordered flip-broadened bath:
// 1/T1 = 4 pi^2 J^2 [ integral rho(delta) sqrt(A(delta)) d delta ]^2,
// rho a Gaussian of width sigma centred at line_offset from the probe.
double golden_rule_t1_inv(double j_hz, double sigma_hz, double kappa_hz,
                          double line_offset_hz, double rtol = 1e-6);

// closed-form estimate (pi/2) kappa (alpha g / 2)^2, g = 2 ln(1.5 W / eta)
double golden_rule_t1_inv_closed(double alpha, double kappa_hz, double sigma_hz);

// pair decay: both members decay independently, plus the pair transition sees
// twice the bath coupling; net factor 3 on the single-ion golden rule
double pair_t1_inv(double j_hz, double sigma_hz, double kappa_hz, double line_offset_hz,
                   double rtol = 1e-6);

// echo amplitude against direct decay: exp(-t / (tau_s + sqrt(t T1))),
// crossing over from exp(-t/tau_s) to the rate-averaged exp(-sqrt(t/T1))
double decay_suppression(double t_s, double tau_s_s, double t1_s);

// rate density whose Laplace transform is exp(-sqrt(t/T1)):
// p(gamma) = exp(-1/(4 gamma T1)) / sqrt(4 pi gamma^3 T1)
double rate_density(double gamma_hz, double t1_s);

// ratio of direct-phonon rates at two transition energies (cubic density of
// states, times a degeneracy factor for the two decay paths of the upper line)
double phonon_rate_ratio(double e1_hz, double e2_hz, double degeneracy = 2.0);

} // namespace echosim

#endif
