#ifndef ECHOSIM_MC_HPP
#define ECHOSIM_MC_HPP

#include "echosim/kernels.hpp"

#include <cstdint>
#include <vector>

namespace echosim {

// Brute-force stochastic sampler for power-law fluctuator dephasing.  Sites
// are Poisson-distributed in a ball at the channel density, each carrying an
// independent +-1 telegraph process with flip rate kappa; a site at (r, c)
// modulates the probed transition at angular rate 2 v0 g(c) / r^gamma.  The
// echo phase is integrated segment-exactly through the alternating CPMG
// filter, so the only approximations are the finite sampling radius (bounded
// below) and Monte Carlo noise.
struct fluctuator_ensemble {
    dephasing_channel channel;
    int n_pulses = 1;
    double radius_m = 0.0;    // sampling ball radius
    double mean_count = 0.0;  // Poisson mean site count, n (4/3) pi R^3
    double t_max_s = 0.0;     // largest echo time the radius was chosen for
    double tail_bound = 0.0;  // |ln I| neglected outside the ball at t_max
    std::uint64_t seed = 1;
    std::size_t n_samples = 10000;
};

// Radius rule: sites beyond R are weakly coupled, so their neglected
// contribution to |ln I(t_max)| is bounded by the mean-field tail
//   8 pi n <g^2> v0^2 F(t) R^{3-2 gamma} / (2 gamma - 3),
//   F(t) = min(t / 2 kappa, (2/3) kappa t^3 / N^2).
// R is chosen so 1.5x that bound stays below tail_frac of the predicted
// |ln I(t_max)|.  Zero-coupling or static channels fall back to a fixed
// 64-site ball (their intensity is exactly 1 at any radius).
fluctuator_ensemble make_ensemble(const dephasing_channel& ch, int n_pulses,
                                  double t_max_s, std::size_t n_samples,
                                  std::uint64_t seed, double tail_frac = 0.005);

struct mc_curve {
    std::vector<double> t_s;
    std::vector<double> intensity;
    std::vector<double> std_err;
    std::size_t n_samples = 0;
};

// echo intensity <cos Phi> on an ascending time grid; every sample uses its
// own RNG stream derived from the ensemble seed, and the reduction uses
// compensated summation, so results are bit-identical for a given seed
mc_curve mc_echo(const fluctuator_ensemble& ens, const std::vector<double>& t_grid_s);

// evenly spaced sampling window (t_max/n, 2 t_max/n, ..., t_max) with
// t_max = 20/kappa, the window used for all crossover validations
std::vector<double> oracle_time_grid(double kappa_hz, int n_points = 40);

// paired estimate of ln I at the ensemble radius and at twice that radius,
// drawn from the same site realisations (direct truncation-error check)
struct radius_doubling_result {
    double ln_i_inner = 0.0;
    double ln_i_doubled = 0.0;
    double sigma_diff = 0.0;  // standard error of the paired ln I difference
};
radius_doubling_result mc_radius_doubling(const fluctuator_ensemble& ens, double t_s);

// Short-branch timescale convention when refitting the crossover shape:
// n_scaled uses the T_s(N) of the sequence itself, hahn pins T_s to the
// N = 1 value for every N (the convention behind the gamma = 3 beta table).
enum class refit_scale { n_scaled, hahn };

// least-squares fit, in ln I, of the crossover interpolant's beta to a
// sampled curve; grid points whose intensity is below three standard errors
// are dropped.  beta is bracketed in [0.1, 3].
double fit_crossover_beta(const mc_curve& curve, const dephasing_channel& ch,
                          int n_pulses, refit_scale scale = refit_scale::n_scaled);

struct beta_refit_result {
    double beta = 0.0;
    mc_curve curve;
};

// sample the channel over the oracle window and refit the crossover beta
beta_refit_result beta_refit(const dephasing_channel& ch, int n_pulses,
                             std::size_t n_samples, std::uint64_t seed,
                             refit_scale scale = refit_scale::n_scaled);

} // namespace echosim

#endif
