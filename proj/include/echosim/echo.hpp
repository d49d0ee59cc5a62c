#ifndef ECHOSIM_ECHO_HPP
#define ECHOSIM_ECHO_HPP

#include "echosim/kernels.hpp"
#include "echosim/levels.hpp"
#include "echosim/material.hpp"
#include "echosim/rates.hpp"

#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace echosim {

// N-pulse CPMG detection block: pi pulses at (2j-1) tau, echo read at
// t = 2 N tau.  probe_frequency_hz is the offset of the probed line from the
// clock-branch single-ion line (0 for singles, the pair detuning otherwise).
struct pulse_sequence {
    int n_pulses = 1;
    double total_time_s = 0.0;
    double probe_frequency_hz = 0.0;
    double b_z_t = 0.0;

    double tau_s() const { return total_time_s / (2.0 * n_pulses); }
    void validate() const;
};

// what kind of coherence the sequence interrogates
enum class probe_regime { single, loose_pair, nnn_pair };
const char* regime_name(probe_regime r);
probe_regime regime_from_name(const std::string& name);

// Decoherence channels contributed by one hyperfine branch of the dopant
// bath.  ring is the gamma = 6 ring-exchange channel (pair probes only),
// magnetic the gamma = 3 dipolar-field channel; tau_s / t1 parameterise
// direct decay of the probed coherence via flip-flops with this branch.
struct tb_species_model {
    double iz = -1.5;
    dephasing_channel ring;
    dephasing_channel magnetic;
    double tau_s_s = std::numeric_limits<double>::infinity();
    double t1_s = std::numeric_limits<double>::infinity();
};

struct echo_model_config {
    material_params material;
    fluorine_model fluorine;
    probe_regime regime = probe_regime::nnn_pair;
    double probe_iz = -1.5;
    std::vector<tb_species_model> species;
    double i0 = 1.0;
    double c_off = 0.0;
    bool include_mims = true;

    void validate() const;
};

// Suppression from one bath branch: min[I_dec, I_ring, I_magn].  The decay
// factor uses exp(-t/(tau_s + sqrt(t T1))) for single probes and the pure
// rate-averaged exp(-sqrt(t/T1)) for pair probes; the dephasing factors are
// the short/long crossover kernels of the two channels.
double tb_suppression(const echo_model_config& cfg, const pulse_sequence& seq,
                      const tb_species_model& sp, double t_s);

// fluorine factor of the configured regime: 16-site telegraph product for
// tight pairs, stretched exponential for loose pairs, 1 for single probes
// (the clock ion's moment suppresses its fluorine coupling)
double fluorine_suppression(const echo_model_config& cfg, double t_s, int n_pulses);

// I0 * I_mims * I_F * prod_Iz I_Tb,Iz + c_off.  Branch factors are multiplied
// in ascending-iz order so the result is independent of the species list
// order; t = 0 returns exactly i0 + c_off.
double compose_echo(const echo_model_config& cfg, const pulse_sequence& seq,
                    double t_s);

// Measured or synthesised echo trace plus the context needed to model it.
struct trace_metadata {
    double probe_frequency_hz = 0.0;
    double b_z_t = 0.0;
    double abundance_x = 1.0e-3;
    int n_pulses = 1;
    probe_regime regime = probe_regime::nnn_pair;
};

struct echo_trace {
    std::vector<double> t_s;
    std::vector<double> intensity;
    std::vector<double> sigma;   // empty means unweighted
    trace_metadata meta;

    void validate() const;
};

// log-spaced detection times, 64 points per decade by default
std::vector<double> log_time_grid(double t_min_s = 1e-8, double t_max_s = 1e-4,
                                  int points_per_decade = 64);

// model curve on the grid plus Gaussian noise of the given sigma
echo_trace synthesize_trace(const echo_model_config& cfg, const trace_metadata& meta,
                            const std::vector<double>& grid, double noise_sigma,
                            std::uint64_t seed);

// ---- stretched-exponential trace fits ----------------------------------

struct stretched_fit_options {
    double beta_fixed = 0.0;  // > 0 holds the exponent at this value
    bool fit_offset = true;   // include the constant background c_off
    bool log_space = false;   // fit ln I instead of I (offset forced to 0)
    double beta_min = 0.1;
    double beta_max = 3.0;
};

struct stretched_fit_result {
    double t_char_s = 0.0;
    double beta = 0.0;
    double i0 = 0.0;
    double c_off = 0.0;
    double t_char_err = 0.0;
    double beta_err = 0.0;
    double i0_err = 0.0;
    double c_off_err = 0.0;
    double residual = 0.0;    // weighted sum of squares at the optimum
    int evaluations = 0;
    bool converged = false;
};

// Fit I(t) = i0 exp(-(t/T)^beta) + c_off.  The amplitude parameters are
// profiled linearly at each (T, beta); the nonlinear pair is optimised over
// (ln T, beta) from a 1/e-crossing / two-point-slope start.  Parameter
// uncertainties come from the linearised (J^T W J)^{-1} covariance, scaled
// by the residual variance when the trace carries no sigmas.
stretched_fit_result stretched_exp_fit(const echo_trace& trace,
                                       const stretched_fit_options& opts = {});

// ---- pair Rabi response -------------------------------------------------

// Driven pair signal averaged over the inhomogeneous detuning distribution:
//   I(t_p) = (1/2) < (Omega/omega) sin(omega t_p) >,  omega^2 = Omega^2 + dw^2,
// dw Gaussian with sd 2 pi w_pair_hz.  Frequencies are ordinary Hz; phases
// use the angular values internally.  w_pair -> 0 gives (1/2) sin(Omega t).
struct rabi_config {
    double rabi_hz = 0.0;
    double w_pair_hz = 0.0;
    double pulse_s = 0.0;
};
double rabi_pair(const rabi_config& rc);

// ---- abundance trade-off ------------------------------------------------

// Calibrated coherence times at a reference doping: single-ion T2 scales as
// 1/x (dipolar rates linear in density), tight-pair T2 as 1/x^3 (ring
// exchange, quadratic in density, times the linear flip rate).
struct abundance_reference {
    double x_ref = 1.0e-3;
    double t2_single_s = 0.0;
    double t2_pair_s = 0.0;
};

struct abundance_result {
    double x_single = 0.0;         // doping that reaches the target with singles
    double x_pair = 0.0;           // doping that reaches it with tight pairs
    double qubit_density_ratio = 0.0; // (pair qubit density) / (single qubit density)
};

// Rejects targets shorter than the calibration times: reaching those would
// need dopings above the reference where the scaling laws are not validated.
abundance_result abundance_tradeoff(double target_t2_s, const abundance_reference& ref);

// ---- calibrated bath couplings and the model builder --------------------

// Typical coupling times hbar/Vbar of the four bath branches (ascending iz)
// to a probed pair at the reference doping.  Ring entries scale with x^2
// (second order in the bath density), magnetic entries with x.
struct pair_coupling_times {
    std::array<double, 4> ring_s{};
    std::array<double, 4> magnetic_s{};
    double x_ref = 1.0e-3;
    double detune_hz = 0.0;   // probed-line offset from the clock branch line
};
pair_coupling_times nnn_coupling_times();
pair_coupling_times loose_coupling_times();

// Assemble the full echo model for one trace: bath flip rates from the
// resonance-counting law, channel amplitudes from the calibrated coupling
// tables (pair probes) or the probe's diagonal moment (singles), decay times
// from the disordered golden rule.  Pass rate overrides to pin the branch
// flip rates instead of computing them from (dis, rp).
echo_model_config build_echo_model(const material_params& m, const fluorine_model& f,
                                   const disorder_model& dis, const rate_params& rp,
                                   const trace_metadata& meta,
                                   const std::array<double, 4>* kappa_override_hz = nullptr);

} // namespace echosim

#endif
