#ifndef ECHOSIM_LEVELS_HPP
#define ECHOSIM_LEVELS_HPP

#include "echosim/material.hpp"

#include <array>

namespace echosim {

// One electro-nuclear TLS branch: tunnel splitting Delta, longitudinal bias
// h = (g mu_B / 2) B_z + (A / 2) I_z + dh, transition energy sqrt(Delta^2 + h^2).
struct level_state {
    double iz = 0.0;       // nuclear projection, one of +-1/2, +-3/2
    double h_hz = 0.0;     // longitudinal bias
    double energy_hz = 0.0;// doublet splitting
    double m_off = 0.0;    // off-diagonal moment fraction Delta / sqrt(Delta^2 + h^2)
    double m_diag = 0.0;   // diagonal moment fraction |h| / sqrt(Delta^2 + h^2)
};

// valid I_z values for the I = 3/2 nucleus
constexpr std::array<double, 4> iz_values = {-1.5, -0.5, 0.5, 1.5};
void validate_iz(double iz);

double transverse_bias_hz(const material_params& m, double iz, double bz_t, double dh_hz = 0.0);
double level_energy_hz(const material_params& m, double iz, double bz_t, double dh_hz = 0.0);
level_state level_at(const material_params& m, double iz, double bz_t, double dh_hz = 0.0);

// Field that cancels the hyperfine bias of branch iz: B = -A I_z / (g mu_B).
double clock_field_t(const material_params& m, double iz);

// Ising dipole coupling J(r) = J0 (1 - 3 cos^2 theta) / r^3 (Hz); rejects r <= 0.
double dipolar_coupling_hz(const material_params& m, double r_m, double cos_theta);

// Two identical ions with Ising coupling j_pair and exchange j_ex.  The probed
// transition runs from the pair ground state to the symmetric one-flip state
// (Delta + J_pair + J_ex for Delta >> J); energies are exact 4x4 results.
struct pair_spectrum {
    std::array<double, 4> energies_hz{};  // ascending
    double probed_transition_hz = 0.0;
    double pair_moment_hz_per_t = 0.0;    // d(probed)/dB_z, central difference
};
pair_spectrum pair_levels(const material_params& m, double iz, double bz_t,
                          double j_pair_hz, double j_ex_hz, double dh_hz = 0.0);

// Second-order shift of the probed pair transition from a spectator TLS
// coupled by flip-flop amplitudes j13, j23: the transition moves by -+2V when
// the spectator is up/down (V in the +-1/2 pseudo-spin convention).
// delta_pair is the single-ion splitting of the pair members, delta3 the
// spectator splitting, excited_fraction the spectator thermal occupation.
// Requires the perturbative regime |denominator| >= 10 max(|j13|, |j23|).
double ring_exchange_v_hz(double j13_hz, double j23_hz, double delta_pair_hz,
                          double j_pair_hz, double delta3_hz,
                          double excited_fraction = 0.0);

// Full 8x8 diagonalization of the probed pair + spectator problem:
// H = (dp/2)(sx1 + sx2) + (d3/2) sx3 + jp sz1 sz2 + j13 sz1 sz3 + j23 sz2 sz3
// (Pauli operators, energies in Hz, pair members at their clock field).
// Returns the conditioned pair-transition splitting f(spectator excited) -
// f(spectator ground); its magnitude approaches 4|V| of ring_exchange_v_hz
// deep in the perturbative regime.
double three_site_splitting_hz(double delta_pair_hz, double j_pair_hz, double delta3_hz,
                               double j13_hz, double j23_hz);

} // namespace echosim

#endif
