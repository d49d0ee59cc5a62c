#ifndef ECHOSIM_CONSTANTS_HPP
#define ECHOSIM_CONSTANTS_HPP

namespace echosim {
namespace phys {

// SI values (CODATA 2018). Energies are handled as ordinary frequencies (Hz)
// throughout the library; angular frequencies appear only where a formula
// genuinely needs them and are converted locally with two_pi.
inline constexpr double two_pi = 6.283185307179586476925286766559;
inline constexpr double pi = 3.141592653589793238462643383279;
inline constexpr double euler_e = 2.718281828459045235360287471353;

inline constexpr double planck_j_s = 6.62607015e-34;
inline constexpr double mu0_si = 1.25663706212e-6;            // vacuum permeability
inline constexpr double bohr_magneton_j_per_t = 9.2740100783e-24;
inline constexpr double nuclear_magneton_j_per_t = 5.0507837461e-27;

inline constexpr double bohr_magneton_hz_per_t = bohr_magneton_j_per_t / planck_j_s;
inline constexpr double nuclear_magneton_hz_per_t = nuclear_magneton_j_per_t / planck_j_s;

// 19F nuclear moment 2.6289 mu_N; with I = 1/2 the Larmor frequency is
// 2 * mu_F * B / h, i.e. g_F = 2 * 2.6289 in the omega_F = g_F mu_N B_z convention.
inline constexpr double fluorine_g = 2.0 * 2.6289;
inline constexpr double fluorine_moment_j_per_t = 2.6289 * nuclear_magneton_j_per_t;

// FWHM = 2 sqrt(2 ln 2) sigma for a Gaussian.
inline constexpr double fwhm_over_sigma = 2.3548200450309493;

} // namespace phys
} // namespace echosim

#endif
