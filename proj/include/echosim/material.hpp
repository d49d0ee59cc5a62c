#ifndef ECHOSIM_MATERIAL_HPP
#define ECHOSIM_MATERIAL_HPP

#include "echosim/config.hpp"
#include "echosim/constants.hpp"

namespace echosim {

// Host / dopant parameters of the doped rare-earth fluoride.  All energies are
// ordinary frequencies (Hz), fields are tesla, lengths are metres.
struct material_params {
    double delta_hz = 27.8e9;       // tunnel splitting of the ground doublet
    double g_par = 17.40;           // Ising g-factor along c
    double hyperfine_a_hz = 6.21e9; // hyperfine constant A (I = 3/2)
    double lattice_a_m = 5.164e-10;
    double lattice_c_m = 10.741e-10;
    int ions_per_cell = 4;          // substitutional sites per unit cell
    double dopant_fraction = 1.0e-3;

    // physical constants, overridable from a [constants] section
    double bohr_magneton_j_per_t = phys::bohr_magneton_j_per_t;
    double nuclear_magneton_j_per_t = phys::nuclear_magneton_j_per_t;
    double vacuum_permeability = phys::mu0_si;
    double fluorine_g = phys::fluorine_g;

    double unit_cell_volume_m3() const {
        return lattice_a_m * lattice_a_m * lattice_c_m;
    }
    // all substitutional sites
    double site_density_m3() const {
        return ions_per_cell / unit_cell_volume_m3();
    }
    double dopant_density_m3() const { return dopant_fraction * site_density_m3(); }
    // density of one hyperfine species (I^z branch), 1/4 of the dopants
    double species_density_m3() const { return dopant_density_m3() / 4.0; }

    // half the doublet moment, as a frequency per field: g mu_B / 2h
    double half_moment_hz_per_t() const {
        return 0.5 * g_par * bohr_magneton_j_per_t / phys::planck_j_s;
    }
    double full_moment_hz_per_t() const { return 2.0 * half_moment_hz_per_t(); }

    // Ising dipole-dipole prefactor J0 = mu0 (g mu_B / 2)^2 / (4 pi h), Hz m^3:
    // J(r) = J0 (1 - 3 cos^2 theta) / r^3 couples sigma^z_i sigma^z_j.
    double j0_hz_m3() const {
        const double half_moment_j = 0.5 * g_par * bohr_magneton_j_per_t;
        return vacuum_permeability * half_moment_j * half_moment_j /
               (2.0 * phys::two_pi) / phys::planck_j_s;
    }

    // dopant-fluorine dipolar prefactor mu0 (g mu_B / 2) mu_F / (4 pi h), Hz m^3
    double jf0_hz_m3() const {
        const double half_moment_j = 0.5 * g_par * bohr_magneton_j_per_t;
        const double mu_f_j = 0.5 * fluorine_g * nuclear_magneton_j_per_t;
        return vacuum_permeability * half_moment_j * mu_f_j /
               (2.0 * phys::two_pi) / phys::planck_j_s;
    }

    // 19F Larmor frequency per field (ordinary Hz/T)
    double fluorine_larmor_hz_per_t() const {
        return fluorine_g * nuclear_magneton_j_per_t / phys::planck_j_s;
    }

    // typical dipolar coupling of one hyperfine species,
    // J_typ = (8 pi / 9 sqrt(3)) n_species J0
    double j_typ_hz() const;

    void validate() const; // throws validation_error naming the bad field
};

material_params material_from_config(const config_map& cfg);

} // namespace echosim

#endif
