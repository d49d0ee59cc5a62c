#include "echosim/material.hpp"
#include "echosim/errors.hpp"

#include <cmath>

namespace echosim {

double material_params::j_typ_hz() const {
    const double geom = 8.0 * phys::pi / (9.0 * std::sqrt(3.0));
    return geom * species_density_m3() * j0_hz_m3();
}

void material_params::validate() const {
    if (!(delta_hz > 0)) throw validation_error("material: delta_hz must be positive");
    if (!(g_par > 0)) throw validation_error("material: g_par must be positive");
    if (!(hyperfine_a_hz > 0)) throw validation_error("material: hyperfine_a_hz must be positive");
    if (!(lattice_a_m > 0) || !(lattice_c_m > 0))
        throw validation_error("material: lattice constants must be positive");
    if (ions_per_cell <= 0) throw validation_error("material: ions_per_cell must be positive");
    if (!(dopant_fraction > 0) || dopant_fraction > 1.0)
        throw validation_error("material: dopant_fraction must be in (0, 1]");
}

material_params material_from_config(const config_map& cfg) {
    material_params m;
    m.delta_hz = cfg.get_double_or("material", "delta_hz", m.delta_hz);
    m.g_par = cfg.get_double_or("material", "g_par", m.g_par);
    m.hyperfine_a_hz = cfg.get_double_or("material", "hyperfine_a_hz", m.hyperfine_a_hz);
    m.dopant_fraction = cfg.get_double_or("material", "dopant_fraction", m.dopant_fraction);
    m.lattice_a_m = cfg.get_double_or("lattice", "a_m", m.lattice_a_m);
    m.lattice_c_m = cfg.get_double_or("lattice", "c_m", m.lattice_c_m);
    if (cfg.has("lattice", "ions_per_cell"))
        m.ions_per_cell = cfg.get_int("lattice", "ions_per_cell");
    m.bohr_magneton_j_per_t =
        cfg.get_double_or("constants", "bohr_magneton_j_per_t", m.bohr_magneton_j_per_t);
    m.nuclear_magneton_j_per_t =
        cfg.get_double_or("constants", "nuclear_magneton_j_per_t", m.nuclear_magneton_j_per_t);
    m.vacuum_permeability =
        cfg.get_double_or("constants", "vacuum_permeability", m.vacuum_permeability);
    m.fluorine_g = cfg.get_double_or("constants", "fluorine_g", m.fluorine_g);
    m.validate();
    return m;
}

} // namespace echosim
