#include "echosim/levels.hpp"
#include "echosim/errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>

namespace echosim {

void validate_iz(double iz) {
    for (double v : iz_values)
        if (iz == v) return;
    throw validation_error("iz must be one of -1.5, -0.5, 0.5, 1.5 (got " +
                           std::to_string(iz) + ")");
}

double transverse_bias_hz(const material_params& m, double iz, double bz_t, double dh_hz) {
    validate_iz(iz);
    return m.half_moment_hz_per_t() * bz_t + 0.5 * m.hyperfine_a_hz * iz + dh_hz;
}

double level_energy_hz(const material_params& m, double iz, double bz_t, double dh_hz) {
    const double h = transverse_bias_hz(m, iz, bz_t, dh_hz);
    return std::hypot(m.delta_hz, h);
}

level_state level_at(const material_params& m, double iz, double bz_t, double dh_hz) {
    level_state s;
    s.iz = iz;
    s.h_hz = transverse_bias_hz(m, iz, bz_t, dh_hz);
    s.energy_hz = std::hypot(m.delta_hz, s.h_hz);
    s.m_off = m.delta_hz / s.energy_hz;
    s.m_diag = std::abs(s.h_hz) / s.energy_hz;
    return s;
}

double clock_field_t(const material_params& m, double iz) {
    validate_iz(iz);
    // zero of h: (g mu_B / 2) B = -(A / 2) I_z
    return -0.5 * m.hyperfine_a_hz * iz / m.half_moment_hz_per_t();
}

double dipolar_coupling_hz(const material_params& m, double r_m, double cos_theta) {
    if (!(r_m > 0)) throw validation_error("dipolar_coupling: r must be positive");
    if (std::abs(cos_theta) > 1.0)
        throw validation_error("dipolar_coupling: cos_theta outside [-1, 1]");
    return m.j0_hz_m3() * (1.0 - 3.0 * cos_theta * cos_theta) / (r_m * r_m * r_m);
}

pair_spectrum pair_levels(const material_params& m, double iz, double bz_t,
                          double j_pair_hz, double j_ex_hz, double dh_hz) {
    validate_iz(iz);
    auto solve = [&](double bz) {
        const double h = transverse_bias_hz(m, iz, bz, dh_hz);
        const double d = m.delta_hz;
        // z basis is the Ising (moment) basis.  The exchange term hops
        // tunnelling excitations, (J_ex/2)(s^z s^z + s^y s^y), which leaves the
        // pair ground state alone and puts the probed line at
        // Delta + J_pair + J_ex in the weak-coupling limit.  Exchange symmetry
        // splits the 4x4 into a symmetric 3x3 {|uu>, |dd>, S} plus the
        // antisymmetric state at -J_pair - J_ex.
        Eigen::Matrix3d hs;
        const double od = d / std::sqrt(2.0);
        const double jx2 = 0.5 * j_ex_hz;
        hs << h + j_pair_hz + jx2, -jx2, od,
              -jx2, -h + j_pair_hz + jx2, od,
              od, od, -j_pair_hz;
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(hs);
        const Eigen::Vector3d ev = es.eigenvalues();
        const Eigen::Matrix3d vec = es.eigenvectors();
        const double e_anti = -j_pair_hz - j_ex_hz;
        pair_spectrum ps;
        std::array<double, 4> all = {ev[0], ev[1], ev[2], e_anti};
        std::sort(all.begin(), all.end());
        ps.energies_hz = all;
        // probed excited state: largest overlap with (|uu> - |dd>)/sqrt(2),
        // which is the symmetric one-flip state in the tunnelling eigenbasis
        int best = 0;
        double best_ov = -1.0;
        for (int k = 0; k < 3; ++k) {
            const double ov = 0.5 * (vec(0, k) - vec(1, k)) * (vec(0, k) - vec(1, k));
            if (ov > best_ov) {
                best_ov = ov;
                best = k;
            }
        }
        ps.probed_transition_hz = ev[best] - all[0];
        return ps;
    };
    pair_spectrum ps = solve(bz_t);
    const double db = 1e-6; // 1 uT central difference
    ps.pair_moment_hz_per_t =
        (solve(bz_t + db).probed_transition_hz - solve(bz_t - db).probed_transition_hz) /
        (2.0 * db);
    return ps;
}

double ring_exchange_v_hz(double j13_hz, double j23_hz, double delta_pair_hz,
                          double j_pair_hz, double delta3_hz, double excited_fraction) {
    const double occ = 1.0 - 2.0 * excited_fraction;
    const double denom = (delta_pair_hz - occ * j_pair_hz) - delta3_hz;
    const double jmax = std::max(std::abs(j13_hz), std::abs(j23_hz));
    if (std::abs(denom) < 10.0 * jmax)
        throw validation_error("ring_exchange_v: detuning " + std::to_string(denom) +
                               " Hz is not perturbative against couplings " +
                               std::to_string(jmax) + " Hz");
    return occ * j13_hz * j23_hz / (2.0 * denom);
}

double three_site_splitting_hz(double delta_pair_hz, double j_pair_hz, double delta3_hz,
                               double j13_hz, double j23_hz) {
    if (!(delta_pair_hz > 0) || !(delta3_hz > 0))
        throw validation_error("three_site_splitting: tunnel splittings must be positive");
    using Mat8 = Eigen::Matrix<double, 8, 8>;
    Eigen::Matrix2d sx, sz, id;
    sx << 0, 1, 1, 0;
    sz << 1, 0, 0, -1;
    id.setIdentity();
    auto op3 = [&](const Eigen::Matrix2d& a, const Eigen::Matrix2d& b,
                   const Eigen::Matrix2d& c) -> Mat8 {
        Eigen::Matrix4d ab;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) ab.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
        Mat8 abc;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) abc.block<2, 2>(2 * i, 2 * j) = ab(i, j) * c;
        return abc;
    };
    Mat8 h = 0.5 * delta_pair_hz * (op3(sx, id, id) + op3(id, sx, id)) +
             0.5 * delta3_hz * op3(id, id, sx) + j_pair_hz * op3(sz, sz, id) +
             j13_hz * op3(sz, id, sz) + j23_hz * op3(id, sz, sz);
    Eigen::SelfAdjointEigenSolver<Mat8> es(h);

    // unperturbed targets: pair ground (symmetric-sector mixture), probed state
    // (uu - dd)/sqrt(2), spectator sx eigenstates
    const double r = std::hypot(j_pair_hz, delta_pair_hz);
    Eigen::Vector4d gp = Eigen::Vector4d::Zero(), probed;
    {
        // ground of [[jp, dp], [dp, -jp]] in the {(uu+dd), (ud+du)}/sqrt(2) basis
        const double c0 = delta_pair_hz, c1 = -(j_pair_hz + r);
        const double nrm = std::hypot(c0, c1);
        const double a = c0 / nrm, b = c1 / nrm;
        gp << a / std::sqrt(2.0), b / std::sqrt(2.0), b / std::sqrt(2.0), a / std::sqrt(2.0);
    }
    probed << 1.0 / std::sqrt(2.0), 0, 0, -1.0 / std::sqrt(2.0);
    Eigen::Vector2d spec_g(1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0));
    Eigen::Vector2d spec_e(1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0));

    auto locate = [&](const Eigen::Vector4d& pair, const Eigen::Vector2d& spec) {
        Eigen::Matrix<double, 8, 1> target;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 2; ++j) target(2 * i + j) = pair(i) * spec(j);
        int best = 0;
        double best_ov = -1.0;
        for (int k = 0; k < 8; ++k) {
            const double ov = std::abs(es.eigenvectors().col(k).dot(target));
            if (ov > best_ov) { best_ov = ov; best = k; }
        }
        if (best_ov < 0.8)
            throw validation_error("three_site_splitting: level identification ambiguous "
                                   "(max overlap " + std::to_string(best_ov) + ")");
        return es.eigenvalues()(best);
    };
    const double f_ground = locate(probed, spec_g) - locate(gp, spec_g);
    const double f_excited = locate(probed, spec_e) - locate(gp, spec_e);
    return f_excited - f_ground;
}

} // namespace echosim
