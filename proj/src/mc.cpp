#include "echosim/mc.hpp"
#include "echosim/constants.hpp"
#include "echosim/errors.hpp"
#include "echosim/optimize.hpp"
#include "echosim/rng.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace echosim {

namespace {

bool is_gamma6(double gamma) { return std::abs(gamma - 6.0) < 0.5; }
bool is_gamma3(double gamma) { return std::abs(gamma - 3.0) < 0.5; }

// mean of g(c)^2 over cos theta for the built-in angular patterns
double mean_g_squared(double gamma) {
    if (is_gamma3(gamma)) return 4.0 / 5.0;    // <(1-3c^2)^2>
    if (is_gamma6(gamma)) return 48.0 / 35.0;  // <(1-3c^2)^4>
    throw validation_error("make_ensemble: no angular pattern for gamma = " +
                           std::to_string(gamma));
}

// CPMG pulse positions as fractions of the total time, plus the endpoint.
// The filter f alternates sign across them, so the phase reduces to the
// boundary combination  (-1)^N A(t) + 2 sum_j (-1)^{j-1} A(x_j t)  of the
// telegraph antiderivative A(x) = int_0^x s dt'.
struct echo_boundaries {
    std::vector<double> frac;  // (2j-1)/2N for j = 1..N, then 1
    std::vector<double> coef;  // 2 (-1)^{j-1}, then (-1)^N
};

echo_boundaries make_boundaries(int n_pulses) {
    echo_boundaries b;
    b.frac.resize(static_cast<std::size_t>(n_pulses) + 1);
    b.coef.resize(static_cast<std::size_t>(n_pulses) + 1);
    for (int j = 1; j <= n_pulses; ++j) {
        b.frac[j - 1] = (2.0 * j - 1.0) / (2.0 * n_pulses);
        b.coef[j - 1] = (j % 2 == 1) ? 2.0 : -2.0;
    }
    b.frac[n_pulses] = 1.0;
    b.coef[n_pulses] = (n_pulses % 2 == 0) ? 1.0 : -1.0;
    return b;
}

// One fluctuator's telegraph history: flip times and the antiderivative A at
// each flip, built once and then queried at the (monotone) echo boundaries.
struct telegraph_path {
    std::vector<double> flips;
    std::vector<double> a_at_flip;
    double s0 = 1.0;

    void draw(rng_stream& rng, double kappa_hz, double t_max_s) {
        flips.clear();
        a_at_flip.clear();
        s0 = (rng.next_u64() & 1ULL) ? 1.0 : -1.0;
        if (kappa_hz <= 0.0) return;
        double a = 0.0, prev = 0.0, slope = s0;
        double t = rng.exponential(kappa_hz);
        while (t <= t_max_s) {
            a += slope * (t - prev);
            flips.push_back(t);
            a_at_flip.push_back(a);
            prev = t;
            slope = -slope;
            t += rng.exponential(kappa_hz);
        }
    }

    // A(x) given the index k = number of flips <= x (maintained by caller)
    double antiderivative(double x, std::size_t k) const {
        if (k == 0) return s0 * x;
        const double slope = (k & 1ULL) ? -s0 : s0;  // state after k flips
        return a_at_flip[k - 1] + slope * (x - flips[k - 1]);
    }
};

struct kahan_sum {
    double sum = 0.0;
    double comp = 0.0;
    void add(double x) {
        const double y = x - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
};

double site_coupling(const dephasing_channel& ch, bool gamma6, double r, double c) {
    const double g1 = 1.0 - 3.0 * c * c;
    const double g = gamma6 ? g1 * g1 : g1;
    const double r3 = r * r * r;
    const double rg = gamma6 ? r3 * r3 : r3;
    return 2.0 * ch.v0 * g / rg;  // angular phase rate of the probed coherence
}

} // namespace

fluctuator_ensemble make_ensemble(const dephasing_channel& ch, int n_pulses,
                                  double t_max_s, std::size_t n_samples,
                                  std::uint64_t seed, double tail_frac) {
    ch.validate();
    if (n_pulses < 1) throw validation_error("make_ensemble: n_pulses must be >= 1");
    if (!(t_max_s > 0)) throw validation_error("make_ensemble: t_max must be positive");
    if (!(tail_frac > 0)) throw validation_error("make_ensemble: tail_frac must be positive");
    if (!(ch.n_m3 > 0)) throw validation_error("make_ensemble: channel density must be positive");

    fluctuator_ensemble ens;
    ens.channel = ch;
    ens.n_pulses = n_pulses;
    ens.t_max_s = t_max_s;
    ens.seed = seed;
    ens.n_samples = n_samples;

    const double g2 = mean_g_squared(ch.gamma);
    if (ch.v0 <= 0.0 || ch.kappa_hz <= 0.0) {
        // intensity is exactly 1 whatever the radius; keep a small ball
        ens.mean_count = 64.0;
        ens.radius_m = std::cbrt(3.0 * ens.mean_count / (2.0 * phys::two_pi * ch.n_m3));
        ens.tail_bound = 0.0;
        return ens;
    }

    // weak-coupling filtered variance per squared phase rate, short/long envelope
    const double f_short = (2.0 / 3.0) * ch.kappa_hz * t_max_s * t_max_s * t_max_s /
                           (static_cast<double>(n_pulses) * n_pulses);
    const double f_long = t_max_s / (2.0 * ch.kappa_hz);
    const double filt = std::min(f_short, f_long);

    // predicted decay depth at t_max, floored so shallow windows keep a margin
    const double es = std::pow(t_max_s / t_short(ch, n_pulses), 1.0 + 3.0 / ch.gamma);
    const double el = std::pow(t_max_s / t_long(ch), 3.0 / (2.0 * ch.gamma));
    const double ln_ref = std::max(0.05, std::min(es, el));

    const double p = 2.0 * ch.gamma - 3.0;
    const double num = 1.5 * 4.0 * phys::two_pi * ch.n_m3 * g2 * ch.v0 * ch.v0 * filt;
    ens.radius_m = std::pow(num / (p * tail_frac * ln_ref), 1.0 / p);
    ens.mean_count = (2.0 * phys::two_pi / 3.0) * ch.n_m3 * std::pow(ens.radius_m, 3.0);
    ens.tail_bound = (num / 1.5) * std::pow(ens.radius_m, -p) / p;
    return ens;
}

std::vector<double> oracle_time_grid(double kappa_hz, int n_points) {
    if (!(kappa_hz > 0)) throw validation_error("oracle_time_grid: kappa must be positive");
    if (n_points < 2) throw validation_error("oracle_time_grid: n_points must be >= 2");
    const double t_max = 20.0 / kappa_hz;
    std::vector<double> grid(static_cast<std::size_t>(n_points));
    for (int i = 0; i < n_points; ++i)
        grid[static_cast<std::size_t>(i)] = t_max * (i + 1) / n_points;
    return grid;
}

mc_curve mc_echo(const fluctuator_ensemble& ens, const std::vector<double>& t_grid_s) {
    ens.channel.validate();
    if (ens.n_pulses < 1) throw validation_error("mc_echo: n_pulses must be >= 1");
    if (ens.n_samples < 1) throw validation_error("mc_echo: n_samples must be >= 1");
    if (!(ens.radius_m > 0) || !(ens.mean_count > 0))
        throw validation_error("mc_echo: ensemble radius not set (use make_ensemble)");
    if (t_grid_s.empty()) throw validation_error("mc_echo: time grid is empty");
    for (std::size_t i = 0; i < t_grid_s.size(); ++i) {
        if (!(t_grid_s[i] >= 0)) throw validation_error("mc_echo: grid times must be >= 0");
        if (i > 0 && !(t_grid_s[i] > t_grid_s[i - 1]))
            throw validation_error("mc_echo: time grid must be strictly ascending");
    }

    const dephasing_channel& ch = ens.channel;
    const bool gamma6 = is_gamma6(ch.gamma);
    if (!gamma6 && !is_gamma3(ch.gamma))
        throw validation_error("mc_echo: no angular pattern for gamma = " +
                               std::to_string(ch.gamma));

    const std::size_t n_grid = t_grid_s.size();
    const double t_max = t_grid_s.back();
    const echo_boundaries bd = make_boundaries(ens.n_pulses);
    const std::size_t n_b = bd.frac.size();

    std::vector<kahan_sum> acc(n_grid), acc2(n_grid);
    std::vector<double> phi(n_grid);
    std::vector<std::size_t> ptr(n_b);
    telegraph_path path;

    for (std::size_t s = 0; s < ens.n_samples; ++s) {
        rng_stream rng = stream_for(ens.seed, s);
        const int count = rng.poisson(ens.mean_count);
        std::fill(phi.begin(), phi.end(), 0.0);
        for (int i = 0; i < count; ++i) {
            double u;
            do {
                u = rng.uniform();
            } while (u <= 0.0);
            const double r = ens.radius_m * std::cbrt(u);
            const double c = rng.uniform(-1.0, 1.0);
            const double v = site_coupling(ch, gamma6, r, c);
            path.draw(rng, ch.kappa_hz, t_max);
            // boundary positions scale linearly with t, so each boundary's
            // flip pointer advances monotonically across the ascending grid
            std::fill(ptr.begin(), ptr.end(), std::size_t{0});
            const std::size_t n_flips = path.flips.size();
            for (std::size_t g = 0; g < n_grid; ++g) {
                const double t = t_grid_s[g];
                double combo = 0.0;
                for (std::size_t j = 0; j < n_b; ++j) {
                    const double x = bd.frac[j] * t;
                    std::size_t k = ptr[j];
                    while (k < n_flips && path.flips[k] <= x) ++k;
                    ptr[j] = k;
                    combo += bd.coef[j] * path.antiderivative(x, k);
                }
                phi[g] += v * combo;
            }
        }
        for (std::size_t g = 0; g < n_grid; ++g) {
            const double cv = std::cos(phi[g]);
            acc[g].add(cv);
            acc2[g].add(cv * cv);
        }
    }

    mc_curve out;
    out.t_s = t_grid_s;
    out.n_samples = ens.n_samples;
    out.intensity.resize(n_grid);
    out.std_err.resize(n_grid);
    const double n = static_cast<double>(ens.n_samples);
    for (std::size_t g = 0; g < n_grid; ++g) {
        const double mean = acc[g].sum / n;
        const double var = std::max(0.0, acc2[g].sum / n - mean * mean);
        out.intensity[g] = mean;
        out.std_err[g] = ens.n_samples > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
    }
    return out;
}

radius_doubling_result mc_radius_doubling(const fluctuator_ensemble& ens, double t_s) {
    ens.channel.validate();
    if (!(t_s > 0)) throw validation_error("mc_radius_doubling: t must be positive");
    if (!(ens.radius_m > 0))
        throw validation_error("mc_radius_doubling: ensemble radius not set");
    const dephasing_channel& ch = ens.channel;
    const bool gamma6 = is_gamma6(ch.gamma);
    if (!gamma6 && !is_gamma3(ch.gamma))
        throw validation_error("mc_radius_doubling: no angular pattern for gamma = " +
                               std::to_string(ch.gamma));

    const double r2 = 2.0 * ens.radius_m;
    const double mean_count = 8.0 * ens.mean_count;
    const echo_boundaries bd = make_boundaries(ens.n_pulses);
    const std::size_t n_b = bd.frac.size();

    kahan_sum sum_in, sum_full, sum_d, sum_d2;
    telegraph_path path;
    // separate stream family from mc_echo so paired runs stay independent
    const std::uint64_t seed = ens.seed ^ 0x5bf0fd1dd0aa5306ULL;

    for (std::size_t s = 0; s < ens.n_samples; ++s) {
        rng_stream rng = stream_for(seed, s);
        const int count = rng.poisson(mean_count);
        double phi_in = 0.0, phi_full = 0.0;
        for (int i = 0; i < count; ++i) {
            double u;
            do {
                u = rng.uniform();
            } while (u <= 0.0);
            const double r = r2 * std::cbrt(u);
            const double c = rng.uniform(-1.0, 1.0);
            const double v = site_coupling(ch, gamma6, r, c);
            path.draw(rng, ch.kappa_hz, t_s);
            double combo = 0.0;
            for (std::size_t j = 0; j < n_b; ++j) {
                const double x = bd.frac[j] * t_s;
                const std::size_t k = static_cast<std::size_t>(
                    std::upper_bound(path.flips.begin(), path.flips.end(), x) -
                    path.flips.begin());
                combo += bd.coef[j] * path.antiderivative(x, k);
            }
            const double dphi = v * combo;
            phi_full += dphi;
            if (r < ens.radius_m) phi_in += dphi;  // inner sites are a Poisson
                                                   // thinning at the same density
        }
        const double ci = std::cos(phi_in);
        const double cf = std::cos(phi_full);
        sum_in.add(ci);
        sum_full.add(cf);
        sum_d.add(cf - ci);
        sum_d2.add((cf - ci) * (cf - ci));
    }

    const double n = static_cast<double>(ens.n_samples);
    const double mi = sum_in.sum / n;
    const double mf = sum_full.sum / n;
    if (!(mi > 0) || !(mf > 0))
        throw convergence_error("mc_radius_doubling: intensity estimate not positive");
    const double md = sum_d.sum / n;
    const double vard = std::max(0.0, sum_d2.sum / n - md * md);
    radius_doubling_result out;
    out.ln_i_inner = std::log(mi);
    out.ln_i_doubled = std::log(mf);
    out.sigma_diff = std::sqrt(vard / (n - 1.0)) / std::min(mi, mf);
    return out;
}

double fit_crossover_beta(const mc_curve& curve, const dephasing_channel& ch,
                          int n_pulses, refit_scale scale) {
    ch.validate();
    if (n_pulses < 1) throw validation_error("fit_crossover_beta: n_pulses must be >= 1");
    const double ts = t_short(ch, scale == refit_scale::hahn ? 1 : n_pulses);
    const double tl = t_long(ch);
    if (std::isinf(ts) || std::isinf(tl))
        throw validation_error("fit_crossover_beta: channel has no decay to fit");

    std::vector<double> t_fit, ln_fit;
    for (std::size_t i = 0; i < curve.t_s.size(); ++i) {
        const double I = curve.intensity[i];
        if (curve.t_s[i] <= 0.0) continue;
        if (!(I > 0.0) || I <= 3.0 * curve.std_err[i]) continue;
        t_fit.push_back(curve.t_s[i]);
        ln_fit.push_back(std::log(I));
    }
    if (t_fit.size() < 3)
        throw convergence_error("fit_crossover_beta: fewer than 3 usable grid points");

    const auto sse = [&](double beta) {
        double acc = 0.0;
        for (std::size_t i = 0; i < t_fit.size(); ++i) {
            const double model =
                -crossover_exponent_scales(t_fit[i], ch.gamma, ts, tl, beta);
            const double d = model - ln_fit[i];
            acc += d * d;
        }
        return acc;
    };
    return brent_min(sse, 0.1, 3.0, 1e-6).x;
}

beta_refit_result beta_refit(const dephasing_channel& ch, int n_pulses,
                             std::size_t n_samples, std::uint64_t seed,
                             refit_scale scale) {
    ch.validate();
    if (!(ch.kappa_hz > 0))
        throw validation_error("beta_refit: channel kappa must be positive");
    const std::vector<double> grid = oracle_time_grid(ch.kappa_hz);
    const fluctuator_ensemble ens =
        make_ensemble(ch, n_pulses, grid.back(), n_samples, seed);
    beta_refit_result out;
    out.curve = mc_echo(ens, grid);
    out.beta = fit_crossover_beta(out.curve, ch, n_pulses, scale);
    return out;
}

} // namespace echosim
