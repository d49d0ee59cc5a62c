#include "echosim/optimize.hpp"
#include "echosim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace echosim {

double golden_section_min(const std::function<double(double)>& f, double a, double b,
                          double xtol) {
    const double inv_phi = 0.6180339887498949;
    double x1 = b - inv_phi * (b - a);
    double x2 = a + inv_phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    while (b - a > xtol) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    return 0.5 * (a + b);
}

brent_result brent_min(const std::function<double(double)>& f, double a, double b,
                       double xtol, int max_iter) {
    const double cgold = 0.3819660112501051;
    double x = a + cgold * (b - a), w = x, v = x;
    double fx = f(x), fw = fx, fv = fx;
    double d = 0.0, e = 0.0;
    brent_result res;
    for (int iter = 0; iter < max_iter; ++iter) {
        const double xm = 0.5 * (a + b);
        const double tol1 = xtol * std::abs(x) + 1e-300;
        const double tol2 = 2.0 * tol1;
        if (std::abs(x - xm) <= tol2 - 0.5 * (b - a)) {
            res.x = x;
            res.fx = fx;
            res.iterations = iter;
            return res;
        }
        bool golden = true;
        if (std::abs(e) > tol1) {
            // trial parabolic fit through x, v, w
            const double r = (x - w) * (fx - fv);
            double q = (x - v) * (fx - fw);
            double p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if (q > 0.0) p = -p;
            q = std::abs(q);
            const double etemp = e;
            e = d;
            if (std::abs(p) < std::abs(0.5 * q * etemp) && p > q * (a - x) && p < q * (b - x)) {
                d = p / q;
                const double u = x + d;
                if (u - a < tol2 || b - u < tol2) d = std::copysign(tol1, xm - x);
                golden = false;
            }
        }
        if (golden) {
            e = (x >= xm) ? a - x : b - x;
            d = cgold * e;
        }
        const double u = (std::abs(d) >= tol1) ? x + d : x + std::copysign(tol1, d);
        const double fu = f(u);
        if (fu <= fx) {
            if (u >= x) a = x; else b = x;
            v = w; w = x; x = u;
            fv = fw; fw = fx; fx = fu;
        } else {
            if (u < x) a = u; else b = u;
            if (fu <= fw || w == x) {
                v = w; fv = fw;
                w = u; fw = fu;
            } else if (fu <= fv || v == x || v == w) {
                v = u; fv = fu;
            }
        }
    }
    res.x = x;
    res.fx = fx;
    res.iterations = max_iter;
    return res;
}

simplex_result nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                           const std::vector<double>& x0, const simplex_options& opts) {
    const size_t n = x0.size();
    if (n == 0) throw validation_error("nelder_mead: empty start point");
    std::vector<std::vector<double>> pts(n + 1, x0);
    for (size_t i = 0; i < n; ++i) {
        double step = opts.initial_step * std::abs(x0[i]);
        if (step == 0.0) step = opts.initial_step;
        pts[i + 1][i] += step;
    }
    std::vector<double> fv(n + 1);
    int evals = 0;
    for (size_t i = 0; i <= n; ++i) {
        fv[i] = f(pts[i]);
        ++evals;
    }
    std::vector<size_t> order(n + 1);
    simplex_result res;
    while (evals < opts.max_evals) {
        std::iota(order.begin(), order.end(), size_t{0});
        std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return fv[a] < fv[b]; });
        const size_t best = order[0], worst = order[n], second = order[n - 1];
        // convergence: simplex extent and value spread
        double extent = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double lo = pts[0][i], hi = pts[0][i];
            for (size_t k = 1; k <= n; ++k) {
                lo = std::min(lo, pts[k][i]);
                hi = std::max(hi, pts[k][i]);
            }
            extent = std::max(extent, hi - lo);
        }
        if (extent < opts.xtol || std::abs(fv[worst] - fv[best]) < opts.ftol) {
            res.converged = true;
            break;
        }
        std::vector<double> centroid(n, 0.0);
        for (size_t k = 0; k <= n; ++k) {
            if (k == worst) continue;
            for (size_t i = 0; i < n; ++i) centroid[i] += pts[k][i];
        }
        for (double& c : centroid) c /= static_cast<double>(n);
        auto blend = [&](double t) {
            std::vector<double> p(n);
            for (size_t i = 0; i < n; ++i) p[i] = centroid[i] + t * (pts[worst][i] - centroid[i]);
            return p;
        };
        std::vector<double> xr = blend(-1.0);
        double fr = f(xr);
        ++evals;
        if (fr < fv[best]) {
            std::vector<double> xe = blend(-2.0);
            double fe = f(xe);
            ++evals;
            if (fe < fr) {
                pts[worst] = xe; fv[worst] = fe;
            } else {
                pts[worst] = xr; fv[worst] = fr;
            }
        } else if (fr < fv[second]) {
            pts[worst] = xr; fv[worst] = fr;
        } else {
            const bool outside = fr < fv[worst];
            std::vector<double> xc = blend(outside ? -0.5 : 0.5);
            double fc = f(xc);
            ++evals;
            if (fc < std::min(fr, fv[worst])) {
                pts[worst] = xc; fv[worst] = fc;
            } else {
                // shrink towards the best vertex
                for (size_t k = 0; k <= n; ++k) {
                    if (k == best) continue;
                    for (size_t i = 0; i < n; ++i)
                        pts[k][i] = pts[best][i] + 0.5 * (pts[k][i] - pts[best][i]);
                    fv[k] = f(pts[k]);
                    ++evals;
                }
            }
        }
    }
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return fv[a] < fv[b]; });
    res.x = pts[order[0]];
    res.fx = fv[order[0]];
    res.evaluations = evals;
    return res;
}

} // namespace echosim
