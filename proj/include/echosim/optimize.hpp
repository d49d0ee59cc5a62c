#ifndef ECHOSIM_OPTIMIZE_HPP
#define ECHOSIM_OPTIMIZE_HPP

#include <functional>
#include <vector>

namespace echosim {

// Golden-section search for the minimum of a unimodal function on [a, b].
double golden_section_min(const std::function<double(double)>& f, double a, double b,
                          double xtol);

// Brent's method (golden section + parabolic steps) for a 1-d minimum.
struct brent_result {
    double x = 0.0;
    double fx = 0.0;
    int iterations = 0;
};
brent_result brent_min(const std::function<double(double)>& f, double a, double b,
                       double xtol = 1e-10, int max_iter = 200);

// Nelder-Mead downhill simplex.
struct simplex_options {
    double xtol = 1e-8;     // simplex size tolerance
    double ftol = 1e-10;    // spread of function values
    int max_evals = 4000;
    double initial_step = 0.1; // relative step used to build the start simplex
};
struct simplex_result {
    std::vector<double> x;
    double fx = 0.0;
    int evaluations = 0;
    bool converged = false;
};
simplex_result nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                           const std::vector<double>& x0,
                           const simplex_options& opts = {});

} // namespace echosim

#endif
