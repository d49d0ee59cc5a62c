#ifndef ECHOSIM_QUADRATURE_HPP
#define ECHOSIM_QUADRATURE_HPP

#include <functional>

namespace echosim {

struct quad_result {
    double value = 0.0;
    double error = 0.0; // absolute error estimate
    int evaluations = 0;
};

// 15-point Gauss-Kronrod rule on [a, b] with embedded 7-point Gauss error estimate.
quad_result gauss_kronrod_15(const std::function<double(double)>& f, double a, double b);

// Adaptive bisection on top of the 15-point rule.  Stops when the summed
// error estimate satisfies err <= max(atol, rtol * |value|); throws
// convergence_error if the interval budget is exhausted first.
quad_result integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                               double rtol = 1e-9, double atol = 0.0,
                               int max_intervals = 4000);

} // namespace echosim

#endif
