#ifndef ECHOSIM_FIT_HPP
#define ECHOSIM_FIT_HPP

#include "echosim/echo.hpp"

#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace echosim {

// ---- trace CSV IO -------------------------------------------------------

// Reads `t_s,intensity[,sigma]` rows (comment lines starting with '#' are
// skipped).  Malformed content is reported as file:line:column.  Metadata is
// not part of the CSV; fill trace.meta from the run manifest.
echo_trace read_trace_csv(const std::string& path);

// Writes the same layout; each comment line is prefixed with "# ".
void write_trace_csv(const std::string& path, const echo_trace& trace,
                     const std::vector<std::string>& comments = {});

// ---- nuclear-modulation filtering ---------------------------------------

// angular modulation frequencies of one fluorine shell
struct mims_frequencies {
    double w_plus_rad_s = 0.0;
    double w_minus_rad_s = 0.0;
};
mims_frequencies shell_frequencies(double nu_f_hz, double a_hz, double b_hz);

// modulation model with both shells' couplings scaled together and a free
// Larmor frequency; delta_e is the clock-field offset of the probed branch
double mims_model_envelope(const material_params& m, const fluorine_model& f,
                           double delta_e_hz, double nu_f_hz, double scale,
                           double t_s, int n_pulses);

struct mims_filter_result {
    std::vector<double> envelope;   // fitted modulation factor per point
    echo_trace demodulated;         // trace divided by the envelope
    double nu_f_hz = 0.0;           // fitted fluorine Larmor frequency
    double coupling_scale = 1.0;    // multiplier on the model couplings
    stretched_fit_result decay;     // the stretched-exponential factor
    bool degenerate = false;        // modulation below noise: unit envelope
    double residual = 0.0;
};

// Fits stretched exponential x modulation envelope with free (nu_F, coupling
// scale) and returns the envelope and the demodulated trace.  When the model
// modulation depth is below twice the noise level the fit is flagged
// degenerate and the envelope is identically 1.
mims_filter_result filter_mims(const echo_trace& trace, const material_params& m,
                               const fluorine_model& f);

// ---- field-swept coupling extraction ------------------------------------

// fixed shell coupling ratios used to constrain the per-field fits
struct mims_ratios {
    double a_nn_over_a_nnn = 0.677;
    double b_nn_over_b_nnn = 0.792;
    double a_over_b = 0.51;   // A_nn / B_nn
};

// two-shell envelope parameterised by B_nn alone through the fixed ratios
double mims_ratio_envelope(double nu_f_hz, double b_nn_hz, const mims_ratios& ratios,
                           double t_s, int n_pulses);

struct mims_coupling_point {
    double b_z_t = 0.0;
    double a_nn_hz = 0.0;
    double b_nn_hz = 0.0;   // reported as a magnitude
    double t_1e_s = 0.0;
    double residual = 0.0;
    bool valid = false;
};

struct mims_coupling_result {
    std::vector<mims_coupling_point> points;
    double slope_hz_per_t = 0.0;  // d|B_nn|/dB_z over the valid points
    mims_ratios ratios;
};

// Per-field-point fit of i0 exp(-t/T_1e) x ratio-constrained envelope; the
// coupling slope against B_z is taken over the valid points, which should
// therefore lie on one side of the clock field.
mims_coupling_result fit_mims_coupling(const std::vector<echo_trace>& traces,
                                       const material_params& m,
                                       const fluorine_model& f,
                                       const mims_ratios& ratios = {});

// ---- pair-peak disorder -------------------------------------------------

enum class pair_site_correlation { correlated, uncorrelated };

// FWHM of the pair excitation peak -> splitting disorder W_Delta: the peak
// width gives W_pair = FWHM / (2 sqrt(2 ln 2)); independent site strains add
// another sqrt(2).
double disorder_from_lineshape(double peak_fwhm_hz, pair_site_correlation corr);

// ---- global fit ---------------------------------------------------------

struct fit_state {
    double c1 = 0.41;
    double c2 = 1.67;
    double w_delta_at_ref_hz = 21.0e6;  // scaled with x/x_ref across traces
    double x_ref = 1.0e-3;
    fluorine_model fluorine;
    std::vector<std::array<double, 2>> nuisance;  // per-trace {i0, c_off}
    double residual_sum = std::numeric_limits<double>::infinity();
};

struct residual_cell {
    double c1 = 0.0;
    double c2 = 0.0;
    double w_delta_hz = 0.0;   // best splitting disorder for this cell
    double residual = std::numeric_limits<double>::infinity();
    bool valid = false;
};

struct residual_surface {
    std::vector<double> c1_values;
    std::vector<double> c2_values;
    std::vector<residual_cell> cells;  // row-major: [i_c1 * n_c2 + i_c2]
    std::size_t best_index = 0;

    const residual_cell& best() const { return cells[best_index]; }
};

struct scan_spec {
    std::vector<double> c1_values;
    std::vector<double> c2_values;
    double w_delta_lo_hz = 5.0e6;
    double w_delta_hi_hz = 60.0e6;
    double w_ln_xtol = 1.0e-3;     // Brent tolerance on ln W_Delta
    bool sigma_weighting = false;  // default: every point weighted equally
    int threads = 1;
};

struct global_fit_result {
    fit_state state;
    residual_surface surface;
    std::array<species_rate, 4> rates_at_ref{};  // at x_ref, clock field
};

// Sum over traces of the squared residuals against the composed echo model
// built for each trace's metadata, with per-trace (i0, c_off) profiled out
// linearly.  Fills nuisance when given.
double trace_set_residual(const std::vector<echo_trace>& traces,
                          const material_params& m, const fluorine_model& f,
                          const disorder_model& dis, const rate_params& rp,
                          bool sigma_weighting,
                          std::vector<std::array<double, 2>>* nuisance = nullptr);

// Grid scan over (c1, c2) with a 1-d search for the best W_Delta in each
// cell; cells whose inner search fails are marked invalid.  Deterministic
// for any thread count.
global_fit_result global_fit(const std::vector<echo_trace>& traces,
                             const material_params& m, const fluorine_model& f,
                             const disorder_model& dis_template, const scan_spec& scan);

// model traces for the closed-loop exercise; per-trace seeds are decoupled
std::vector<echo_trace> synthesize_trace_set(
    const material_params& m, const fluorine_model& f, const disorder_model& dis,
    const rate_params& rp, const std::vector<trace_metadata>& metas,
    const std::vector<double>& grid, double noise_sigma, std::uint64_t seed);

} // namespace echosim

#endif
