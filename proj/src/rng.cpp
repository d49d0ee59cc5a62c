#include "echosim/rng.hpp"
#include "echosim/errors.hpp"

#include <cmath>

namespace echosim {

double rng_stream::exponential(double rate) {
    if (!(rate > 0)) throw validation_error("rng_stream::exponential: rate must be positive");
    double u;
    do {
        u = uniform();
    } while (u <= 0.0);
    return -std::log(u) / rate;
}

double rng_stream::normal(double mean, double sigma) {
    if (have_spare_) {
        have_spare_ = false;
        return mean + sigma * spare_;
    }
    double u1, u2;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return mean + sigma * r * std::cos(a);
}

int rng_stream::poisson(double mean) {
    if (mean < 0) throw validation_error("rng_stream::poisson: mean must be non-negative");
    if (mean == 0.0) return 0;
    // split large means so the uniform product cannot underflow
    int total = 0;
    double remaining = mean;
    while (remaining > 500.0) {
        // exact: Poisson(a + b) = Poisson(a) + Poisson(b) for independent draws
        const double l = std::exp(-500.0);
        double p = 1.0;
        int k = 0;
        do {
            ++k;
            p *= uniform();
        } while (p > l);
        total += k - 1;
        remaining -= 500.0;
    }
    const double l = std::exp(-remaining);
    double p = 1.0;
    int k = 0;
    do {
        ++k;
        p *= uniform();
    } while (p > l);
    return total + k - 1;
}

rng_stream stream_for(std::uint64_t seed, std::uint64_t stream_id) {
    // run the hash a few rounds so that nearby (seed, id) pairs decorrelate
    rng_stream h(seed ^ (stream_id * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
    h.next_u64();
    std::uint64_t s = h.next_u64();
    return rng_stream(s);
}

} // namespace echosim
