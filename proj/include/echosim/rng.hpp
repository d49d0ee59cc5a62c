#ifndef ECHOSIM_RNG_HPP
#define ECHOSIM_RNG_HPP

#include <cstdint>

namespace echosim {

// Deterministic 64-bit generator (splitmix64).  Used directly for all Monte
// Carlo sampling so results are bit-identical across platforms for a given
// seed; std distributions are avoided because their algorithms are not
// standardised.
class rng_stream {
public:
    explicit rng_stream(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1) with 53-bit resolution
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform in [lo, hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double exponential(double rate); // mean 1/rate
    double normal(double mean = 0.0, double sigma = 1.0);
    // exact Poisson sample (multiplication method, O(mean) per draw)
    int poisson(double mean);

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Independent sub-stream: hashes (seed, stream_id) into a fresh splitmix64
// state.  Every Monte Carlo sample uses stream_for(seed, sample_index) so the
// result is independent of evaluation order and worker count.
rng_stream stream_for(std::uint64_t seed, std::uint64_t stream_id);

} // namespace echosim

#endif
