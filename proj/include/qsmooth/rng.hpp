#pragma once

#include <cstdint>
#include <random>

namespace qsmooth {

namespace detail {

// splitmix64 finalizer; used to derive independent substreams.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace detail

/// Deterministic random stream. Substreams derived as hash(master, index) are
/// statistically independent, so trajectory ensembles can be generated in any
/// order (or in parallel) with reproducible results.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : gen_(detail::mix64(seed)) {}

    static RngStream substream(std::uint64_t master, std::uint64_t index) {
        return RngStream(detail::mix64(master ^ detail::mix64(index + 1)));
    }

    /// Uniform on [0, 1).
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    /// Standard normal (Box-Muller, pairwise cached).
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        // 1 - u1 in (0, 1] keeps the log finite
        double r = std::sqrt(-2.0 * std::log(1.0 - u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    /// Gaussian with variance dt (a Wiener increment).
    double wiener(double dt) { return gaussian() * std::sqrt(dt); }

    bool bernoulli(double p) { return uniform() < p; }

    std::uint64_t raw() { return gen_(); }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace qsmooth
