/**
 * @file rng.hpp
 * @brief Counter-based deterministic random streams.
 *
 * Each sample index owns its own substream, so parallel evaluation order
 * never changes the generated values.
 */

#ifndef UTOC_RNG_HPP
#define UTOC_RNG_HPP

#include <cmath>
#include <cstdint>

namespace utoc {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Substream of standard normals keyed by (seed, stream_id).
class NormalStream {
public:
    NormalStream(std::uint64_t seed, std::uint64_t stream_id) {
        state_ = seed ^ (0x6a09e667f3bcc909ULL * (stream_id + 1));
        // burn-in decorrelates nearby stream ids
        splitmix64(state_);
        splitmix64(state_);
    }

    /// Uniform in (0,1), 53-bit resolution, never exactly 0 or 1.
    double uniform() {
        return (static_cast<double>(splitmix64(state_) >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace utoc

#endif  // UTOC_RNG_HPP
