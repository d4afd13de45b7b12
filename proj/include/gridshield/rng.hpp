#pragma once

#include <cstdint>
#include <random>

namespace gridshield {

// splitmix64; used to derive independent, reproducible engine seeds from a
// base seed plus stream coordinates (sample index, epoch, trial, ...).
inline uint64_t mix64(uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t derive_seed(uint64_t base, uint64_t a, uint64_t b = 0, uint64_t c = 0) {
    return mix64(mix64(mix64(base ^ 0x6a09e667f3bcc909ULL) + a) + mix64(b + (c << 1)));
}

inline std::mt19937_64 make_engine(uint64_t base, uint64_t a, uint64_t b = 0, uint64_t c = 0) {
    return std::mt19937_64(derive_seed(base, a, b, c));
}

// Uniform in [0,1); 53-bit mantissa. Hand-rolled (not std::*_distribution) so
// streams are identical across standard libraries.
inline double uniform01(std::mt19937_64& eng) {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& eng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(eng);
}

// Standard normal via Box-Muller; consumes two draws per value.
inline double gaussian(std::mt19937_64& eng) {
    const double u1 = (static_cast<double>(eng() >> 11) + 1.0) * 0x1.0p-53;  // (0,1]
    const double u2 = uniform01(eng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

}  // namespace gridshield
