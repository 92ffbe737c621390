#pragma once

// Counter-based random streams.  Every draw is a pure function of a 64-bit
// key, so path i / cell c / coordinate j always sees the same number no
// matter how work is scheduled across threads or in what order paths run.

#include <cstdint>

namespace impulse::rng {

// splitmix64 finalizer; bijective on 64-bit words.
inline std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t chain(std::uint64_t h, std::uint64_t v) {
    return mix(h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
}

inline std::uint64_t key4(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0,
                          std::uint64_t d = 0) {
    return chain(chain(chain(mix(a), b), c), d);
}

// Stream tags keep draws for different purposes out of each other's way.
enum Stream : std::uint64_t {
    brownian = 0x11,
    poisson_count = 0x22,
    poisson_time = 0x33,
    poisson_mark = 0x44,
    validator = 0x55,
    perturb = 0x66,
    antithetic_flip = 0x77,
};

// Strictly inside (0,1): offset by half an ulp of the 53-bit grid.
inline double uniform01(std::uint64_t key) {
    return static_cast<double>((mix(key) >> 11) + 0.5) * 0x1p-53;
}

double normal(std::uint64_t key);  // inverse-CDF transform of uniform01

// Poisson count by CDF inversion from a single uniform.  Intended for the
// modest means here (lambda * horizon of order 1..100).
int poisson(double mean, std::uint64_t key);

}  // namespace impulse::rng
