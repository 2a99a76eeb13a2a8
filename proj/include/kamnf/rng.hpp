// Counter-based deterministic RNG: value (seed, stream, index) is fixed
// regardless of evaluation order, so sampling parallelizes reproducibly.
#pragma once

#include <cstdint>

namespace kamnf::rng {

inline std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t at(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    return mix(mix(seed ^ 0x6a09e667f3bcc909ULL * stream) + index);
}

// uniform on [0,1)
inline double uniform01(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    return static_cast<double>(at(seed, stream, index) >> 11) * 0x1.0p-53;
}

// Fixed stream ids, so independent consumers never collide.
enum Stream : std::uint64_t {
    kOmega = 1,
    kMeasure = 2,
    kTorusPhase = 3,
    kPhiSample = 4,
    kTestPoly = 5,
    kTestState = 6,
};

} // namespace kamnf::rng
