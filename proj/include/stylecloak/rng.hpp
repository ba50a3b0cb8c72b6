#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace stylecloak {

// 64-bit linear congruential generator (MMIX multiplier/increment). Used
// wherever a stream must be identical across platforms and languages:
// the toy-encoder projection matrix and the seeded noise defense.
class Lcg64 {
public:
    explicit Lcg64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ = state_ * 6364136223846793005ULL + 1442695040888963407ULL;
        return state_;
    }

    // Uniform double in [0,1) with 53 bits of precision.
    double next_uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; consumes two uniforms per call.
    double next_gaussian() {
        double u1 = next_uniform();
        double u2 = next_uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * 3.141592653589793238462643383279502884 * u2);
    }

private:
    std::uint64_t state_;
};

// FNV-1a 64-bit hash; backs the manifest config digest.
inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace stylecloak
