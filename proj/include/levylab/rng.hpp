#pragma once

#include <array>
#include <cstdint>
#include <cmath>
#include <stdexcept>

namespace levylab {

// Philox4x32-10 counter-based generator (Salmon et al., SC 2011).
// A block cipher on a 128-bit counter under a 64-bit key: random access
// into the stream is O(1) and the output is independent of evaluation
// order, which is what makes bit-identical multithreaded replay possible.
struct Philox4x32 {
    static constexpr std::uint32_t kM0 = 0xD2511F53u;
    static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kW0 = 0x9E3779B9u;
    static constexpr std::uint32_t kW1 = 0xBB67AE85u;

    static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                              std::array<std::uint32_t, 2> key) {
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
            const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
            const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
            key[0] += kW0;
            key[1] += kW1;
        }
        return ctr;
    }
};

// Stream tags. Every random draw in the library is addressed by
// (seed, kind, path, interval, atom, draw index); nothing is ever drawn
// from shared mutable generator state.
enum class StreamKind : std::uint8_t {
    BrownianIncrement = 1,
    JumpCount = 2,
    JumpTime = 3,
    WindowBrownian = 4,
    WindowJumpCount = 5,
    WindowJumpTime = 6,
    BridgeSplit = 7,
    TreeOutcome = 8,
    Generic = 9,
};

// One logical stream of i.i.d. draws. Cheap to construct; the draw index
// lives in the upper 64 bits of the Philox counter.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, StreamKind kind, std::uint64_t path = 0,
               std::uint32_t interval = 0, std::uint32_t atom = 0)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          draw_(0) {
        if (path > 0xFFFFFFFFull) throw std::invalid_argument("CounterRng: path index exceeds 2^32");
        if (interval > 0xFFFFu) throw std::invalid_argument("CounterRng: interval index exceeds 2^16");
        if (atom > 0xFFu) throw std::invalid_argument("CounterRng: atom index exceeds 2^8");
        c0_ = static_cast<std::uint32_t>(path);
        c1_ = (interval << 16) | (atom << 8) | static_cast<std::uint32_t>(kind);
    }

    std::uint64_t next_u64() {
        const std::array<std::uint32_t, 4> ctr = {
            c0_, c1_, static_cast<std::uint32_t>(draw_), static_cast<std::uint32_t>(draw_ >> 32)};
        ++draw_;
        const auto out = Philox4x32::block(ctr, key_);
        return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
    }

    // uniform on (0,1]; 53-bit resolution, never 0 so logs are safe
    double next_uniform() {
        const std::uint64_t bits = next_u64() >> 11;
        return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
    }

    // standard normal via Box-Muller; consumes two uniforms
    double next_gaussian() {
        const double u1 = next_uniform();
        const double u2 = next_uniform();
        constexpr double two_pi = 6.283185307179586476925286766559;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    }

    // Poisson by inversion (sequential search); consumes one uniform.
    std::uint64_t next_poisson(double lambda) {
        if (lambda < 0.0) throw std::invalid_argument("next_poisson: negative rate");
        if (lambda == 0.0) { next_u64(); return 0; }
        if (lambda > 600.0) throw std::invalid_argument("next_poisson: rate too large for inversion");
        const double u = next_uniform();
        double p = std::exp(-lambda);
        double cum = p;
        std::uint64_t k = 0;
        while (u > cum && k < 100000) {
            ++k;
            p *= lambda / static_cast<double>(k);
            cum += p;
        }
        return k;
    }

private:
    std::array<std::uint32_t, 2> key_;
    std::uint32_t c0_ = 0;
    std::uint32_t c1_ = 0;
    std::uint64_t draw_;
};

// 64-bit mix (splitmix64 finalizer); used to derive sub-seeds from a master
// seed so experiments never share streams by accident.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (tag + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

} // namespace levylab
