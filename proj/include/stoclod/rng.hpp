#pragma once

#include <cstdint>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>

namespace stoclod {

/// Counter-based RNG streams (Philox4x32-10, Salmon et al. 2011).
///
/// Every random number in the project is a pure function of
/// (master_seed, stream_id, counter). Streams are keyed by sample index and
/// a purpose tag, so sampling order and worker scheduling cannot change any
/// draw. All state is fixed-width integer arithmetic; the float conversion
/// uses only *, +, sqrt, log, cos, so results are reproducible for a given
/// libm. Bit-reproducibility across compilers additionally assumes the
/// compiler does not contract the Box-Muller expressions into FMA forms
/// that change rounding (we do not compile with -ffast-math).
namespace rng {

struct Block {
    uint32_t x[4];
};

namespace detail {
inline void mulhilo(uint32_t a, uint32_t b, uint32_t& hi, uint32_t& lo) {
    uint64_t p = static_cast<uint64_t>(a) * b;
    hi = static_cast<uint32_t>(p >> 32);
    lo = static_cast<uint32_t>(p);
}
} // namespace detail

/// One 128-bit block from counter (c0..c3) and 64-bit key.
inline Block philox4x32(uint32_t c0, uint32_t c1, uint32_t c2, uint32_t c3,
                        uint64_t key) {
    constexpr uint32_t M0 = 0xD2511F53u;
    constexpr uint32_t M1 = 0xCD9E8D57u;
    constexpr uint32_t W0 = 0x9E3779B9u;
    constexpr uint32_t W1 = 0xBB67AE85u;
    uint32_t k0 = static_cast<uint32_t>(key);
    uint32_t k1 = static_cast<uint32_t>(key >> 32);
    uint32_t x0 = c0, x1 = c1, x2 = c2, x3 = c3;
    for (int round = 0; round < 10; ++round) {
        uint32_t hi0, lo0, hi1, lo1;
        detail::mulhilo(M0, x0, hi0, lo0);
        detail::mulhilo(M1, x2, hi1, lo1);
        uint32_t y0 = hi1 ^ x1 ^ k0;
        uint32_t y1 = lo1;
        uint32_t y2 = hi0 ^ x3 ^ k1;
        uint32_t y3 = lo0;
        x0 = y0; x1 = y1; x2 = y2; x3 = y3;
        k0 += W0; k1 += W1;
    }
    return Block{{x0, x1, x2, x3}};
}

/// Stream identifiers: one stream per (sample, purpose[, channel]).
enum class Purpose : uint8_t {
    Field = 1,      // latent Gaussian white noise (purpose+channel offsets)
    Bootstrap = 64, // resampling indices in estimator standard errors
    Test = 128,     // seeded randomness inside the test suites
};

inline uint64_t stream_id(uint64_t sample_index, Purpose p, uint32_t channel = 0) {
    return (sample_index << 8) | (static_cast<uint64_t>(p) + channel);
}

/// Uniform in (0,1), 53-bit mantissa, never exactly 0 or 1.
inline double to_unit(uint64_t bits) {
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

inline Block block_at(uint64_t master_seed, uint64_t stream, uint64_t counter) {
    return philox4x32(static_cast<uint32_t>(counter),
                      static_cast<uint32_t>(counter >> 32),
                      static_cast<uint32_t>(stream),
                      static_cast<uint32_t>(stream >> 32), master_seed);
}

/// Two independent uniforms in (0,1) at a given counter.
inline void uniforms2(uint64_t master_seed, uint64_t stream, uint64_t counter,
                      double& u0, double& u1) {
    Block b = block_at(master_seed, stream, counter);
    uint64_t w0 = (static_cast<uint64_t>(b.x[1]) << 32) | b.x[0];
    uint64_t w1 = (static_cast<uint64_t>(b.x[3]) << 32) | b.x[2];
    u0 = to_unit(w0);
    u1 = to_unit(w1);
}

inline double uniform(uint64_t master_seed, uint64_t stream, uint64_t counter) {
    double u0, u1;
    uniforms2(master_seed, stream, counter, u0, u1);
    return u0;
}

/// Standard normal via Box-Muller; one value per counter.
inline double normal(uint64_t master_seed, uint64_t stream, uint64_t counter) {
    double u0, u1;
    uniforms2(master_seed, stream, counter, u0, u1);
    return std::sqrt(-2.0 * std::log(u0)) *
           std::cos(2.0 * std::numbers::pi * u1);
}

/// Uniform integer in [0, n). Modulo bias is < n / 2^64.
inline uint64_t index(uint64_t master_seed, uint64_t stream, uint64_t counter,
                      uint64_t n) {
    Block b = block_at(master_seed, stream, counter);
    uint64_t w = (static_cast<uint64_t>(b.x[1]) << 32) | b.x[0];
    return w % n;
}

} // namespace rng

/// FNV-1a 64-bit, used for config and mesh structural hashes.
inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t fnv1a64_str(const std::string& s) {
    return fnv1a64(s.data(), s.size());
}

} // namespace stoclod
