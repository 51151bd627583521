#ifndef QGS_RNG_HPP
#define QGS_RNG_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace qgs {

// Counter-based random bits: Philox-4x32-10 (Salmon et al. 2011). Every draw
// is a pure function of (key, counter), so streams can be evaluated in any
// order, on any thread, and reproduce bit-identically across platforms.
namespace philox {

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

inline std::array<std::uint32_t, 4> block(std::uint64_t key, std::uint64_t ctr_hi,
                                          std::uint64_t ctr_lo) {
    constexpr std::uint32_t kMul0 = 0xD2511F53u, kMul1 = 0xCD9E8D57u;
    constexpr std::uint32_t kWeyl0 = 0x9E3779B9u, kWeyl1 = 0xBB67AE85u;
    std::uint32_t c0 = static_cast<std::uint32_t>(ctr_lo);
    std::uint32_t c1 = static_cast<std::uint32_t>(ctr_lo >> 32);
    std::uint32_t c2 = static_cast<std::uint32_t>(ctr_hi);
    std::uint32_t c3 = static_cast<std::uint32_t>(ctr_hi >> 32);
    std::uint32_t k0 = static_cast<std::uint32_t>(key);
    std::uint32_t k1 = static_cast<std::uint32_t>(key >> 32);
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, c0, hi0, lo0);
        mulhilo(kMul1, c2, hi1, lo1);
        const std::uint32_t n0 = hi1 ^ c1 ^ k0;
        const std::uint32_t n1 = lo1;
        const std::uint32_t n2 = hi0 ^ c3 ^ k1;
        const std::uint32_t n3 = lo0;
        c0 = n0; c1 = n1; c2 = n2; c3 = n3;
        k0 += kWeyl0;
        k1 += kWeyl1;
    }
    return {c0, c1, c2, c3};
}

} // namespace philox

// Stream identifiers. A stream key is run_seed ^ stream_id; the constants are
// spread across the high bits so that derived run seeds (base ^ run_index)
// can never alias another run's stream.
namespace stream {
inline constexpr std::uint64_t kInput        = 0x243F6A8885A308D3ull;
inline constexpr std::uint64_t kInitState    = 0x13198A2E03707344ull;
inline constexpr std::uint64_t kProcessNoise = 0xA4093822299F31D0ull;
inline constexpr std::uint64_t kLinearNoise  = 0x082EFA98EC4E6C89ull;
inline constexpr std::uint64_t kOutputNoise  = 0x452821E638D01377ull;
inline constexpr std::uint64_t kParticleInit = 0xBE5466CF34E90C6Cull;
inline constexpr std::uint64_t kParticleProp = 0xC0AC29B7C97C50DDull;
inline constexpr std::uint64_t kResample     = 0x3F84D5B5B5470917ull;
inline constexpr std::uint64_t kBackwardSim  = 0x9216D5D98979FB1Bull;
inline constexpr std::uint64_t kOracle       = 0xD1310BA698DFB5ACull;
} // namespace stream

/// One logical random stream, keyed by run seed XOR stream id. Each draw is
/// addressed by a 128-bit counter (typically (t, element index)).
class RandomStream {
public:
    RandomStream(std::uint64_t run_seed, std::uint64_t stream_id) : key_(run_seed ^ stream_id) {}

    /// Uniform draw in (0, 1].
    double uniform(std::uint64_t ctr_hi, std::uint64_t ctr_lo) const {
        const auto b = philox::block(key_, ctr_hi, ctr_lo);
        const std::uint64_t u = (static_cast<std::uint64_t>(b[0]) << 32) | b[1];
        return (static_cast<double>(u) + 1.0) * 0x1p-64;
    }

    /// Standard normal draw (Box-Muller, cosine leg).
    double normal(std::uint64_t ctr_hi, std::uint64_t ctr_lo) const {
        const auto b = philox::block(key_, ctr_hi, ctr_lo);
        const std::uint64_t u1b = (static_cast<std::uint64_t>(b[0]) << 32) | b[1];
        const std::uint64_t u2b = (static_cast<std::uint64_t>(b[2]) << 32) | b[3];
        const double u1 = (static_cast<double>(u1b) + 1.0) * 0x1p-64;
        const double u2 = (static_cast<double>(u2b) + 1.0) * 0x1p-64;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    std::uint64_t key() const { return key_; }

private:
    std::uint64_t key_;
};

} // namespace qgs

#endif // QGS_RNG_HPP
