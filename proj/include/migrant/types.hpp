#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace migrant {

/// CPU cycles. All simulated time is expressed in CPU cycles.
using Cycle = std::uint64_t;
/// Physical byte address in the PCM address space.
using Addr = std::uint64_t;
/// Page number (address / kPageBytes).
using PageId = std::uint64_t;
/// Energy in picojoules. Integer so that ledgers reconcile exactly.
using EnergyPj = std::int64_t;

inline constexpr std::uint32_t kBlockBytes = 64;   // L2 block
inline constexpr std::uint32_t kPageBytes = 8192;  // OS page / DRAM-cache block
inline constexpr std::uint32_t kBlocksPerPage = kPageBytes / kBlockBytes;
inline constexpr Cycle kCpuCyclesPerMemCycle = 10;
inline constexpr double kDefaultCpuHz = 2.0e9;
inline constexpr Cycle kNever = std::numeric_limits<Cycle>::max();

inline constexpr Cycle mem_to_cpu(Cycle mem_cycles) { return mem_cycles * kCpuCyclesPerMemCycle; }
inline constexpr PageId page_of(Addr a) { return a / kPageBytes; }
inline constexpr std::uint32_t page_offset(Addr a) { return static_cast<std::uint32_t>(a % kPageBytes); }

inline EnergyPj nj_to_pj(double nj) { return static_cast<EnergyPj>(nj * 1000.0 + (nj >= 0 ? 0.5 : -0.5)); }
inline constexpr double pj_to_nj(EnergyPj pj) { return static_cast<double>(pj) / 1000.0; }

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TraceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raised when a simulator self-check fails; the CLI maps this to exit code 3.
struct InvariantError : std::logic_error {
    using std::logic_error::logic_error;
};

inline void check_invariant(bool ok, const char* what) {
    if (!ok) throw InvariantError(what);
}

/// Seeded generator with platform-independent derived distributions.
/// std::mt19937_64 output is fully specified by the standard; the
/// standard distributions are not, so the few we need are written here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n) {
        // Rejection sampling keeps the result unbiased.
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

private:
    std::mt19937_64 engine_;
};

}  // namespace migrant
