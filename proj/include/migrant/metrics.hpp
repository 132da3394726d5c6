#pragma once

// Energy ledger, access log, wear accounting and lifetime projection.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "migrant/devices.hpp"
#include "migrant/types.hpp"

namespace migrant {

inline constexpr double kSecondsPerYear = 3.156e7;
inline constexpr double kDefaultEndurance = 1e9;

/// Energy split by where it was spent. All values in pJ.
struct EnergyLedger {
    EnergyPj pcm_dynamic = 0;
    EnergyPj dram_dynamic = 0;
    EnergyPj sram_dynamic = 0;
    EnergyPj leakage = 0;
    EnergyPj software = 0;

    EnergyPj total() const { return pcm_dynamic + dram_dynamic + sram_dynamic + leakage + software; }
    double total_nj() const { return pj_to_nj(total()); }

    friend bool operator==(const EnergyLedger&, const EnergyLedger&) = default;
};

/// Fixed-cost charges that are not bank accesses.
enum class FixedCharge : std::uint8_t { SramAccess, RapidInsert, SoftwareMigration };

/// Counts of every charged event, keyed so that each key has one unit cost.
/// Replaying the log reproduces the ledger.
struct AccessLog {
    struct DeviceKey {
        std::uint32_t device = 0;
        EnergyClass cls = EnergyClass::Read;
        bool row_hit = false;
        std::uint32_t bytes = kBlockBytes;

        auto tie() const { return std::tuple(device, cls, row_hit, bytes); }
        friend bool operator<(const DeviceKey& a, const DeviceKey& b) { return a.tie() < b.tie(); }
    };

    std::map<DeviceKey, std::uint64_t> device_accesses;
    std::map<FixedCharge, std::uint64_t> fixed;

    void record(std::uint32_t device, const EnergyCharge& c) { ++device_accesses[{device, c.cls, c.row_hit, c.bytes}]; }
    void record(FixedCharge f, std::uint64_t n = 1) { fixed[f] += n; }

    std::uint64_t pcm_write_bursts(const std::vector<DeviceGeometry>& devices) const {
        std::uint64_t n = 0;
        for (const auto& [k, count] : device_accesses) {
            const auto& g = devices.at(k.device);
            if (!g.is_pcm) continue;
            // Buffered 64B writes reach the array only via a buffer writeback.
            if ((k.cls == EnergyClass::Write64 && !g.buffered_writes) || k.cls == EnergyClass::WriteSubblock) n += count;
            if (k.cls == EnergyClass::BufferWriteback) n += count * (k.bytes / kBlockBytes);
        }
        return n;
    }
};

struct FixedCosts {
    double sram_access_nj = 5.0;
    double rapid_insert_nj = 0.025;
    double software_migration_nj = 3000.0;

    EnergyPj pj(FixedCharge f) const {
        switch (f) {
            case FixedCharge::SramAccess: return nj_to_pj(sram_access_nj);
            case FixedCharge::RapidInsert: return nj_to_pj(rapid_insert_nj);
            case FixedCharge::SoftwareMigration: return nj_to_pj(software_migration_nj);
        }
        return 0;
    }
};

/// Rebuilds the dynamic and software parts of a ledger from the log alone.
/// Leakage is recomputed from device parameters and the elapsed span.
inline EnergyLedger replay_ledger(const AccessLog& log, const std::vector<DeviceGeometry>& devices, const FixedCosts& costs,
                                  Cycle elapsed, double cpu_hz, double sram_leakage_mw) {
    EnergyLedger l;
    for (const auto& [k, count] : log.device_accesses) {
        const auto& g = devices.at(k.device);
        const EnergyPj e = static_cast<EnergyPj>(count) * class_energy_pj(g, k.cls, k.row_hit, k.bytes);
        (g.is_pcm ? l.pcm_dynamic : l.dram_dynamic) += e;
    }
    for (const auto& [f, count] : log.fixed) {
        const EnergyPj e = static_cast<EnergyPj>(count) * costs.pj(f);
        (f == FixedCharge::SoftwareMigration ? l.software : l.sram_dynamic) += e;
    }
    for (const auto& g : devices) l.leakage += leakage_energy_pj(g.leakage_mw, elapsed, cpu_hz);
    l.leakage += leakage_energy_pj(sram_leakage_mw, elapsed, cpu_hz);
    return l;
}

// ---------------------------------------------------------------------------

/// Per-64B-block PCM write counters.
class WearMap {
public:
    void record(Addr addr) {
        ++counts_[addr / kBlockBytes];
        ++total_;
    }

    std::uint64_t total_writes() const { return total_; }
    std::size_t touched_blocks() const { return counts_.size(); }
    bool empty() const { return counts_.empty(); }

    std::uint32_t writes(Addr addr) const {
        auto it = counts_.find(addr / kBlockBytes);
        return it == counts_.end() ? 0 : it->second;
    }

    /// Write counts of touched blocks, ascending.
    std::vector<std::uint32_t> sorted_counts() const {
        std::vector<std::uint32_t> out;
        out.reserve(counts_.size());
        for (const auto& [block, n] : counts_) out.push_back(n);
        std::sort(out.begin(), out.end());
        return out;
    }

    /// Block-index -> count pairs ordered by block index.
    std::vector<std::pair<std::uint64_t, std::uint32_t>> entries() const {
        std::vector<std::pair<std::uint64_t, std::uint32_t>> out(counts_.begin(), counts_.end());
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    std::unordered_map<std::uint64_t, std::uint32_t> counts_;
    std::uint64_t total_ = 0;
};

struct CdfPoint {
    std::uint32_t writes = 0;
    double fraction = 0;

    friend bool operator==(const CdfPoint&, const CdfPoint&) = default;
};

/// Cumulative fraction of touched blocks with at most `writes` writes, one
/// point per distinct count. Untouched blocks are not part of the population.
inline std::vector<CdfPoint> wear_cdf(const WearMap& wear) {
    if (wear.empty()) throw std::invalid_argument("wear_cdf: no block was written");
    const auto counts = wear.sorted_counts();
    std::vector<CdfPoint> out;
    const double n = static_cast<double>(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (i + 1 < counts.size() && counts[i + 1] == counts[i]) continue;
        out.push_back({counts[i], static_cast<double>(i + 1) / n});
    }
    return out;
}

struct Lifetime {
    std::uint32_t max_writes = 0;
    double years = std::numeric_limits<double>::infinity();
};

/// Write count at `quantile` over touched blocks: the largest count among
/// the least-written ceil(quantile * n) blocks.
inline std::uint32_t quantile_writes(const WearMap& wear, double quantile) {
    if (wear.empty()) return 0;
    const auto counts = wear.sorted_counts();
    const double n = static_cast<double>(counts.size());
    auto idx = static_cast<std::size_t>(std::ceil(quantile * n - 1e-9));
    idx = std::clamp<std::size_t>(idx, 1, counts.size()) - 1;
    return counts[idx];
}

/// Projected years until the worst `quantile` block wears out, at the write
/// rate observed over the baseline's execution time.
inline Lifetime worst_case_lifetime(const WearMap& wear, Cycle base_exec_cycles, double cpu_hz, double endurance = kDefaultEndurance,
                                    double quantile = 0.9999) {
    Lifetime out;
    out.max_writes = quantile_writes(wear, quantile);
    if (endurance <= 0) {
        out.years = 0;
        return out;
    }
    if (out.max_writes == 0 || base_exec_cycles == 0) return out;  // infinite
    const double seconds = static_cast<double>(base_exec_cycles) / cpu_hz;
    const double write_rate = out.max_writes / seconds;
    out.years = endurance / write_rate / kSecondsPerYear;
    return out;
}

/// Average busy banks over the baseline's execution window.
inline double busy_bank_average(Cycle busy_bank_cycles, Cycle base_exec_cycles) {
    if (base_exec_cycles == 0) return 0;
    return static_cast<double>(busy_bank_cycles) / static_cast<double>(base_exec_cycles);
}

}  // namespace migrant
