#pragma once

// Banked PCM/DRAM timing and energy model: address interleaving, open-page
// row buffers, per-bank occupancy, and the shared memory bus.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "migrant/types.hpp"

namespace migrant {

enum class MemOp : std::uint8_t {
    Read,
    Write64,        // one L2 block, selective update in PCM
    WriteSubblock,  // one 64B burst of a dirty sub-block writeback
};

/// What an energy entry was charged for. Keys the access log.
enum class EnergyClass : std::uint8_t { Read, Write64, WriteSubblock, BufferWriteback };

/// Energy table of one device, in nJ.
struct DeviceEnergy {
    double read_miss = 0;
    double read_hit = 0;
    double write_miss = 0;      // 64B write, row miss
    double write_subblock = 0;  // write of a `subblock_ref_bytes` sub-block
    double write_hit = 0;
    std::uint32_t subblock_ref_bytes = 512;
};

struct DeviceGeometry {
    std::string name;
    bool is_pcm = false;
    std::uint64_t capacity = 0;
    std::uint32_t num_banks = 1;
    std::uint32_t interleave = kBlockBytes;
    std::uint32_t row_bytes = 8192;
    std::uint32_t queue_depth = 32;
    Cycle read_latency = 1;   // memory cycles, row miss
    Cycle write_latency = 1;  // memory cycles, row miss
    double row_hit_fraction = 0.4;
    DeviceEnergy energy;
    double leakage_mw = 0;
    /// Per-bank row buffers. The default is one open row of `row_bytes`
    /// with writes going straight to the array. With `buffered_writes`,
    /// writes land in the buffer and a dirty buffer is written back on
    /// eviction (write-before-read).
    std::uint32_t row_buffers = 1;
    std::uint32_t row_buffer_bytes = 0;  // 0 -> row_bytes
    bool buffered_writes = false;

    std::uint32_t buffer_bytes() const { return row_buffer_bytes ? row_buffer_bytes : row_bytes; }

    void validate() const {
        auto fail = [&](const std::string& why) { throw ConfigError("device " + name + ": " + why); };
        if (num_banks == 0 || interleave == 0 || row_bytes == 0) fail("banks, interleave and row size must be nonzero");
        if (row_bytes % interleave != 0) fail("row size must be a multiple of the interleave");
        if (capacity == 0 || capacity % interleave != 0) fail("capacity must be a nonzero multiple of the interleave");
        if (read_latency == 0 || write_latency == 0) fail("latencies must be > 0");
        if (queue_depth == 0) fail("queue_depth must be >= 1");
        if (!(row_hit_fraction > 0.0 && row_hit_fraction <= 1.0)) fail("row_hit_fraction must be in (0,1]");
        if (row_buffers == 0) fail("row_buffers must be >= 1");
        if (buffer_bytes() % interleave != 0) fail("row buffer must hold a whole number of interleave units");
        if (buffered_writes && buffer_bytes() / interleave > 64) fail("write-back row buffers track at most 64 dirty units");
        if (energy.subblock_ref_bytes <= kBlockBytes) fail("subblock_ref_bytes must exceed 64");
    }
};

namespace presets {

inline constexpr std::uint64_t kMiB = 1ull << 20;
inline constexpr std::uint64_t kGiB = 1ull << 30;

inline DeviceGeometry pcm() {
    DeviceGeometry g;
    g.name = "pcm";
    g.is_pcm = true;
    g.capacity = 8 * kGiB;
    g.num_banks = 64;
    g.read_latency = 55;
    g.write_latency = 143;
    g.energy = {33, 16, 36, 170, 16, 512};
    g.leakage_mw = 6.4;
    return g;
}

inline DeviceGeometry base_dram() {
    DeviceGeometry g;
    g.name = "base_dram";
    g.capacity = 8 * kGiB;
    g.num_banks = 64;
    g.read_latency = 22;
    g.write_latency = 22;
    g.energy = {33, 16, 33, 8 * 33, 16, 512};
    g.leakage_mw = 64;
    return g;
}

inline DeviceGeometry migrantstore_dram(std::uint64_t capacity = 128 * kMiB) {
    DeviceGeometry g;
    g.name = "ms_dram";
    g.capacity = capacity;
    g.num_banks = 16;
    g.read_latency = 16;
    g.write_latency = 16;
    g.energy = {15, 4, 15, 8 * 15, 4, 512};
    g.leakage_mw = 8;
    return g;
}

/// DRAM of the hardware cache. Latency includes the tag check.
inline DeviceGeometry hwcache_dram(bool parallel, std::uint64_t capacity = 128 * kMiB) {
    DeviceGeometry g = migrantstore_dram(capacity);
    g.name = parallel ? "hwc_par_dram" : "hwc_seq_dram";
    g.read_latency = g.write_latency = parallel ? 19 : 25;
    if (parallel) g.energy = {29, 8, 29, 8 * 29, 8, 512};
    return g;
}

}  // namespace presets

// ---------------------------------------------------------------------------

struct BankAddress {
    std::uint32_t bank = 0;
    std::uint64_t row = 0;
    std::uint32_t column = 0;  // byte offset within the bank's row

    friend bool operator==(const BankAddress&, const BankAddress&) = default;
};

/// Byte offset of `addr` within its bank's private address space.
inline std::uint64_t bank_local_offset(Addr addr, const DeviceGeometry& g) {
    const std::uint64_t stripe = addr / (static_cast<std::uint64_t>(g.interleave) * g.num_banks);
    return stripe * g.interleave + addr % g.interleave;
}

inline BankAddress map_address(Addr addr, const DeviceGeometry& g) {
    if (addr >= g.capacity) throw TraceError("address beyond " + g.name + " capacity");
    BankAddress out;
    out.bank = static_cast<std::uint32_t>((addr / g.interleave) % g.num_banks);
    const std::uint64_t local = bank_local_offset(addr, g);
    out.row = local / g.row_bytes;
    out.column = static_cast<std::uint32_t>(local % g.row_bytes);
    return out;
}

/// Inverse of the bank-local mapping.
inline Addr global_address(std::uint32_t bank, std::uint64_t local, const DeviceGeometry& g) {
    const std::uint64_t stripe = local / g.interleave;
    return stripe * g.interleave * g.num_banks + static_cast<std::uint64_t>(bank) * g.interleave + local % g.interleave;
}

/// Energy of writing `bytes` contiguous bytes with selective update,
/// interpolated between the 64B and sub-block table points.
inline double selective_write_nj(const DeviceGeometry& g, std::uint32_t bytes) {
    const auto& e = g.energy;
    const double slope = (e.write_subblock - e.write_miss) / static_cast<double>(e.subblock_ref_bytes - kBlockBytes);
    return e.write_miss + slope * (static_cast<double>(bytes) - kBlockBytes);
}

/// Table energy of a single access. For WriteSubblock this is the energy of
/// the whole sub-block of `subblock_bytes`.
inline double access_energy(const DeviceGeometry& g, MemOp op, bool row_hit, std::uint32_t subblock_bytes = 512) {
    switch (op) {
        case MemOp::Read: return row_hit ? g.energy.read_hit : g.energy.read_miss;
        case MemOp::Write64: return row_hit ? g.energy.write_hit : g.energy.write_miss;
        case MemOp::WriteSubblock: return selective_write_nj(g, subblock_bytes);
    }
    return 0;
}

/// Per-burst share of a sub-block write; a sub-block of S bytes is S/64 bursts.
inline EnergyPj subblock_burst_pj(const DeviceGeometry& g, std::uint32_t subblock_bytes) {
    return nj_to_pj(selective_write_nj(g, subblock_bytes)) / static_cast<EnergyPj>(subblock_bytes / kBlockBytes);
}

/// Energy in pJ of one logged access class. Used both for charging and for
/// replaying the access log.
inline EnergyPj class_energy_pj(const DeviceGeometry& g, EnergyClass c, bool row_hit, std::uint32_t bytes) {
    switch (c) {
        case EnergyClass::Read: return nj_to_pj(access_energy(g, MemOp::Read, row_hit));
        case EnergyClass::Write64: return nj_to_pj(access_energy(g, MemOp::Write64, row_hit));
        case EnergyClass::WriteSubblock: return subblock_burst_pj(g, bytes);
        case EnergyClass::BufferWriteback: return nj_to_pj(selective_write_nj(g, bytes));
    }
    return 0;
}

/// Full-row versus 64B write energy ratio under a geometry-proportional model.
inline std::uint64_t selective_update_ratio(const DeviceGeometry& g) { return g.row_bytes / kBlockBytes; }

inline double leakage_energy(const DeviceGeometry& g, Cycle elapsed, double cpu_hz = kDefaultCpuHz) {
    if (!(cpu_hz > 0)) throw ConfigError("cpu_hz must be > 0");
    return g.leakage_mw * (static_cast<double>(elapsed) / cpu_hz) * 1e6;
}

inline EnergyPj leakage_energy_pj(double leakage_mw, Cycle elapsed, double cpu_hz) {
    return nj_to_pj(leakage_mw * (static_cast<double>(elapsed) / cpu_hz) * 1e6);
}

// ---------------------------------------------------------------------------

struct BusState {
    std::uint32_t width_bits = 256;
    Cycle beat_mem_cycles = 1;
    Cycle busy_until = 0;

    Cycle transfer_cycles(std::uint32_t bytes) const {
        const std::uint32_t beat_bytes = width_bits / 8;
        return mem_to_cpu(((bytes + beat_bytes - 1) / beat_bytes) * beat_mem_cycles);
    }

    /// Occupies the bus from max(now, busy_until). Returns the end time.
    Cycle reserve(Cycle now, std::uint32_t bytes) {
        const Cycle start = std::max(now, busy_until);
        busy_until = start + transfer_cycles(bytes);
        return busy_until;
    }
};

inline Cycle bus_transfer_cycles(std::uint32_t bytes) {
    if (bytes == 0) throw ConfigError("bus transfer of zero bytes");
    return BusState{}.transfer_cycles(bytes);
}

struct EnergyCharge {
    EnergyClass cls = EnergyClass::Read;
    bool row_hit = false;
    std::uint32_t bytes = kBlockBytes;
    EnergyPj pj = 0;
};

/// Outcome of one bank service.
struct BankService {
    Cycle device_cycles = 0;
    bool row_hit = false;
    EnergyCharge charges[2];
    std::uint32_t num_charges = 0;
    /// Row-buffer writeback (buffered-write devices only): dirty 64B chunks
    /// written to the array, as global addresses.
    std::vector<Addr> written_back;
};

struct RowBufferSlot {
    static constexpr std::uint64_t kEmpty = ~0ull;
    std::uint64_t segment = kEmpty;
    std::uint64_t dirty = 0;  // one bit per interleave unit
    std::uint64_t last_use = 0;
};

/// Per-bank state: row buffers, occupancy, and pending request queues
/// (request ids owned by the memory controller).
class BankState {
public:
    BankState() = default;
    BankState(std::uint32_t id, const DeviceGeometry& g) : id_(id), slots_(g.row_buffers) {}

    std::uint32_t id() const { return id_; }
    Cycle busy_until() const { return busy_until_; }

    /// Row held in the most recently used buffer, if any.
    std::optional<std::uint64_t> open_row() const {
        const RowBufferSlot* best = nullptr;
        for (const auto& s : slots_)
            if (s.segment != RowBufferSlot::kEmpty && (!best || s.last_use > best->last_use)) best = &s;
        if (!best) return std::nullopt;
        return best->segment;
    }

    /// Services one access starting at `start` (>= busy_until). Updates row
    /// buffers and occupancy. `subblock_bytes` only matters for WriteSubblock.
    BankService serve(const DeviceGeometry& g, MemOp op, Addr addr, Cycle start, std::uint32_t subblock_bytes = 512) {
        check_invariant(start >= busy_until_, "bank started before it was free");
        BankService out;
        const std::uint64_t local = bank_local_offset(addr, g);
        const std::uint64_t segment = local / g.buffer_bytes();
        const auto chunk = static_cast<std::uint32_t>((local % g.buffer_bytes()) / g.interleave);
        ++tick_;

        RowBufferSlot* slot = nullptr;
        for (auto& s : slots_)
            if (s.segment == segment) slot = &s;
        out.row_hit = slot != nullptr;

        auto hit_cycles = [&](Cycle lat_mem) {
            return static_cast<Cycle>(static_cast<double>(mem_to_cpu(lat_mem)) * g.row_hit_fraction + 0.5);
        };
        auto charge = [&](EnergyClass c, bool hit, std::uint32_t bytes) {
            out.charges[out.num_charges++] = {c, hit, bytes, class_energy_pj(g, c, hit, bytes)};
        };

        if (!slot) {
            slot = &slots_.front();
            for (auto& s : slots_) {
                if (s.segment == RowBufferSlot::kEmpty) {
                    slot = &s;
                    break;
                }
                if (s.last_use < slot->last_use) slot = &s;
            }
            if (g.buffered_writes && slot->dirty) {
                const auto dirty_chunks = static_cast<std::uint32_t>(std::popcount(slot->dirty));
                out.device_cycles += mem_to_cpu(g.write_latency);
                charge(EnergyClass::BufferWriteback, false, dirty_chunks * g.interleave);
                for (std::uint32_t c = 0; c < 64; ++c)
                    if (slot->dirty >> c & 1)
                        out.written_back.push_back(global_address(id_, slot->segment * g.buffer_bytes() + c * g.interleave, g));
            }
            slot->segment = segment;
            slot->dirty = 0;
        }
        slot->last_use = tick_;

        if (g.buffered_writes && op != MemOp::WriteSubblock) {
            // Every access goes through the buffer; a miss first fills it.
            if (out.row_hit) {
                out.device_cycles += hit_cycles(g.read_latency);
                charge(op == MemOp::Read ? EnergyClass::Read : EnergyClass::Write64, true, kBlockBytes);
            } else {
                out.device_cycles += mem_to_cpu(g.read_latency);
                charge(EnergyClass::Read, false, kBlockBytes);
            }
            if (op == MemOp::Write64) slot->dirty |= 1ull << chunk;
        } else {
            const Cycle lat = op == MemOp::Read ? g.read_latency : g.write_latency;
            out.device_cycles += out.row_hit ? hit_cycles(lat) : mem_to_cpu(lat);
            switch (op) {
                case MemOp::Read: charge(EnergyClass::Read, out.row_hit, kBlockBytes); break;
                case MemOp::Write64: charge(EnergyClass::Write64, out.row_hit, kBlockBytes); break;
                case MemOp::WriteSubblock: charge(EnergyClass::WriteSubblock, out.row_hit, subblock_bytes); break;
            }
        }
        busy_until_ = start + out.device_cycles;
        busy_cycles_ += out.device_cycles;
        return out;
    }

    /// Extends occupancy without device work (e.g. waiting for the bus).
    void hold_until(Cycle t) { busy_until_ = std::max(busy_until_, t); }

    Cycle busy_cycles() const { return busy_cycles_; }

    // Controller-owned queues.
    std::deque<std::uint32_t> demand_queue;
    std::deque<std::uint32_t> dma_queue;
    std::deque<std::uint32_t> admission_wait;
    bool active = false;

private:
    std::uint32_t id_ = 0;
    std::vector<RowBufferSlot> slots_;
    Cycle busy_until_ = 0;
    Cycle busy_cycles_ = 0;
    std::uint64_t tick_ = 0;
};

struct ScheduleResult {
    Cycle start = 0;
    Cycle device_done = 0;
    Cycle completion = 0;
    bool row_hit = false;
};

/// Standalone timing of one access against an idle-or-busy bank and bus:
/// the device phase begins when the bank frees, then the 64B transfer
/// follows on the bus (reads) or precedes the device phase (writes).
inline ScheduleResult schedule_access(BankState& bank, BusState& bus, const DeviceGeometry& g, MemOp op, Addr addr, Cycle now,
                                      std::uint32_t subblock_bytes = 512) {
    ScheduleResult r;
    Cycle start = std::max(now, bank.busy_until());
    if (op != MemOp::Read) start = bus.reserve(start, kBlockBytes);
    const auto svc = bank.serve(g, op, addr, start, subblock_bytes);
    r.start = start;
    r.row_hit = svc.row_hit;
    r.device_done = start + svc.device_cycles;
    r.completion = op == MemOp::Read ? bus.reserve(r.device_done, kBlockBytes) : r.device_done;
    return r;
}

}  // namespace migrant
