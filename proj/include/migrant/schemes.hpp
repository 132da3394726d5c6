#pragma once

// The memory-system organizations compared by the simulator. Each scheme
// replays a trace on its own MemorySystem and returns SchemeStats.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <functional>
#include <list>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "migrant/cache.hpp"
#include "migrant/devices.hpp"
#include "migrant/engine.hpp"
#include "migrant/metrics.hpp"
#include "migrant/migrantstore.hpp"
#include "migrant/trace.hpp"
#include "migrant/types.hpp"

namespace migrant {

enum class SchemeId : std::uint8_t { PcmOnly, DramIdeal, PcmBase, HwCacheSeq, HwCachePar, RowBuffers, OsQuantaCopy, MigrantStore };

inline constexpr SchemeId kAllSchemes[] = {SchemeId::PcmBase,    SchemeId::PcmOnly,      SchemeId::DramIdeal,   SchemeId::HwCacheSeq,
                                           SchemeId::HwCachePar, SchemeId::RowBuffers,   SchemeId::OsQuantaCopy, SchemeId::MigrantStore};

inline constexpr std::string_view scheme_name(SchemeId s) {
    switch (s) {
        case SchemeId::PcmOnly: return "pcm_only";
        case SchemeId::DramIdeal: return "dram_ideal";
        case SchemeId::PcmBase: return "pcm_base";
        case SchemeId::HwCacheSeq: return "hwcache_seq";
        case SchemeId::HwCachePar: return "hwcache_par";
        case SchemeId::RowBuffers: return "row_buffers";
        case SchemeId::OsQuantaCopy: return "os_quanta_copy";
        case SchemeId::MigrantStore: return "migrantstore";
    }
    return "?";
}

inline SchemeId parse_scheme(std::string_view s) {
    for (auto id : kAllSchemes)
        if (scheme_name(id) == s) return id;
    throw ConfigError("unknown scheme '" + std::string(s) + "'");
}

struct RowBufferConfig {
    std::uint32_t count = 8;
    std::uint32_t bytes = 2048;
};

struct OsQuantaConfig {
    std::uint64_t capacity_bytes = 128ull << 20;
    Cycle quantum_cycles = 20'000'000;
    std::uint32_t write_threshold = 16;
};

/// Everything a run depends on besides the trace and seed.
struct SimConfig {
    DeviceGeometry pcm = presets::pcm();
    DeviceGeometry base_dram = presets::base_dram();
    DeviceGeometry ms_dram = presets::migrantstore_dram();
    DeviceGeometry hwc_seq_dram = presets::hwcache_dram(false);
    DeviceGeometry hwc_par_dram = presets::hwcache_dram(true);
    CacheConfig l3 = CacheConfig::sram_l3();
    CacheConfig hw_cache_seq = CacheConfig::dram_cache(false);
    CacheConfig hw_cache_par = CacheConfig::dram_cache(true);
    MigrantStoreConfig migrantstore;
    RowBufferConfig row_buffers;
    OsQuantaConfig os_quanta;
    double rapid_insert_nj = 0.025;
    Cycle flush_cycles_per_burst = 2;
    double cpu_hz = kDefaultCpuHz;
    double endurance = kDefaultEndurance;
    double lifetime_quantile = 0.9999;
    /// Keep every bank service in the stats (tests only; large).
    bool record_accesses = false;

    FixedCosts fixed_costs() const { return {l3.access_energy_nj, rapid_insert_nj, migrantstore.software_nj}; }
};

struct DeviceStats {
    std::string name;
    bool is_pcm = false;
    Cycle busy_cycles = 0;
    DeviceCounters counters;
};

struct MigrationRecord {
    PageId page = 0;
    std::optional<PageId> victim;
    Cycle start = 0;
    Cycle done = 0;
    EnergyPj energy = 0;
    std::uint32_t bursts = 0;
};

struct SchemeStats {
    SchemeId scheme = SchemeId::PcmOnly;
    Cycle exec_cycles = 0;
    std::vector<Cycle> core_cycles;
    std::uint64_t read_misses = 0;
    std::uint64_t writebacks = 0;
    /// L2 events that missed the scheme's DRAM (or L3) layer.
    std::uint64_t dram_misses = 0;
    /// Migrations, cache fills or quantum copies.
    std::uint64_t migrations = 0;
    std::vector<DeviceStats> devices;
    std::vector<DeviceGeometry> geometries;
    EnergyLedger energy;
    AccessLog log;
    WearMap wear;
    double sram_leakage_mw = 0;
    std::vector<MigrationRecord> migration_records;
    std::vector<MigrationLogEntry> victims;
    std::vector<AccessRecord> accesses;

    std::uint64_t l2_misses() const { return read_misses + writebacks; }
    double dram_miss_rate() const { return l2_misses() ? static_cast<double>(dram_misses) / l2_misses() : 0.0; }
    double migrations_per_miss() const { return l2_misses() ? static_cast<double>(migrations) / l2_misses() : 0.0; }
    Cycle busy_bank_cycles() const {
        Cycle s = 0;
        for (const auto& d : devices) s += d.busy_cycles;
        return s;
    }
    /// Bytes written into the PCM array, all causes.
    std::uint64_t pcm_write_bytes() const {
        std::uint64_t s = 0;
        for (const auto& d : devices)
            if (d.is_pcm) s += d.counters.array_write_bytes + d.counters.subblock_write_bytes + d.counters.buffer_writeback_bytes;
        return s;
    }
    /// Bytes written back to PCM from a DRAM layer or row buffer.
    std::uint64_t pcm_writeback_bytes() const {
        std::uint64_t s = 0;
        for (const auto& d : devices)
            if (d.is_pcm) s += d.counters.subblock_write_bytes + d.counters.buffer_writeback_bytes;
        return s;
    }
};

namespace detail {

/// Shared driver: core replay, demand submission, timers, and final stats.
class SchemeSim : public MemoryClient {
public:
    SchemeSim(SchemeId id, const SimConfig& cfg) : id_(id), cfg_(cfg), mem_(*this, cfg.flush_cycles_per_burst) {
        mem_.enable_access_trace(cfg.record_accesses);
    }

    SchemeStats run(const Trace& trace) {
        cores_.load(trace);
        cores_.start(mem_);
        start();
        mem_.run();
        check_invariant(cores_.all_done(), "simulation ended with unfinished cores");
        check_invariant(mem_.pending_requests() == 0, "simulation ended with requests in flight");

        SchemeStats s;
        s.scheme = id_;
        for (std::uint32_t c = 0; c < cores_.num_cores(); ++c) {
            s.core_cycles.push_back(cores_.finish(c));
            s.exec_cycles = std::max(s.exec_cycles, cores_.finish(c));
        }
        if (trace.empty()) s.core_cycles.clear();
        s.read_misses = read_misses_;
        s.writebacks = writebacks_;
        s.dram_misses = dram_misses_;
        s.migrations = migrations_;
        s.geometries = mem_.geometries();
        for (std::uint32_t d = 0; d < mem_.num_devices(); ++d) {
            const auto& g = mem_.geometry(d);
            s.devices.push_back({g.name, g.is_pcm, mem_.busy_cycles(d), mem_.counters(d)});
        }
        s.sram_leakage_mw = sram_leakage_mw_;
        auto& ledger = mem_.ledger();
        ledger.leakage = 0;
        for (const auto& g : s.geometries) ledger.leakage += leakage_energy_pj(g.leakage_mw, s.exec_cycles, cfg_.cpu_hz);
        ledger.leakage += leakage_energy_pj(sram_leakage_mw_, s.exec_cycles, cfg_.cpu_hz);
        s.energy = ledger;
        s.log = mem_.log();
        s.wear = mem_.wear();
        s.migration_records = std::move(migration_records_);
        s.accesses = mem_.access_trace();
        finish(s);
        return s;
    }

protected:
    enum Owner : std::uint32_t { kDetached = 0, kCoreRead = 1, kCoreWrite = 2, kFirstCustom = 16 };

    struct Ctx {
        std::uint32_t core = 0;
        TraceRecord rec;
        bool waiting = true;  // the core is stalled on this access
        bool is_write() const { return rec.kind == EventKind::Writeback; }
    };

    virtual void start() {}
    virtual void dispatch(const Ctx& c, Cycle now) = 0;
    virtual void on_custom_done(const Request&, Cycle) {}
    virtual void finish(SchemeStats&) {}

    void on_core_issue(std::uint32_t core, Cycle now) override {
        const auto& rec = cores_.begin_issue(core, now);
        (rec.kind == EventKind::ReadMiss ? read_misses_ : writebacks_) += 1;
        dispatch(Ctx{core, rec, true}, now);
    }

    void on_request_done(std::uint32_t, const Request& r, Cycle now) override {
        if (r.owner == kCoreRead) {
            resume(static_cast<std::uint32_t>(r.tag), now);
        } else if (r.owner >= kFirstCustom) {
            on_custom_done(r, now);
        }
    }

    void on_request_admitted(std::uint32_t, const Request& r, Cycle now) override {
        if (r.owner == kCoreWrite) resume(static_cast<std::uint32_t>(r.tag), now);
    }

    void on_timer(std::uint64_t tag, Cycle now) override {
        auto it = timers_.find(tag);
        auto fn = std::move(it->second);
        timers_.erase(it);
        fn(now);
    }

    /// Issues the access on behalf of `c`; reads stall the core until the
    /// data returns, writes only while the bank queue is full.
    void demand(std::uint32_t dev, Addr addr, const Ctx& c, Cycle now) {
        if (!c.is_write()) {
            mem_.submit(dev, addr, MemOp::Read, Priority::Demand, now, c.waiting ? kCoreRead : kDetached, c.core);
            return;
        }
        const auto res = mem_.submit(dev, addr, MemOp::Write64, Priority::Demand, now, c.waiting ? kCoreWrite : kDetached, c.core);
        if (c.waiting && res.admitted) resume(c.core, now);
    }

    void resume(std::uint32_t core, Cycle t) { cores_.resume(mem_, core, t); }

    void after(Cycle at, std::function<void(Cycle)> fn) {
        const auto id = next_timer_++;
        timers_.emplace(id, std::move(fn));
        mem_.schedule_timer(at, id);
    }

    /// 4-operation page move: read the new page from its source, read the
    /// victim's dirty sub-blocks, then write the new page and write back the
    /// victim. Groups 0-3 follow the operation order.
    static DmaJobSpec page_move(std::uint32_t src_dev, Addr src, std::uint32_t dst_dev, Addr dst, std::optional<Addr> victim_pcm,
                                std::uint64_t dirty_mask, std::uint32_t subblock, std::uint64_t tag) {
        DmaJobSpec job;
        job.tag = tag;
        job.phases.resize(2);
        auto& a = job.phases[0];
        auto& b = job.phases[1];
        for (std::uint32_t i = 0; i < kBlocksPerPage; ++i) a.push_back({src_dev, src + Addr{i} * kBlockBytes, MemOp::Read, subblock, 0});
        const std::uint32_t per_sub = subblock / kBlockBytes;
        if (victim_pcm) {
            for (std::uint32_t i = 0; i < kBlocksPerPage; ++i)
                if (dirty_mask >> (i / per_sub) & 1) a.push_back({dst_dev, dst + Addr{i} * kBlockBytes, MemOp::Read, subblock, 1});
        }
        for (std::uint32_t i = 0; i < kBlocksPerPage; ++i) b.push_back({dst_dev, dst + Addr{i} * kBlockBytes, MemOp::Write64, subblock, 2});
        if (victim_pcm) {
            for (std::uint32_t i = 0; i < kBlocksPerPage; ++i)
                if (dirty_mask >> (i / per_sub) & 1)
                    b.push_back({src_dev, *victim_pcm + Addr{i} * kBlockBytes, MemOp::WriteSubblock, subblock, 3});
        }
        return job;
    }

    SchemeId id_;
    const SimConfig& cfg_;
    MemorySystem mem_;
    CoreDriver cores_;
    std::uint64_t read_misses_ = 0, writebacks_ = 0, dram_misses_ = 0, migrations_ = 0;
    double sram_leakage_mw_ = 0;
    std::vector<MigrationRecord> migration_records_;

private:
    std::unordered_map<std::uint64_t, std::function<void(Cycle)>> timers_;
    std::uint64_t next_timer_ = 0;
};

// ---------------------------------------------------------------------------

/// PcmOnly, DramIdeal and RowBuffers: one device, no DRAM layer.
class DirectSim final : public SchemeSim {
public:
    DirectSim(SchemeId id, const SimConfig& cfg) : SchemeSim(id, cfg) {
        DeviceGeometry g = cfg.pcm;
        if (id == SchemeId::DramIdeal) g = cfg.base_dram;
        if (id == SchemeId::RowBuffers) {
            g.name = "pcm_row_buffers";
            g.row_buffers = cfg.row_buffers.count;
            g.row_buffer_bytes = cfg.row_buffers.bytes;
            g.buffered_writes = true;
        }
        mem_.add_device(g);
    }

private:
    void dispatch(const Ctx& c, Cycle now) override {
        if (id_ == SchemeId::PcmOnly) ++dram_misses_;
        demand(0, c.rec.addr, c, now);
    }

    void finish(SchemeStats& s) override {
        // Row-buffer misses stand in for the missing DRAM layer.
        if (id_ == SchemeId::RowBuffers) {
            const auto& k = s.devices[0].counters;
            s.dram_misses = k.reads + k.writes - k.row_hits;
        }
    }
};

// ---------------------------------------------------------------------------

/// PCM behind an SRAM L3 with 64B dirty sub-blocks. Write misses bypass.
class PcmBaseSim final : public SchemeSim {
public:
    explicit PcmBaseSim(const SimConfig& cfg) : SchemeSim(SchemeId::PcmBase, cfg), l3_(cfg.l3) {
        cfg.l3.validate();
        mem_.add_device(cfg.pcm);
        sram_leakage_mw_ = cfg.l3.leakage_mw;
    }

private:
    struct Fill {
        std::uint32_t remaining = 0;
        std::vector<std::uint32_t> waiters;  // stalled cores
    };

    void dispatch(const Ctx& c, Cycle now) override {
        mem_.charge_fixed(FixedCharge::SramAccess, cfg_.fixed_costs());
        const Addr a = c.rec.addr;
        const Addr blk = l3_.block_of(a) * cfg_.l3.block_bytes;
        const Cycle hit_done = now + mem_to_cpu(cfg_.l3.hit_latency);
        const auto look = l3_.lookup(a);
        if (look.hit) {
            if (c.is_write()) {
                l3_.write_hit(a);
                resume(c.core, now);
                return;
            }
            auto it = fills_.find(blk);
            if (it != fills_.end()) {
                it->second.waiters.push_back(c.core);
            } else {
                resume(c.core, hit_done);
            }
            return;
        }
        ++dram_misses_;
        if (c.is_write()) {
            demand(0, a, c, now);
            return;
        }
        if (auto ev = l3_.fill(a)) {
            for (std::uint32_t i = 0; i < cfg_.l3.subblocks_per_block(); ++i)
                if (ev->dirty_mask >> i & 1)
                    mem_.submit(0, ev->block_addr + Addr{i} * cfg_.l3.subblock(), MemOp::Write64, Priority::Demand, now, kDetached, 0);
        }
        auto& f = fills_[blk];
        f.remaining = cfg_.l3.block_bytes / kBlockBytes;
        f.waiters.push_back(c.core);
        for (std::uint32_t i = 0; i < f.remaining; ++i)
            mem_.submit(0, blk + Addr{i} * kBlockBytes, MemOp::Read, Priority::Demand, now, kFirstCustom, blk);
    }

    void on_custom_done(const Request& r, Cycle now) override {
        auto it = fills_.find(r.tag);
        if (--it->second.remaining > 0) return;
        for (auto core : it->second.waiters) resume(core, now);
        fills_.erase(it);
    }

    SetAssocCache l3_;
    std::unordered_map<Addr, Fill> fills_;
};

// ---------------------------------------------------------------------------

/// Page-block DRAM cache in front of PCM. Every miss fills; the missing
/// access waits for the demand-page read only.
class HwCacheSim final : public SchemeSim {
public:
    HwCacheSim(SchemeId id, const SimConfig& cfg)
        : SchemeSim(id, cfg), ccfg_(id == SchemeId::HwCachePar ? cfg.hw_cache_par : cfg.hw_cache_seq), cache_(ccfg_) {
        ccfg_.validate();
        check_invariant(ccfg_.block_bytes == kPageBytes, "hardware cache blocks must be page sized");
        mem_.add_device(cfg.pcm);
        DeviceGeometry g = id == SchemeId::HwCachePar ? cfg.hwc_par_dram : cfg.hwc_seq_dram;
        g.capacity = ccfg_.capacity;
        mem_.add_device(g);
        sram_leakage_mw_ = ccfg_.leakage_mw;
    }

private:
    struct Fill {
        Addr block = 0;
        bool data_ready = false;
        std::vector<Ctx> waiters;
    };

    Addr dram_addr(const CacheLookup& l, Addr a) const { return cache_.frame_index(l.set, l.way) * kPageBytes + page_offset(a); }

    void dispatch(const Ctx& c, Cycle now) override {
        const Addr a = c.rec.addr;
        const Addr blk = cache_.block_of(a) * kPageBytes;
        const auto look = cache_.lookup(a);
        if (look.hit) {
            if (c.is_write()) cache_.write_hit(a);
            auto pending = fill_of_.find(blk);
            if (pending != fill_of_.end() && !fills_[pending->second].data_ready) {
                if (c.is_write()) {
                    resume(c.core, now);  // merged into the fill
                } else {
                    fills_[pending->second].waiters.push_back(c);
                }
                return;
            }
            demand(1, dram_addr(look, a), c, now);
            return;
        }

        ++dram_misses_;
        ++migrations_;
        const auto ev = cache_.fill(a);
        const auto slot = cache_.probe(a);
        if (c.is_write()) cache_.write_hit(a);
        const Addr frame = cache_.frame_index(slot.set, slot.way) * kPageBytes;
        const auto fill_id = next_fill_++;
        auto& f = fills_[fill_id];
        f.block = blk;
        fill_of_[blk] = fill_id;
        if (c.is_write()) {
            resume(c.core, now);
        } else {
            f.waiters.push_back(c);
        }
        std::optional<Addr> victim;
        std::uint64_t mask = 0;
        if (ev && ev->dirty_mask) {
            victim = ev->block_addr;
            mask = ev->dirty_mask;
        }
        auto job = page_move(0, blk, 1, frame, victim, mask, ccfg_.subblock(), fill_id);
        after(now + mem_to_cpu(ccfg_.tag_latency), [this, job = std::move(job)](Cycle t) mutable { mem_.start_dma(std::move(job), t); });
    }

    // The demand page read (group 0) releases the stalled accesses.
    void on_dma_group_done(std::uint32_t, std::uint64_t tag, std::uint8_t group, Cycle now) override {
        if (group != 0) return;
        auto& f = fills_.at(tag);
        f.data_ready = true;
        release_waiters(f, now);
    }

    void on_dma_done(std::uint32_t, const DmaJobInfo& info, Cycle now) override {
        auto it = fills_.find(info.tag);
        release_waiters(it->second, now);
        if (auto f = fill_of_.find(it->second.block); f != fill_of_.end() && f->second == info.tag) fill_of_.erase(f);
        migration_records_.push_back({it->second.block / kPageBytes, std::nullopt, info.start, now, info.energy, info.bursts});
        fills_.erase(it);
    }

    void release_waiters(Fill& f, Cycle now) {
        for (const auto& w : f.waiters) resume(w.core, now);
        f.waiters.clear();
    }

    CacheConfig ccfg_;
    SetAssocCache cache_;
    std::unordered_map<std::uint64_t, Fill> fills_;
    std::unordered_map<Addr, std::uint64_t> fill_of_;
    std::uint64_t next_fill_ = 0;
};

// ---------------------------------------------------------------------------

/// DRAM region filled only at quantum boundaries with pages written at
/// least K times during the quantum.
class OsQuantaSim final : public SchemeSim {
public:
    explicit OsQuantaSim(const SimConfig& cfg) : SchemeSim(SchemeId::OsQuantaCopy, cfg), ocfg_(cfg.os_quanta) {
        if (ocfg_.quantum_cycles == 0) throw ConfigError("os_quanta: quantum_cycles must be >= 1");
        const auto frames = ocfg_.capacity_bytes / kPageBytes;
        if (frames == 0) throw ConfigError("os_quanta: capacity must hold at least one page");
        mem_.add_device(cfg.pcm);
        DeviceGeometry g = cfg.ms_dram;
        g.name = "osq_dram";
        g.capacity = frames * kPageBytes;
        mem_.add_device(g);
        for (std::uint64_t f = frames; f-- > 0;) free_.push_back(f);
    }

    /// Pages copied at each boundary, in boundary order.
    const std::vector<std::vector<PageId>>& copy_log() const { return copy_log_; }
    /// DRAM hits to `p` during quantum `q`.
    std::uint64_t dram_hits_in_quantum(PageId p, std::uint64_t q) const {
        auto it = hits_.find({p, q});
        return it == hits_.end() ? 0 : it->second;
    }

private:
    struct Resident {
        std::uint64_t frame = 0;
        bool dirty = false;
        std::list<PageId>::iterator lru;
    };

    void start() override { after(ocfg_.quantum_cycles, [this](Cycle t) { quantum_end(t); }); }

    std::uint64_t quantum_of(Cycle t) const { return t / ocfg_.quantum_cycles; }

    void dispatch(const Ctx& c, Cycle now) override {
        const PageId page = page_of(c.rec.addr);
        auto it = resident_.find(page);
        if (it != resident_.end()) {
            if (c.is_write()) it->second.dirty = true;
            lru_.splice(lru_.begin(), lru_, it->second.lru);
            ++hits_[{page, quantum_of(now)}];
            demand(1, it->second.frame * kPageBytes + page_offset(c.rec.addr), c, now);
            return;
        }
        ++dram_misses_;
        if (c.is_write()) ++writes_[page];
        demand(0, c.rec.addr, c, now);
    }

    void quantum_end(Cycle now) {
        if (cores_.all_done()) return;
        std::vector<std::pair<std::uint64_t, PageId>> hot;
        for (const auto& [page, n] : writes_)
            if (n >= ocfg_.write_threshold && !resident_.count(page) && !copying_.count(page)) hot.push_back({n, page});
        writes_.clear();
        // Most-written first; page id breaks ties.
        std::sort(hot.begin(), hot.end(), [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
        auto& copied = copy_log_.emplace_back();
        for (const auto& [n, page] : hot) {
            std::optional<Addr> victim;
            std::uint64_t frame;
            if (!free_.empty()) {
                frame = free_.back();
                free_.pop_back();
            } else if (!lru_.empty()) {
                const PageId v = lru_.back();
                const auto r = resident_.at(v);
                lru_.pop_back();
                resident_.erase(v);
                frame = r.frame;
                if (r.dirty) victim = v * kPageBytes;
            } else {
                break;  // every frame is the target of a copy in flight
            }
            ++migrations_;
            copying_[page] = frame;
            copied.push_back(page);
            const std::uint64_t mask = victim ? ~std::uint64_t{0} : 0;
            mem_.start_dma(page_move(0, page * kPageBytes, 1, frame * kPageBytes, victim, mask, kPageBytes, page), now);
        }
        if (!cores_.all_done()) after(now + ocfg_.quantum_cycles, [this](Cycle t) { quantum_end(t); });
    }

    void on_dma_done(std::uint32_t, const DmaJobInfo& info, Cycle now) override {
        const PageId page = info.tag;
        const auto frame = copying_.at(page);
        copying_.erase(page);
        lru_.push_front(page);
        resident_[page] = Resident{frame, false, lru_.begin()};
        migration_records_.push_back({page, std::nullopt, info.start, now, info.energy, info.bursts});
    }

    struct PairHash {
        std::size_t operator()(const std::pair<PageId, std::uint64_t>& p) const {
            return std::hash<std::uint64_t>{}(p.first * 1000003u ^ p.second);
        }
    };

    OsQuantaConfig ocfg_;
    std::unordered_map<PageId, Resident> resident_;
    std::list<PageId> lru_;
    std::vector<std::uint64_t> free_;
    std::unordered_map<PageId, std::uint64_t> copying_;
    std::map<PageId, std::uint64_t> writes_;
    std::unordered_map<std::pair<PageId, std::uint64_t>, std::uint64_t, PairHash> hits_;
    std::vector<std::vector<PageId>> copy_log_;
};

// ---------------------------------------------------------------------------

/// PCM plus an OS-managed DRAM page store with hysteresis-gated migration.
class MigrantStoreSim final : public SchemeSim {
public:
    MigrantStoreSim(const SimConfig& cfg, std::uint64_t seed) : SchemeSim(SchemeId::MigrantStore, cfg), policy_(cfg.migrantstore, seed) {
        mem_.add_device(cfg.pcm);
        DeviceGeometry g = cfg.ms_dram;
        g.capacity = cfg.migrantstore.capacity_pages() * kPageBytes;
        mem_.add_device(g);
    }

    const MigrantStorePolicy& policy() const { return policy_; }

private:
    struct Job {
        MigrationPlan plan;
        Ctx trigger;
    };

    void dispatch(const Ctx& c, Cycle now) override {
        const PageId page = page_of(c.rec.addr);
        if (policy_.busy(page)) {
            Ctx deferred = c;
            if (c.is_write() && c.waiting) {
                resume(c.core, now);
                deferred.waiting = false;
            }
            deferred_[page].push_back(deferred);
            return;
        }
        const auto out = policy_.access(c.rec.addr, c.is_write());
        switch (out.kind) {
            case AccessOutcome::Kind::Dram:
                mem_.charge_fixed(FixedCharge::RapidInsert, cfg_.fixed_costs());
                demand(1, out.dram_frame * kPageBytes + page_offset(c.rec.addr), c, now);
                return;
            case AccessOutcome::Kind::Pcm:
                ++dram_misses_;
                demand(0, c.rec.addr, c, now);
                return;
            case AccessOutcome::Kind::Migrate: break;
        }
        ++dram_misses_;
        ++migrations_;
        const auto& plan = out.plan;
        const std::optional<Addr> victim = plan.victim ? std::optional<Addr>(*plan.victim * kPageBytes) : std::nullopt;
        jobs_.emplace(plan.id, Job{plan, c});
        mem_.start_dma(page_move(0, plan.demand * kPageBytes, 1, plan.dram_frame * kPageBytes, victim, plan.victim_dirty_mask,
                                 cfg_.migrantstore.subblock(), plan.id),
                       now);
    }

    void on_dma_done(std::uint32_t, const DmaJobInfo& info, Cycle now) override {
        auto it = jobs_.find(info.tag);
        const Job job = it->second;
        jobs_.erase(it);
        policy_.complete(job.plan);
        mem_.charge_fixed(FixedCharge::SoftwareMigration, cfg_.fixed_costs());
        migration_records_.push_back({job.plan.demand, job.plan.victim, info.start, now, info.energy, info.bursts});
        // The faulting core also runs the replacement software.
        if (job.trigger.waiting) resume(job.trigger.core, now + cfg_.migrantstore.software_cycles);
        replay(job.plan.demand, now);
        if (job.plan.victim) replay(*job.plan.victim, now);
    }

    void replay(PageId page, Cycle now) {
        auto it = deferred_.find(page);
        if (it == deferred_.end()) return;
        auto pending = std::move(it->second);
        deferred_.erase(it);
        for (const auto& c : pending) dispatch(c, now);
    }

    void finish(SchemeStats& s) override {
        if (cfg_.migrantstore.validate_data) policy_.check_invariants();
        s.victims = policy_.migration_log();
    }

    MigrantStorePolicy policy_;
    std::unordered_map<std::uint64_t, Job> jobs_;
    std::unordered_map<PageId, std::vector<Ctx>> deferred_;
};

}  // namespace detail

/// Replays `trace` through one scheme. Deterministic in (trace, cfg, seed).
inline SchemeStats run_scheme(SchemeId id, const Trace& trace, const SimConfig& cfg, std::uint64_t seed = 1) {
    switch (id) {
        case SchemeId::PcmOnly:
        case SchemeId::DramIdeal:
        case SchemeId::RowBuffers: return detail::DirectSim(id, cfg).run(trace);
        case SchemeId::PcmBase: return detail::PcmBaseSim(cfg).run(trace);
        case SchemeId::HwCacheSeq:
        case SchemeId::HwCachePar: return detail::HwCacheSim(id, cfg).run(trace);
        case SchemeId::OsQuantaCopy: return detail::OsQuantaSim(cfg).run(trace);
        case SchemeId::MigrantStore: return detail::MigrantStoreSim(cfg, seed).run(trace);
    }
    throw ConfigError("unknown scheme");
}

}  // namespace migrant
