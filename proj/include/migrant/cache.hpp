#pragma once

// Set-associative cache with LRU replacement and per-sub-block dirty bits.
// Functional state only; callers charge timing and energy.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "migrant/types.hpp"

namespace migrant {

enum class TagPolicy : std::uint8_t { Sequential, Parallel, None };

struct CacheConfig {
    std::uint64_t capacity = 0;
    std::uint32_t block_bytes = kPageBytes;
    std::uint32_t associativity = 16;
    std::uint32_t subblock_bytes = 0;  // 0: one dirty bit per block
    TagPolicy tag_policy = TagPolicy::None;
    Cycle hit_latency = 8;  // memory cycles
    /// Memory cycles spent discovering a miss before the fill starts.
    Cycle tag_latency = 0;
    double access_energy_nj = 5.0;
    double leakage_mw = 0.0;

    std::uint32_t subblock() const { return subblock_bytes ? subblock_bytes : block_bytes; }
    std::uint32_t subblocks_per_block() const { return block_bytes / subblock(); }
    std::uint64_t num_blocks() const { return capacity / block_bytes; }
    std::uint32_t num_sets() const { return static_cast<std::uint32_t>(capacity / (static_cast<std::uint64_t>(block_bytes) * associativity)); }

    void validate() const {
        if (block_bytes == 0 || associativity == 0) throw ConfigError("cache: block size and associativity must be nonzero");
        if (capacity == 0 || capacity % (static_cast<std::uint64_t>(block_bytes) * associativity) != 0)
            throw ConfigError("cache: capacity must be divisible by block_bytes x associativity");
        if (block_bytes % subblock() != 0) throw ConfigError("cache: sub-block size must divide the block size");
        if (subblocks_per_block() > 64) throw ConfigError("cache: at most 64 sub-blocks per block");
    }

    /// Presets for the two baselines that use this model.
    static CacheConfig sram_l3() {
        CacheConfig c;
        c.capacity = 24ull << 20;
        c.block_bytes = 1024;
        c.associativity = 16;
        c.subblock_bytes = kBlockBytes;
        c.tag_policy = TagPolicy::None;
        c.hit_latency = 8;
        c.access_energy_nj = 5.0;
        return c;
    }

    static CacheConfig dram_cache(bool parallel) {
        CacheConfig c;
        c.capacity = 128ull << 20;
        c.block_bytes = kPageBytes;
        c.associativity = 16;
        c.subblock_bytes = 512;
        c.tag_policy = parallel ? TagPolicy::Parallel : TagPolicy::Sequential;
        c.hit_latency = parallel ? 19 : 25;
        c.tag_latency = parallel ? 3 : 9;
        c.access_energy_nj = 0;  // charged by the DRAM device
        return c;
    }
};

struct CacheLine {
    std::uint64_t tag = 0;
    bool valid = false;
    std::uint64_t dirty_mask = 0;
    std::uint32_t lru_rank = 0;  // 0 = most recent
};

struct CacheLookup {
    bool hit = false;
    std::uint32_t set = 0;
    std::uint32_t way = 0;  // hit way, or the victim way on a miss
};

struct Evicted {
    Addr block_addr = 0;
    std::uint64_t dirty_mask = 0;

    std::uint32_t dirty_subblocks() const { return static_cast<std::uint32_t>(std::popcount(dirty_mask)); }
};

class SetAssocCache {
public:
    explicit SetAssocCache(CacheConfig cfg) : cfg_(cfg) {
        cfg_.validate();
        sets_ = cfg_.num_sets();
        lines_.resize(static_cast<std::size_t>(sets_) * cfg_.associativity);
        for (std::uint32_t s = 0; s < sets_; ++s)
            for (std::uint32_t w = 0; w < cfg_.associativity; ++w) line(s, w).lru_rank = w;
    }

    const CacheConfig& config() const { return cfg_; }

    std::uint64_t block_of(Addr a) const { return a / cfg_.block_bytes; }
    std::uint32_t set_of(Addr a) const { return static_cast<std::uint32_t>(block_of(a) % sets_); }
    std::uint64_t tag_of(Addr a) const { return block_of(a) / sets_; }

    /// Looks up `a`; a hit promotes the way to most recent.
    CacheLookup lookup(Addr a) {
        auto r = probe(a);
        if (r.hit) touch(r.set, r.way);
        return r;
    }

    /// Lookup without touching replacement state.
    CacheLookup probe(Addr a) const {
        CacheLookup r;
        r.set = set_of(a);
        const auto tag = tag_of(a);
        for (std::uint32_t w = 0; w < cfg_.associativity; ++w) {
            const auto& l = line(r.set, w);
            if (l.valid && l.tag == tag) {
                r.hit = true;
                r.way = w;
                return r;
            }
        }
        r.way = victim_way(r.set);
        return r;
    }

    /// Installs the block holding `a` in its set's victim way as the most
    /// recent, clean line. Returns the evicted valid line, if any.
    std::optional<Evicted> fill(Addr a) {
        const auto set = set_of(a);
        const auto way = victim_way(set);
        auto& l = line(set, way);
        std::optional<Evicted> out;
        if (l.valid) out = Evicted{block_address(set, l.tag), l.dirty_mask};
        l.valid = true;
        l.tag = tag_of(a);
        l.dirty_mask = 0;
        touch(set, way);
        return out;
    }

    /// Marks the sub-block holding `a` dirty. The block must be present.
    void write_hit(Addr a) {
        const auto r = probe(a);
        check_invariant(r.hit, "write_hit on absent block");
        line(r.set, r.way).dirty_mask |= 1ull << subblock_index(a);
    }

    std::uint32_t subblock_index(Addr a) const { return static_cast<std::uint32_t>((a % cfg_.block_bytes) / cfg_.subblock()); }

    const CacheLine& line(std::uint32_t set, std::uint32_t way) const { return lines_[static_cast<std::size_t>(set) * cfg_.associativity + way]; }

    /// Dense index of a (set, way) slot, used to place lines in the backing DRAM.
    std::uint64_t frame_index(std::uint32_t set, std::uint32_t way) const { return static_cast<std::uint64_t>(set) * cfg_.associativity + way; }

    Addr block_address(std::uint32_t set, std::uint64_t tag) const { return (tag * sets_ + set) * cfg_.block_bytes; }

    std::uint32_t num_sets() const { return sets_; }

    /// LRU ranks in each set are a permutation; dirty lines are valid.
    void check_invariants() const {
        std::vector<bool> seen(cfg_.associativity);
        for (std::uint32_t s = 0; s < sets_; ++s) {
            std::fill(seen.begin(), seen.end(), false);
            for (std::uint32_t w = 0; w < cfg_.associativity; ++w) {
                const auto& l = line(s, w);
                check_invariant(l.lru_rank < cfg_.associativity && !seen[l.lru_rank], "cache: LRU ranks are not a permutation");
                seen[l.lru_rank] = true;
                check_invariant(l.valid || l.dirty_mask == 0, "cache: dirty invalid line");
            }
        }
    }

private:
    CacheLine& line(std::uint32_t set, std::uint32_t way) { return lines_[static_cast<std::size_t>(set) * cfg_.associativity + way]; }

    std::uint32_t victim_way(std::uint32_t set) const {
        std::uint32_t victim = 0;
        for (std::uint32_t w = 0; w < cfg_.associativity; ++w) {
            const auto& l = line(set, w);
            if (!l.valid) return w;
            if (l.lru_rank > line(set, victim).lru_rank) victim = w;
        }
        return victim;
    }

    void touch(std::uint32_t set, std::uint32_t way) {
        const auto r = line(set, way).lru_rank;
        for (std::uint32_t w = 0; w < cfg_.associativity; ++w) {
            auto& l = line(set, w);
            if (l.lru_rank < r) ++l.lru_rank;
        }
        line(set, way).lru_rank = 0;
    }

    CacheConfig cfg_;
    std::uint32_t sets_ = 0;
    std::vector<CacheLine> lines_;
};

}  // namespace migrant
