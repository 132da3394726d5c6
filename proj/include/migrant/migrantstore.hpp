#pragma once

// OS-managed DRAM page store: hysteresis-gated migration from PCM, RAPid
// buffer feeding an LRU stack, sub-block dirty masks and stale PCM copies.
// This is the functional policy only; the scheme driver adds timing.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <deque>
#include <list>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "migrant/types.hpp"

namespace migrant {

enum class Location : std::uint8_t { InPCM, InMigrantStore };
enum class Replacement : std::uint8_t { RapidLru, PerfectLru, Random };
enum class MigrateOn : std::uint8_t { All, WritesOnly };

inline constexpr std::string_view replacement_name(Replacement r) {
    switch (r) {
        case Replacement::RapidLru: return "rapid_lru";
        case Replacement::PerfectLru: return "perfect_lru";
        case Replacement::Random: return "random";
    }
    return "?";
}

inline Replacement parse_replacement(std::string_view s) {
    if (s == "rapid_lru") return Replacement::RapidLru;
    if (s == "perfect_lru") return Replacement::PerfectLru;
    if (s == "random") return Replacement::Random;
    throw ConfigError("unknown replacement '" + std::string(s) + "'");
}

inline constexpr std::string_view migrate_on_name(MigrateOn m) { return m == MigrateOn::All ? "all" : "writes_only"; }

inline MigrateOn parse_migrate_on(std::string_view s) {
    if (s == "all") return MigrateOn::All;
    if (s == "writes_only") return MigrateOn::WritesOnly;
    throw ConfigError("unknown migrate_on '" + std::string(s) + "'");
}

struct MigrantStoreConfig {
    std::uint64_t capacity_bytes = 128ull << 20;
    std::uint32_t threshold = 16;  // 0: migrate on the first miss
    std::uint32_t subblock_bytes = 512;  // 0: whole page
    std::uint32_t rapid_capacity = 20;
    Replacement replacement = Replacement::RapidLru;
    MigrateOn migrate_on = MigrateOn::All;
    /// Whether writebacks to a PCM page count toward its hysteresis.
    bool count_writebacks = true;
    Cycle software_cycles = 5000;
    double software_nj = 3000.0;
    /// Track per-block data versions and check every stale-copy merge.
    bool validate_data = true;

    std::uint32_t subblock() const { return subblock_bytes ? subblock_bytes : kPageBytes; }
    std::uint32_t subblocks_per_page() const { return kPageBytes / subblock(); }
    std::uint64_t capacity_pages() const { return capacity_bytes / kPageBytes; }

    void validate() const {
        if (capacity_pages() == 0 || capacity_bytes % kPageBytes != 0)
            throw ConfigError("migrantstore: capacity must be a nonzero multiple of the page size");
        const auto sb = subblock();
        if (!std::has_single_bit(sb) || sb < 128 || sb > kPageBytes)
            throw ConfigError("migrantstore: subblock_bytes must be a power of two in [128, 8192], or 0");
        if (rapid_capacity == 0) throw ConfigError("migrantstore: rapid_capacity must be >= 1");
    }
};

struct PageTableEntry {
    Location location = Location::InPCM;
    PageId pcm_frame = 0;
    std::optional<std::uint64_t> dram_frame;
    /// Hysteresis count while InPCM, sub-block dirty mask while InMigrantStore.
    std::uint64_t shared_field = 0;

    std::uint64_t hysteresis_count() const {
        check_invariant(location == Location::InPCM, "hysteresis count read on a migrated page");
        return shared_field;
    }
    std::uint64_t dirty_mask() const {
        check_invariant(location == Location::InMigrantStore, "dirty mask read on a PCM page");
        return shared_field;
    }
};

/// Ids of MigrantStore pages touched since the last migration, oldest
/// first. A repeated id moves to the newest slot; when full, the oldest
/// entry is overwritten.
class RapidBuffer {
public:
    explicit RapidBuffer(std::uint32_t capacity = 20) : capacity_(capacity) {}

    void insert(PageId p) {
        auto it = std::find(ids_.begin(), ids_.end(), p);
        if (it != ids_.end()) {
            ids_.erase(it);
        } else if (ids_.size() == capacity_) {
            ids_.pop_front();
        }
        ids_.push_back(p);
    }

    void erase(PageId p) {
        auto it = std::find(ids_.begin(), ids_.end(), p);
        if (it != ids_.end()) ids_.erase(it);
    }

    std::vector<PageId> drain() {
        std::vector<PageId> out(ids_.begin(), ids_.end());
        ids_.clear();
        return out;
    }

    const std::deque<PageId>& contents() const { return ids_; }
    std::uint32_t capacity() const { return capacity_; }
    std::size_t size() const { return ids_.size(); }

private:
    std::uint32_t capacity_;
    std::deque<PageId> ids_;
};

/// Resident pages, most recent first.
class LruStack {
public:
    void push_front(PageId p) {
        check_invariant(!pos_.count(p), "page already on the LRU stack");
        order_.push_front(p);
        pos_[p] = order_.begin();
    }

    void move_to_front(PageId p) {
        auto it = pos_.find(p);
        if (it == pos_.end()) return;
        order_.splice(order_.begin(), order_, it->second);
    }

    void erase(PageId p) {
        auto it = pos_.find(p);
        check_invariant(it != pos_.end(), "erase of a page not on the LRU stack");
        order_.erase(it->second);
        pos_.erase(it);
    }

    /// Moves each drained page to the front, oldest first.
    void update_from(const std::vector<PageId>& drained) {
        for (PageId p : drained) move_to_front(p);
    }

    /// Least recent page not rejected by `skip`.
    template <typename Skip>
    std::optional<PageId> tail(Skip&& skip) const {
        for (auto it = order_.rbegin(); it != order_.rend(); ++it)
            if (!skip(*it)) return *it;
        return std::nullopt;
    }

    bool contains(PageId p) const { return pos_.count(p) != 0; }
    std::size_t size() const { return order_.size(); }
    std::vector<PageId> order() const { return {order_.begin(), order_.end()}; }

private:
    std::list<PageId> order_;
    std::unordered_map<PageId, std::list<PageId>::iterator> pos_;
};

struct MigrationPlan {
    std::uint64_t id = 0;
    PageId demand = 0;
    std::uint64_t dram_frame = 0;
    std::optional<PageId> victim;
    std::uint64_t victim_dirty_mask = 0;
    /// The triggering access was a writeback to this address.
    std::optional<Addr> merged_write;
};

struct AccessOutcome {
    enum class Kind : std::uint8_t { Dram, Pcm, Migrate };
    Kind kind = Kind::Pcm;
    std::uint64_t dram_frame = 0;
    MigrationPlan plan;  // valid for Migrate
};

struct MigrationLogEntry {
    PageId demand = 0;
    std::optional<PageId> victim;
    std::uint32_t victim_dirty_subblocks = 0;
};

class MigrantStorePolicy {
public:
    MigrantStorePolicy(const MigrantStoreConfig& cfg, std::uint64_t seed) : cfg_(cfg), rapid_(cfg.rapid_capacity), rng_(seed) {
        cfg_.validate();
        const auto frames = cfg_.capacity_pages();
        free_frames_.reserve(frames);
        for (std::uint64_t f = frames; f-- > 0;) free_frames_.push_back(f);
    }

    const MigrantStoreConfig& config() const { return cfg_; }

    /// Pages that must not be touched until their migration completes.
    bool busy(PageId p) const { return pinned_.count(p) != 0; }

    /// Applies one L2 miss or writeback to a page that is not busy.
    AccessOutcome access(Addr addr, bool is_write) {
        const PageId page = page_of(addr);
        check_invariant(!busy(page), "access to a page under migration");
        auto& pte = entry(page);
        AccessOutcome out;
        if (pte.location == Location::InMigrantStore) {
            rapid_.insert(page);
            if (cfg_.replacement == Replacement::PerfectLru) lru_.move_to_front(page);
            if (is_write) {
                pte.shared_field |= std::uint64_t{1} << subblock_index(addr);
                write_version(addr, /*to_pcm=*/false);
            }
            out.kind = AccessOutcome::Kind::Dram;
            out.dram_frame = *pte.dram_frame;
            return out;
        }

        ++misses_since_pcm_[page];
        const bool counts = cfg_.migrate_on == MigrateOn::WritesOnly ? is_write : (!is_write || cfg_.count_writebacks);
        if (counts && cfg_.threshold > 0 && pte.shared_field < cfg_.threshold) ++pte.shared_field;
        const bool fire = counts && pte.shared_field >= cfg_.threshold;
        if (!fire) {
            if (is_write) write_version(addr, /*to_pcm=*/true);
            out.kind = AccessOutcome::Kind::Pcm;
            return out;
        }
        if (is_write) bump_latest(addr);
        out.kind = AccessOutcome::Kind::Migrate;
        out.plan = plan_migration(page);
        if (is_write) out.plan.merged_write = addr;
        out.dram_frame = out.plan.dram_frame;
        return out;
    }

    /// Applies the page-table update of a finished migration.
    void complete(const MigrationPlan& plan) {
        auto& pte = entry(plan.demand);
        check_invariant(pte.location == Location::InPCM, "migrating page already resident");
        pte.location = Location::InMigrantStore;
        pte.dram_frame = plan.dram_frame;
        pte.shared_field = 0;
        stale_.insert(pte.pcm_frame);
        if (cfg_.validate_data) copy_pcm_to_dram(plan.demand, plan.merged_write);
        if (plan.merged_write) pte.shared_field |= std::uint64_t{1} << subblock_index(*plan.merged_write);
        misses_since_pcm_.erase(plan.demand);
        pinned_.erase(plan.demand);
        if (plan.victim) pinned_.erase(*plan.victim);
        --in_flight_;
    }

    const PageTableEntry* find(PageId p) const {
        auto it = table_.find(p);
        return it == table_.end() ? nullptr : &it->second;
    }
    Location location(PageId p) const {
        const auto* e = find(p);
        return e ? e->location : Location::InPCM;
    }

    std::uint64_t resident_pages() const { return cfg_.capacity_pages() - free_frames_.size(); }
    const std::unordered_set<PageId>& stale_set() const { return stale_; }
    const LruStack& lru() const { return lru_; }
    const RapidBuffer& rapid() const { return rapid_; }
    const std::vector<MigrationLogEntry>& migration_log() const { return log_; }
    std::size_t in_flight() const { return in_flight_; }
    std::uint32_t subblock_index(Addr a) const { return page_offset(a) / cfg_.subblock(); }

    /// Full structural self-check; used by tests and debug runs.
    void check_invariants() const {
        std::uint64_t resident = 0;
        for (const auto& [page, pte] : table_) {
            const bool in_ms = pte.location == Location::InMigrantStore;
            check_invariant(in_ms == pte.dram_frame.has_value(), "location / dram_frame mismatch");
            check_invariant(in_ms == (stale_.count(pte.pcm_frame) != 0), "stale set mismatch");
            if (in_ms) ++resident;
            if (!in_ms) check_invariant(pte.shared_field <= cfg_.threshold, "hysteresis count over threshold");
        }
        check_invariant(resident + in_flight_ <= cfg_.capacity_pages(), "resident set over capacity");
        check_invariant(lru_.size() == resident + in_flight_, "LRU stack does not match resident set");
        if (cfg_.replacement != Replacement::Random) {
            auto order = lru_.order();
            std::sort(order.begin(), order.end());
            check_invariant(std::adjacent_find(order.begin(), order.end()) == order.end(), "duplicate page on LRU stack");
        }
    }

private:
    PageTableEntry& entry(PageId p) {
        auto [it, inserted] = table_.try_emplace(p);
        if (inserted) it->second.pcm_frame = p;
        return it->second;
    }

    MigrationPlan plan_migration(PageId page) {
        check_invariant(misses_since_pcm_[page] >= cfg_.threshold, "migration below the hysteresis threshold");
        MigrationPlan plan;
        plan.id = next_id_++;
        plan.demand = page;

        auto drained = rapid_.drain();
        if (cfg_.replacement == Replacement::RapidLru) lru_.update_from(drained);
        if (!free_frames_.empty()) {
            plan.dram_frame = free_frames_.back();
            free_frames_.pop_back();
        } else {
            const PageId victim = select_victim();
            auto& v = entry(victim);
            plan.victim = victim;
            plan.dram_frame = *v.dram_frame;
            plan.victim_dirty_mask = v.shared_field;
            evict(victim);
        }
        lru_.push_front(page);
        if (cfg_.replacement == Replacement::Random) add_resident(page);
        pinned_.insert(page);
        ++in_flight_;
        log_.push_back({page, plan.victim, static_cast<std::uint32_t>(std::popcount(plan.victim_dirty_mask))});
        return plan;
    }

    PageId select_victim() {
        auto skip = [&](PageId p) { return pinned_.count(p) != 0; };
        if (cfg_.replacement == Replacement::Random) {
            // Redraw on pinned pages; at most a few are pinned at once.
            for (;;) {
                const PageId p = residents_[rng_.below(residents_.size())];
                if (!skip(p)) return p;
            }
        }
        auto v = lru_.tail(skip);
        check_invariant(v.has_value(), "no evictable MigrantStore page");
        return *v;
    }

    void evict(PageId victim) {
        auto& v = entry(victim);
        if (cfg_.validate_data) merge_to_pcm(victim, v.shared_field);
        v.location = Location::InPCM;
        v.dram_frame.reset();
        v.shared_field = 0;
        stale_.erase(v.pcm_frame);
        lru_.erase(victim);
        rapid_.erase(victim);
        if (cfg_.replacement == Replacement::Random) remove_resident(victim);
        pinned_.insert(victim);
        misses_since_pcm_[victim] = 0;
    }

    void add_resident(PageId p) {
        resident_pos_[p] = residents_.size();
        residents_.push_back(p);
    }
    void remove_resident(PageId p) {
        const auto i = resident_pos_.at(p);
        resident_pos_[residents_.back()] = i;
        residents_[i] = residents_.back();
        residents_.pop_back();
        resident_pos_.erase(p);
    }

    // Data versions per 64B block: latest written value, PCM copy, DRAM copy.
    struct Versions {
        std::vector<std::uint32_t> latest, pcm, dram;
        Versions() : latest(kBlocksPerPage, 0), pcm(kBlocksPerPage, 0), dram(kBlocksPerPage, 0) {}
    };

    Versions& versions(PageId p) { return versions_[p]; }
    static std::uint32_t block_in_page(Addr a) { return page_offset(a) / kBlockBytes; }

    void bump_latest(Addr a) {
        if (cfg_.validate_data) ++versions(page_of(a)).latest[block_in_page(a)];
    }

    void write_version(Addr a, bool to_pcm) {
        if (!cfg_.validate_data) return;
        auto& v = versions(page_of(a));
        const auto b = block_in_page(a);
        ++v.latest[b];
        (to_pcm ? v.pcm : v.dram)[b] = v.latest[b];
    }

    /// The migrated copy must be current except for a write merged into it.
    void copy_pcm_to_dram(PageId p, std::optional<Addr> merged) {
        auto it = versions_.find(p);
        if (it == versions_.end()) return;
        auto& v = it->second;
        const std::uint32_t skip = merged ? block_in_page(*merged) : kBlocksPerPage;
        for (std::uint32_t b = 0; b < kBlocksPerPage; ++b) {
            if (b != skip) check_invariant(v.pcm[b] == v.latest[b], "PCM copy out of date at migration");
            v.dram[b] = b == skip ? v.latest[b] : v.pcm[b];
        }
    }

    /// Writes the dirty sub-blocks over the stale PCM copy and checks the
    /// result holds the newest data of every block.
    void merge_to_pcm(PageId p, std::uint64_t dirty_mask) {
        auto it = versions_.find(p);
        if (it == versions_.end()) return;
        auto& v = it->second;
        const std::uint32_t per_sub = cfg_.subblock() / kBlockBytes;
        for (std::uint32_t b = 0; b < kBlocksPerPage; ++b)
            if (dirty_mask >> (b / per_sub) & 1) v.pcm[b] = v.dram[b];
        for (std::uint32_t b = 0; b < kBlocksPerPage; ++b) check_invariant(v.pcm[b] == v.latest[b], "stale PCM copy lost a write at eviction");
    }

    MigrantStoreConfig cfg_;
    std::unordered_map<PageId, PageTableEntry> table_;
    std::unordered_map<PageId, std::uint64_t> misses_since_pcm_;
    std::unordered_set<PageId> stale_;
    std::unordered_set<PageId> pinned_;
    std::vector<std::uint64_t> free_frames_;
    RapidBuffer rapid_;
    LruStack lru_;
    std::vector<PageId> residents_;
    std::unordered_map<PageId, std::size_t> resident_pos_;
    Rng rng_;
    std::uint64_t next_id_ = 0;
    std::size_t in_flight_ = 0;
    std::vector<MigrationLogEntry> log_;
    std::unordered_map<PageId, Versions> versions_;
};

}  // namespace migrant
