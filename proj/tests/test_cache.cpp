#include <gtest/gtest.h>

#include <list>
#include <utility>

#include "migrant/cache.hpp"

using namespace migrant;

namespace {

CacheConfig small(std::uint32_t sets, std::uint32_t ways, std::uint32_t block = 4096, std::uint32_t sub = 512) {
    CacheConfig c;
    c.block_bytes = block;
    c.associativity = ways;
    c.subblock_bytes = sub;
    c.capacity = static_cast<std::uint64_t>(sets) * ways * block;
    return c;
}

// Reference model: a list per set, most recent at the front.
class ListLru {
public:
    ListLru(std::uint32_t sets, std::uint32_t ways, std::uint32_t block) : sets_(sets), ways_(ways), block_(block), lists_(sets) {}

    // Returns {hit, evicted block or -1}.
    std::pair<bool, std::int64_t> access(Addr a) {
        const std::uint64_t b = a / block_;
        auto& l = lists_[b % sets_];
        for (auto it = l.begin(); it != l.end(); ++it)
            if (*it == b) {
                l.erase(it);
                l.push_front(b);
                return {true, -1};
            }
        std::int64_t ev = -1;
        if (l.size() == ways_) {
            ev = static_cast<std::int64_t>(l.back());
            l.pop_back();
        }
        l.push_front(b);
        return {false, ev};
    }

private:
    std::uint32_t sets_, ways_, block_;
    std::vector<std::list<std::uint64_t>> lists_;
};

}  // namespace

TEST(Cache, TwoWayLruEvictsLeastRecent) {
    SetAssocCache c(small(1, 2));
    const Addr A = 0, B = 4096, C = 8192;
    EXPECT_FALSE(c.lookup(A).hit);
    c.fill(A);
    EXPECT_FALSE(c.lookup(B).hit);
    c.fill(B);
    EXPECT_TRUE(c.lookup(A).hit);
    EXPECT_FALSE(c.lookup(C).hit);
    const auto ev = c.fill(C);
    ASSERT_TRUE(ev);
    EXPECT_EQ(ev->block_addr, B);
    EXPECT_TRUE(c.probe(A).hit);
    EXPECT_FALSE(c.probe(B).hit);
}

TEST(Cache, ProbeDoesNotTouchLru) {
    SetAssocCache c(small(1, 2));
    c.fill(0);
    c.fill(4096);
    EXPECT_TRUE(c.probe(0).hit);  // no promotion
    const auto ev = c.fill(8192);
    ASSERT_TRUE(ev);
    EXPECT_EQ(ev->block_addr, 0u);
}

TEST(Cache, SubblockDirtyBits) {
    SetAssocCache c(small(4, 2));
    c.fill(0);
    c.write_hit(600);   // sub-block 1
    c.write_hit(4000);  // sub-block 7
    c.write_hit(700);   // sub-block 1 again
    const auto l = c.probe(0);
    EXPECT_EQ(std::as_const(c).line(l.set, l.way).dirty_mask, (1ull << 1) | (1ull << 7));
    EXPECT_THROW(c.write_hit(4096), InvariantError);  // different block, absent
}

TEST(Cache, EvictionReportsDirtySubblocks) {
    SetAssocCache c(small(1, 1));
    c.fill(0);
    for (Addr a : {Addr{0}, Addr{512}, Addr{1024}, Addr{3584}}) c.write_hit(a);
    const auto ev = c.fill(4096);
    ASSERT_TRUE(ev);
    EXPECT_EQ(ev->dirty_subblocks(), 4u);
    // The new line starts clean.
    const auto l = c.probe(4096);
    EXPECT_EQ(std::as_const(c).line(l.set, l.way).dirty_mask, 0u);
}

TEST(Cache, WholeBlockDirtyBitWithoutSubblocks) {
    SetAssocCache c(small(2, 2, 4096, 0));
    c.fill(0);
    c.write_hit(4095);
    const auto l = c.probe(0);
    EXPECT_EQ(std::as_const(c).line(l.set, l.way).dirty_mask, 1u);
}

TEST(Cache, SetIndexingAndBlockAddress) {
    SetAssocCache c(small(8, 4));
    EXPECT_EQ(c.set_of(0), 0u);
    EXPECT_EQ(c.set_of(4096 * 9), 1u);
    EXPECT_EQ(c.tag_of(4096 * 9), 1u);
    EXPECT_EQ(c.block_address(1, 1), 4096u * 9);
    EXPECT_EQ(c.frame_index(2, 3), 11u);
}

TEST(Cache, MatchesListLruOracle) {
    Rng rng(42);
    for (int cfg = 0; cfg < 10; ++cfg) {
        const std::uint32_t sets = 1u << rng.below(4);
        const std::uint32_t ways = 1 + static_cast<std::uint32_t>(rng.below(8));
        SetAssocCache c(small(sets, ways, 1024, 64));
        ListLru ref(sets, ways, 1024);
        const std::uint64_t span = static_cast<std::uint64_t>(sets) * ways * 3;
        for (int i = 0; i < 5000; ++i) {
            const Addr a = rng.below(span) * 1024 + rng.below(16) * 64;
            const auto [hit, ev] = ref.access(a);
            const auto r = c.lookup(a);
            ASSERT_EQ(r.hit, hit) << "cfg " << cfg << " access " << i;
            if (!r.hit) {
                const auto e = c.fill(a);
                ASSERT_EQ(e.has_value(), ev >= 0);
                if (e) {
                    ASSERT_EQ(e->block_addr / 1024, static_cast<std::uint64_t>(ev));
                }
            }
        }
        c.check_invariants();
    }
}

TEST(Cache, Validation) {
    auto bad = small(2, 2);
    bad.capacity += 1;
    EXPECT_THROW(SetAssocCache{bad}, ConfigError);
    bad = small(2, 2, 4096, 48);
    EXPECT_THROW(SetAssocCache{bad}, ConfigError);
    bad = small(2, 2, 8192, 64);  // 128 sub-blocks
    EXPECT_THROW(SetAssocCache{bad}, ConfigError);
    EXPECT_NO_THROW(SetAssocCache(CacheConfig::sram_l3()));
    EXPECT_EQ(CacheConfig::sram_l3().num_sets(), 1536u);
    EXPECT_EQ(CacheConfig::dram_cache(true).num_sets(), 1024u);
}
