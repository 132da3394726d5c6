#include <gtest/gtest.h>

#include "migrant/schemes.hpp"

using namespace migrant;

namespace {

Trace random_trace(std::uint64_t seed, Generator g = Generator::Zipf, std::uint64_t pages = 512, std::uint64_t records = 6000,
                   std::uint32_t cores = 2, double writes = 0.35) {
    SyntheticSpec sp;
    sp.generator = g;
    sp.footprint_pages = pages;
    sp.records = records;
    sp.num_cores = cores;
    sp.write_fraction = writes;
    sp.seed = seed;
    sp.gap_cycles = 150;
    return generate(sp);
}

SimConfig small_config(std::uint64_t ms_pages = 64) {
    SimConfig c;
    c.migrantstore.capacity_bytes = ms_pages * kPageBytes;
    c.os_quanta.capacity_bytes = ms_pages * kPageBytes;
    c.os_quanta.quantum_cycles = 200'000;
    c.os_quanta.write_threshold = 4;
    c.hw_cache_seq.capacity = c.hw_cache_par.capacity = ms_pages * kPageBytes;
    c.l3.capacity = 256 * 1024;
    return c;
}

const Generator kGenerators[] = {Generator::Zipf, Generator::Loop, Generator::Phased};

}  // namespace

TEST(Property, LedgerReplaysExactlyForEveryScheme) {
    const auto cfg = small_config();
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const auto t = random_trace(seed, kGenerators[seed % 3]);
        for (auto id : kAllSchemes) {
            const auto s = run_scheme(id, t, cfg, seed);
            const auto replay = replay_ledger(s.log, s.geometries, cfg.fixed_costs(), s.exec_cycles, cfg.cpu_hz, s.sram_leakage_mw);
            EXPECT_EQ(replay, s.energy) << scheme_name(id) << " seed " << seed;
            EXPECT_GE(s.energy.pcm_dynamic, 0);
            EXPECT_GE(s.energy.dram_dynamic, 0);
            EXPECT_GE(s.energy.sram_dynamic, 0);
            EXPECT_GE(s.energy.leakage, 0);
            EXPECT_GE(s.energy.software, 0);
        }
    }
}

TEST(Property, RerunsAreBitIdentical) {
    const auto cfg = small_config();
    const auto t = random_trace(7);
    for (auto id : kAllSchemes) {
        const auto a = run_scheme(id, t, cfg, 3);
        const auto b = run_scheme(id, t, cfg, 3);
        EXPECT_EQ(a.exec_cycles, b.exec_cycles) << scheme_name(id);
        EXPECT_EQ(a.core_cycles, b.core_cycles);
        EXPECT_EQ(a.energy, b.energy);
        EXPECT_EQ(a.dram_misses, b.dram_misses);
        EXPECT_EQ(a.migrations, b.migrations);
        EXPECT_EQ(a.wear.entries(), b.wear.entries());
        EXPECT_EQ(a.busy_bank_cycles(), b.busy_bank_cycles());
    }
}

TEST(Property, MigrationsBoundedByMisses) {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        for (std::uint32_t th : {0u, 4u, 16u}) {
            auto cfg = small_config(32);
            cfg.migrantstore.threshold = th;
            const auto t = random_trace(seed, kGenerators[seed % 3]);
            const auto ms = run_scheme(SchemeId::MigrantStore, t, cfg, seed);
            EXPECT_LE(ms.migrations, ms.dram_misses);
            EXPECT_LE(ms.dram_misses, ms.l2_misses());
        }
    }
    const auto t = random_trace(9);
    for (auto id : kAllSchemes) EXPECT_LE(run_scheme(id, t, small_config(32), 1).migrations, t.size());
}

TEST(Property, WearEqualsLoggedPcmWrites) {
    const auto cfg = small_config(16);
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const auto t = random_trace(seed, kGenerators[seed % 3], 256, 6000, 2, 0.6);
        for (auto id : kAllSchemes) {
            const auto s = run_scheme(id, t, cfg, seed);
            EXPECT_EQ(s.wear.total_writes(), s.log.pcm_write_bursts(s.geometries)) << scheme_name(id);
            EXPECT_EQ(s.wear.total_writes() * kBlockBytes, s.pcm_write_bytes()) << scheme_name(id);
        }
    }
}

// Stale-copy merge checks run inside the policy (validate_data) and throw
// on any lost write.
TEST(Property, StaleCopyMergeHoldsUnderWriteHeavyTraffic) {
    for (auto rep : {Replacement::RapidLru, Replacement::PerfectLru, Replacement::Random}) {
        for (std::uint32_t sub : {0u, 128u, 512u, 2048u}) {
            auto cfg = small_config(8);
            cfg.migrantstore.threshold = 2;
            cfg.migrantstore.replacement = rep;
            cfg.migrantstore.subblock_bytes = sub;
            EXPECT_NO_THROW(run_scheme(SchemeId::MigrantStore, random_trace(5, Generator::Zipf, 64, 5000, 4, 0.7), cfg, 2));
        }
    }
}

TEST(Property, HysteresisGate) {
    for (std::uint32_t th : {0u, 1u, 5u, 16u}) {
        MigrantStoreConfig c;
        c.capacity_bytes = 8 * kPageBytes;
        c.threshold = th;
        MigrantStorePolicy ms(c, 1);
        std::unordered_map<PageId, std::uint64_t> since;  // misses while InPCM
        Rng rng(th + 1);
        for (int i = 0; i < 20000; ++i) {
            const PageId p = rng.below(40);
            const bool w = rng.bernoulli(0.3);
            const bool was_pcm = ms.location(p) == Location::InPCM;
            if (was_pcm) ++since[p];
            const auto out = ms.access(p * kPageBytes + rng.below(128) * 64, w);
            if (out.kind != AccessOutcome::Kind::Migrate) continue;
            ASSERT_GE(since[p], th);
            since[p] = 0;
            if (out.plan.victim) since[*out.plan.victim] = 0;
            ms.complete(out.plan);
            ASSERT_LE(ms.resident_pages(), 8u);
        }
    }
}

// Single core: with several cores the latency difference reorders the
// interleaving of their accesses.
TEST(Property, SeqAndParHardwareCachesAgreeFunctionally) {
    const auto cfg = small_config();
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const auto t = random_trace(seed, kGenerators[seed % 3], 1024, 6000, 1);
        const auto a = run_scheme(SchemeId::HwCacheSeq, t, cfg);
        const auto b = run_scheme(SchemeId::HwCachePar, t, cfg);
        EXPECT_EQ(a.dram_misses, b.dram_misses);
        EXPECT_EQ(a.migrations, b.migrations);
        EXPECT_EQ(a.wear.entries(), b.wear.entries());
    }
}

TEST(Property, SubblockMonotonicity) {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        const auto t = random_trace(seed, kGenerators[seed % 3], 512, 8000, 2, 0.5);
        std::vector<std::uint64_t> bytes;
        for (std::uint32_t sub : {128u, 512u, 0u}) {
            auto cfg = small_config(32);
            cfg.migrantstore.threshold = 2;
            cfg.migrantstore.subblock_bytes = sub;
            bytes.push_back(run_scheme(SchemeId::MigrantStore, t, cfg).pcm_writeback_bytes());
        }
        EXPECT_LE(bytes[0], bytes[1]) << "seed " << seed;
        EXPECT_LE(bytes[1], bytes[2]) << "seed " << seed;
    }
}

TEST(Property, HigherThresholdMigratesLess) {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        const auto t = random_trace(seed, kGenerators[seed % 3], 512, 8000);
        auto cfg = small_config(32);
        cfg.migrantstore.threshold = 16;
        const auto h16 = run_scheme(SchemeId::MigrantStore, t, cfg).migrations;
        cfg.migrantstore.threshold = 64;
        const auto h64 = run_scheme(SchemeId::MigrantStore, t, cfg).migrations;
        EXPECT_LE(h64, h16) << "seed " << seed;
    }
}

TEST(Property, RapidLruMatchesPerfectLruWithFewTouchesBetweenMigrations) {
    // 24-page footprint, 8-page store: no more than 8 distinct resident
    // pages can be touched between consecutive migrations.
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const auto t = random_trace(seed, Generator::Zipf, 24, 5000, 1);
        auto cfg = small_config(8);
        cfg.migrantstore.threshold = 1;
        cfg.migrantstore.replacement = Replacement::RapidLru;
        const auto rapid = run_scheme(SchemeId::MigrantStore, t, cfg);
        cfg.migrantstore.replacement = Replacement::PerfectLru;
        const auto perfect = run_scheme(SchemeId::MigrantStore, t, cfg);
        ASSERT_EQ(rapid.victims.size(), perfect.victims.size());
        for (std::size_t i = 0; i < rapid.victims.size(); ++i) {
            ASSERT_EQ(rapid.victims[i].demand, perfect.victims[i].demand) << i;
            ASSERT_EQ(rapid.victims[i].victim, perfect.victims[i].victim) << i;
        }
    }
}

TEST(Property, OrderingOnHighLocalityTrace) {
    auto cfg = small_config(128);
    SyntheticSpec sp;
    sp.footprint_pages = 256;
    sp.zipf_exponent = 1.2;
    sp.records = 20000;
    sp.gap_cycles = 300;
    const auto t = generate(sp);
    const auto dram = run_scheme(SchemeId::DramIdeal, t, cfg);
    const auto ms = run_scheme(SchemeId::MigrantStore, t, cfg);
    const auto pcm = run_scheme(SchemeId::PcmOnly, t, cfg);
    EXPECT_LE(dram.exec_cycles, ms.exec_cycles);
    EXPECT_LE(ms.exec_cycles, pcm.exec_cycles);
    EXPECT_GT(pcm.busy_bank_cycles(), dram.busy_bank_cycles());
}
