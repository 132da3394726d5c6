#include <gtest/gtest.h>

#include "migrant/devices.hpp"

using namespace migrant;

TEST(AddressMap, InterleavesBlocksAcrossBanks) {
    const auto g = presets::pcm();
    EXPECT_EQ(map_address(0, g), (BankAddress{0, 0, 0}));
    EXPECT_EQ(map_address(64, g), (BankAddress{1, 0, 0}));
    EXPECT_EQ(map_address(63 * 64, g), (BankAddress{63, 0, 0}));
    EXPECT_EQ(map_address(64 * 64, g), (BankAddress{0, 0, 64}));
    // One row per bank covers 8 KB x 64 banks = 512 KB of address space.
    EXPECT_EQ(map_address(512 * 1024, g), (BankAddress{0, 1, 0}));
    EXPECT_EQ(map_address(512 * 1024 + 65, g), (BankAddress{1, 1, 1}));
    EXPECT_THROW(map_address(g.capacity, g), TraceError);
}

TEST(AddressMap, GlobalAddressInvertsLocalOffset) {
    const auto g = presets::migrantstore_dram();
    for (Addr a : {Addr{0}, Addr{64}, Addr{4160}, Addr{1234567 * 64}, Addr{g.capacity - 64}}) {
        const auto b = map_address(a, g);
        EXPECT_EQ(global_address(b.bank, bank_local_offset(a, g), g), a);
    }
}

TEST(Energy, TableValues) {
    const auto p = presets::pcm();
    EXPECT_DOUBLE_EQ(access_energy(p, MemOp::Read, false), 33);
    EXPECT_DOUBLE_EQ(access_energy(p, MemOp::Read, true), 16);
    EXPECT_DOUBLE_EQ(access_energy(p, MemOp::Write64, false), 36);
    EXPECT_DOUBLE_EQ(access_energy(p, MemOp::WriteSubblock, false, 512), 170);
    const auto d = presets::base_dram();
    EXPECT_DOUBLE_EQ(access_energy(d, MemOp::Read, false), 33);
    EXPECT_DOUBLE_EQ(access_energy(d, MemOp::Read, true), 16);
    const auto m = presets::migrantstore_dram();
    EXPECT_DOUBLE_EQ(access_energy(m, MemOp::Read, false), 15);
    EXPECT_DOUBLE_EQ(access_energy(m, MemOp::Write64, true), 4);
    EXPECT_DOUBLE_EQ(access_energy(presets::hwcache_dram(true), MemOp::Read, false), 29);
    EXPECT_DOUBLE_EQ(access_energy(presets::hwcache_dram(true), MemOp::Read, true), 8);
    EXPECT_DOUBLE_EQ(access_energy(presets::hwcache_dram(false), MemOp::Read, false), 15);
}

// Affine through (64 B, 36 nJ) and (512 B, 170 nJ).
TEST(Energy, SelectiveWriteInterpolation) {
    const auto p = presets::pcm();
    EXPECT_DOUBLE_EQ(selective_write_nj(p, 64), 36);
    EXPECT_NEAR(selective_write_nj(p, 128), 36 + 134.0 / 448 * 64, 1e-9);  // 55.142857
    EXPECT_NEAR(selective_write_nj(p, 8192), 2467.142857, 1e-5);
    EXPECT_EQ(subblock_burst_pj(p, 512), 21250);
    EXPECT_EQ(subblock_burst_pj(p, 64), 36000);
}

TEST(Energy, SelectiveUpdateRatioIsRowOverBlock) {
    EXPECT_EQ(selective_update_ratio(presets::pcm()), 128u);
    auto g = presets::pcm();
    g.row_bytes = 4096;
    EXPECT_EQ(selective_update_ratio(g), 64u);
}

TEST(Energy, Leakage) {
    const auto p = presets::pcm();
    EXPECT_NEAR(leakage_energy(p, 2000), 6.4, 1e-12);  // 1 us at 2 GHz
    EXPECT_NEAR(leakage_energy(p, 2'000'000'000), 6.4e6, 1e-3);
    EXPECT_EQ(leakage_energy_pj(6.4, 2000, 2e9), 6400);
    EXPECT_THROW(leakage_energy(p, 1, 0.0), ConfigError);
}

TEST(Bus, TransferCycles) {
    EXPECT_EQ(bus_transfer_cycles(64), 20u);
    EXPECT_EQ(bus_transfer_cycles(32), 10u);
    EXPECT_EQ(bus_transfer_cycles(8192), 2560u);
    EXPECT_THROW(bus_transfer_cycles(0), ConfigError);
    BusState b;
    EXPECT_EQ(b.reserve(100, 64), 120u);
    EXPECT_EQ(b.reserve(105, 64), 140u);  // queued behind the first
}

TEST(Bank, ColdAndRowHitLatencies) {
    const auto p = presets::pcm();
    BankState bank(0, p);
    BusState bus;
    auto r = schedule_access(bank, bus, p, MemOp::Read, 0, 0);
    EXPECT_FALSE(r.row_hit);
    EXPECT_EQ(r.device_done, 550u);
    EXPECT_EQ(r.completion, 570u);
    r = schedule_access(bank, bus, p, MemOp::Read, 64 * 64, 0);  // same bank, same row
    EXPECT_TRUE(r.row_hit);
    EXPECT_EQ(r.start, 550u);
    EXPECT_EQ(r.device_done, 770u);
    EXPECT_EQ(r.completion, 790u);
}

TEST(Bank, WriteTransfersFirst) {
    const auto p = presets::pcm();
    BankState bank(0, p);
    BusState bus;
    const auto r = schedule_access(bank, bus, p, MemOp::Write64, 0, 0);
    EXPECT_EQ(r.start, 20u);
    EXPECT_EQ(r.completion, 1450u);
}

TEST(Bank, DramLatencies) {
    BankState a(0, presets::base_dram());
    BusState bus;
    EXPECT_EQ(schedule_access(a, bus, presets::base_dram(), MemOp::Read, 0, 0).completion, 240u);
    BankState b(0, presets::migrantstore_dram());
    BusState bus2;
    EXPECT_EQ(schedule_access(b, bus2, presets::migrantstore_dram(), MemOp::Read, 0, 0).completion, 180u);
}

TEST(Bank, OpenRowChangesOnMiss) {
    const auto p = presets::pcm();
    BankState bank(0, p);
    const Addr row1 = 512 * 1024;
    auto s = bank.serve(p, MemOp::Read, 0, 0);
    EXPECT_FALSE(s.row_hit);
    EXPECT_EQ(bank.open_row(), 0u);
    s = bank.serve(p, MemOp::Read, row1, bank.busy_until());
    EXPECT_FALSE(s.row_hit);
    EXPECT_EQ(bank.open_row(), 1u);
    s = bank.serve(p, MemOp::Read, 0, bank.busy_until());
    EXPECT_FALSE(s.row_hit);
    EXPECT_EQ(bank.busy_cycles(), 1650u);
    EXPECT_THROW(bank.serve(p, MemOp::Read, 0, 0), InvariantError);
}

TEST(Bank, SubblockBurstAlwaysPaysSelectiveEnergy) {
    const auto p = presets::pcm();
    BankState bank(0, p);
    bank.serve(p, MemOp::Read, 0, 0);
    const auto s = bank.serve(p, MemOp::WriteSubblock, 64 * 64, bank.busy_until(), 512);
    EXPECT_TRUE(s.row_hit);
    ASSERT_EQ(s.num_charges, 1u);
    EXPECT_EQ(s.charges[0].pj, 21250);
}

namespace {
DeviceGeometry buffered_pcm() {
    auto g = presets::pcm();
    g.row_buffers = 8;
    g.row_buffer_bytes = 2048;
    g.buffered_writes = true;
    return g;
}
}  // namespace

TEST(RowBuffers, DirtyEvictionIsWriteBeforeRead) {
    const auto g = buffered_pcm();
    BankState bank(0, g);
    // Bank-local segment k starts at local offset 2048 k.
    auto seg = [&](std::uint64_t k) { return global_address(0, k * 2048, g); };
    auto s = bank.serve(g, MemOp::Write64, seg(0), 0);
    EXPECT_EQ(s.device_cycles, 550u);  // fill from the array
    EXPECT_TRUE(s.written_back.empty());
    for (std::uint64_t k = 1; k < 8; ++k) bank.serve(g, MemOp::Read, seg(k), bank.busy_until());
    s = bank.serve(g, MemOp::Write64, seg(0) , bank.busy_until());
    EXPECT_TRUE(s.row_hit);
    EXPECT_EQ(s.device_cycles, 220u);
    for (std::uint64_t k = 1; k < 8; ++k) bank.serve(g, MemOp::Read, seg(k), bank.busy_until());  // segment 0 is now LRU
    s = bank.serve(g, MemOp::Read, seg(8), bank.busy_until());
    EXPECT_FALSE(s.row_hit);
    EXPECT_EQ(s.device_cycles, 1430u + 550u);
    ASSERT_EQ(s.written_back.size(), 1u);
    EXPECT_EQ(s.written_back[0], seg(0));
    ASSERT_EQ(s.num_charges, 2u);
    EXPECT_EQ(s.charges[0].cls, EnergyClass::BufferWriteback);
    EXPECT_EQ(s.charges[0].pj, 36000);
}

TEST(RowBuffers, CleanEvictionCostsOnlyTheRead) {
    const auto g = buffered_pcm();
    BankState bank(0, g);
    auto seg = [&](std::uint64_t k) { return global_address(0, k * 2048, g); };
    for (std::uint64_t k = 0; k < 9; ++k) {
        const auto s = bank.serve(g, MemOp::Read, seg(k), bank.busy_until());
        EXPECT_EQ(s.device_cycles, 550u);
        EXPECT_TRUE(s.written_back.empty());
    }
}

TEST(Geometry, Validation) {
    auto g = presets::pcm();
    g.num_banks = 0;
    EXPECT_THROW(g.validate(), ConfigError);
    g = presets::pcm();
    g.row_hit_fraction = 0;
    EXPECT_THROW(g.validate(), ConfigError);
    g = presets::pcm();
    g.row_bytes = 100;
    EXPECT_THROW(g.validate(), ConfigError);
    EXPECT_NO_THROW(buffered_pcm().validate());
}
