#include <gtest/gtest.h>

#include <random>

#include "devalloc/segregated_fit.hpp"
#include "support/checkers.hpp"

namespace devalloc {
namespace {

TEST(SegregatedBins, FreeAndRequestClasses) {
  const segregated_bins bins(1 << 20);
  EXPECT_EQ(segregated_bins::bin_for_free(3000), 11u);
  EXPECT_EQ(segregated_bins::bin_for_free(4096), 12u);
  EXPECT_EQ(segregated_bins::bin_for_free(4095), 11u);
  EXPECT_EQ(*bins.bin_for_request(1000), 10u);
  EXPECT_EQ(*bins.bin_for_request(1024), 10u);
  EXPECT_EQ(*bins.bin_for_request(1025), 11u);
  EXPECT_EQ(bins.bin_for_request((1 << 20) + 1).error(), alloc_error::size_overflow);
  // Fits the heap, but its class would start past the heap size.
  EXPECT_EQ(segregated_bins(3 << 19).bin_for_request(3 << 19).error(), alloc_error::size_overflow);
}

TEST(SegregatedBins, FindUsesFirstMarkedClassAtOrAbove) {
  segregated_bins bins(1 << 20);
  EXPECT_EQ(bins.find(64).error(), alloc_error::out_of_memory);
  bins.mark(5);
  bins.mark(14);
  EXPECT_EQ(*bins.find(20), 5u);
  EXPECT_EQ(*bins.find(33), 14u);
  EXPECT_EQ(bins.find(1 << 15).error(), alloc_error::out_of_memory);
  bins.unmark(14);
  EXPECT_EQ(bins.find(33).error(), alloc_error::out_of_memory);
}

TEST(TwoLevelBins, MappingMatchesEdgeScan) {
  const two_level_bins bins(1ull << 40);
  EXPECT_EQ(bins.mapping(2432), (two_level_bins::index{11, 3}));
  EXPECT_EQ(bins.mapping(4096), (two_level_bins::index{12, 0}));
  // Independent form: the list is the number of list boundaries at or below
  // the size within its power-of-two range.
  for (std::uint64_t s = 16; s < (1u << 16); ++s) {
    const unsigned fl = floor_log2(s);
    const std::uint64_t step = (std::uint64_t{1} << fl) / 16;
    unsigned sl = 0;
    for (std::uint64_t edge = (std::uint64_t{1} << fl) + step; edge <= s; edge += step) ++sl;
    ASSERT_EQ(bins.mapping(s), (two_level_bins::index{fl, sl})) << s;
  }
}

TEST(TwoLevelBins, SmallSizesGetExactLists) {
  const two_level_bins bins(1 << 20);
  for (std::uint64_t s = 1; s < 16; ++s)
    for (std::uint64_t t = s + 1; t < 16; ++t) ASSERT_NE(bins.bin_for_free(s), bins.bin_for_free(t));
}

TEST(TwoLevelBins, FindSkipsToNextFirstLevel) {
  two_level_bins bins(1 << 20);
  bins.mark(bins.flat({12, 0}));
  EXPECT_EQ(*bins.find_index(1152), (two_level_bins::index{12, 0}));
  EXPECT_EQ(bins.find_index(4097).error(), alloc_error::out_of_memory);
  EXPECT_EQ(bins.find_index((1 << 20) + 1).error(), alloc_error::size_overflow);
}

// Brute force over every list: the chosen list is the lowest nonempty one
// whose smallest member size is at least the request.
TEST(TwoLevelBins, FindMatchesBruteForce) {
  std::mt19937_64 rng(17);
  two_level_bins bins(1ull << 30);
  const auto lower_edge = [&](std::size_t bin) {
    const auto i = bins.split(bin);
    const std::uint64_t base = std::uint64_t{1} << i.fl;
    return i.fl >= 4 ? base + i.sl * (base / 16) : base + (i.sl * base) / 16;
  };
  for (int round = 0; round < 200; ++round) {
    two_level_bins b(1ull << 30);
    std::vector<std::size_t> marked;
    for (int k = 0; k < 6; ++k) {
      const std::size_t bin = rng() % (31 * 16);
      b.mark(bin);
      marked.push_back(bin);
    }
    for (int q = 0; q < 50; ++q) {
      const std::uint64_t size = 1 + rng() % (1ull << (rng() % 30));
      std::optional<std::size_t> want;
      for (std::size_t bin = 0; bin < b.bin_count(); ++bin)
        if (b.marked(bin) && lower_edge(bin) >= size) {
          want = bin;
          break;
        }
      const auto got = b.find(size);
      ASSERT_EQ(got.has_value(), want.has_value()) << size;
      if (want) {
        ASSERT_EQ(*got, *want) << size;
      }
    }
  }
}

TEST(SegregatedFit, FreshHeapSplitsIntoHighClass) {
  segregated_fit a(heap_config{1 << 20});
  EXPECT_EQ(*a.alloc(1000), 0u);
  EXPECT_EQ(a.free_blocks(), (std::vector<block_range>{{1000, (1 << 20) - 1000}}));
  EXPECT_EQ(a.list_head(19), 1000u);
  EXPECT_TRUE(a.bins().marked(19));
  EXPECT_FALSE(a.bins().marked(20));
  EXPECT_EQ(a.table().get(1000)->prev_adj, 0u);
  a.check_invariants();
}

TEST(SegregatedFit, ExactSizeDoesNotSplit) {
  segregated_fit a(heap_config{4096});
  EXPECT_EQ(*a.alloc(4096), 0u);
  EXPECT_TRUE(a.free_blocks().empty());
  EXPECT_EQ(a.bins().first_level(), 0u);
  EXPECT_EQ(a.table().size(), 1u);
  EXPECT_EQ(a.alloc(8).error(), alloc_error::out_of_memory);
}

// Heap carved into A B C D E of 64 bytes each; frees exercise every
// neighbour combination.
class FreeCases : public ::testing::Test {
 protected:
  FreeCases() {
    for (int i = 0; i < 5; ++i) p.push_back(*a.alloc(64));
  }
  segregated_fit a{heap_config{320}};
  std::vector<address> p;
};

TEST_F(FreeCases, NoFreeNeighbour) {
  a.free(p[2]).value();
  EXPECT_EQ(a.free_blocks(), (std::vector<block_range>{{128, 64}}));
  EXPECT_EQ(a.list_head(6), 128u);
  a.check_invariants();
}

TEST_F(FreeCases, FreeLeftNeighbour) {
  a.free(p[1]).value();
  a.free(p[2]).value();
  EXPECT_EQ(a.free_blocks(), (std::vector<block_range>{{64, 128}}));
  EXPECT_FALSE(a.table().contains(128));
  EXPECT_EQ(a.table().get(192)->prev_adj, 64u);
  EXPECT_EQ(a.list_head(7), 64u);
  EXPECT_FALSE(a.bins().marked(6));
  a.check_invariants();
}

TEST_F(FreeCases, FreeRightNeighbour) {
  a.free(p[3]).value();
  a.free(p[2]).value();
  EXPECT_EQ(a.free_blocks(), (std::vector<block_range>{{128, 128}}));
  EXPECT_FALSE(a.table().contains(192));
  EXPECT_EQ(a.table().get(256)->prev_adj, 128u);
  a.check_invariants();
}

TEST_F(FreeCases, BothNeighboursFree) {
  a.free(p[1]).value();
  a.free(p[3]).value();
  a.free(p[2]).value();
  EXPECT_EQ(a.free_blocks(), (std::vector<block_range>{{64, 192}}));
  EXPECT_EQ(a.table().size(), 3u);
  EXPECT_EQ(a.table().get(256)->prev_adj, 64u);
  EXPECT_FALSE(a.bins().marked(6));
  a.check_invariants();
}

TEST_F(FreeCases, FullCycleRestoresSingleBlock) {
  for (int i : {4, 0, 2, 1, 3}) a.free(p[i]).value();
  EXPECT_EQ(a.free_blocks(), (std::vector<block_range>{{0, 320}}));
  EXPECT_EQ(a.table().size(), 1u);
  EXPECT_EQ(a.bins().first_level(), std::uint64_t{1} << 8);
  // 320 bytes would need class 9, which starts past the heap end.
  EXPECT_EQ(a.alloc(320).error(), alloc_error::size_overflow);
  EXPECT_EQ(*a.alloc(256), 0u);
}

TEST_F(FreeCases, BadFrees) {
  EXPECT_EQ(a.free(8).error(), alloc_error::invalid_free);
  a.free(p[0]).value();
  EXPECT_EQ(a.free(p[0]).error(), alloc_error::double_free);
  EXPECT_EQ(a.alloc(0).error(), alloc_error::zero_size);
}

TEST(SegregatedFit, ReusesMostRecentlyFreedBlock) {
  segregated_fit a(heap_config{1024});
  std::vector<address> p;
  for (int i = 0; i < 8; ++i) p.push_back(*a.alloc(64));
  a.free(p[1]).value();
  a.free(p[5]).value();
  a.free(p[3]).value();
  EXPECT_EQ(*a.alloc(64), p[3]);
  EXPECT_EQ(*a.alloc(64), p[5]);
}

template <typename Alloc>
void random_trace_keeps_invariants(Alloc a) {
  const auto cfg = a.config();
  testing::drive(a, {8, 16384, 128, 0}, 10000, 99, [&](std::uint64_t, address) {
    a.check_invariants();
    ASSERT_TRUE(testing::tiling_violation(a.used_blocks(), a.free_blocks(), cfg.heap_size).empty());
  });
  for (const auto& b : a.used_blocks()) a.free(b.addr).value();
  EXPECT_EQ(a.free_blocks(), (std::vector<block_range>{{0, cfg.heap_size}}));
}

TEST(SegregatedFit, RandomTraceKeepsInvariants) { random_trace_keeps_invariants(segregated_fit(heap_config{1 << 20})); }
TEST(Tlsf, RandomTraceKeepsInvariants) { random_trace_keeps_invariants(tlsf_allocator(heap_config{1 << 20})); }

// Per-op bound from the code shape: an alloc does at most 5 table probes and
// a free at most 11; link edits and bitmap updates are at most 8 and 3.
TEST(SegregatedFit, StepsPerOperationAreBounded) {
  segregated_fit a(heap_config{1 << 24});
  testing::drive(a, {8, 65536, 512, 0}, 20000, 4, [&](std::uint64_t, address) {
    const auto& s = a.last_steps();
    ASSERT_LE(s.table_probes, 11u);
    ASSERT_LE(s.link_edits, 8u);
    ASSERT_LE(s.bitmap_ops, 3u);
  });
}

TEST(SegregatedFit, ChosenBlockUnderFourTimesRequest) {
  for (std::uint64_t r = 8; r <= 8192; r += 56) {
    const unsigned b = ceil_log2(r);
    for (std::uint64_t x = std::uint64_t{1} << b; x < (std::uint64_t{2} << b); x += 8 * ((x >> 9) + 1)) {
      segregated_fit a(heap_config{x});
      ASSERT_TRUE(a.alloc(r)) << r << " in " << x;
      ASSERT_LT(static_cast<double>(a.last_block_size()) / static_cast<double>(r), 4.0);
    }
  }
}

}  // namespace
}  // namespace devalloc
