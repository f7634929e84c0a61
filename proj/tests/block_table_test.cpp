#include <gtest/gtest.h>

#include <map>
#include <random>

#include "devalloc/block_table.hpp"

namespace devalloc {
namespace {

block_entry entry(address addr, std::uint64_t size) {
  block_entry e;
  e.addr = addr;
  e.size = size;
  return e;
}

TEST(BlockTable, EntryIsSixWords) { EXPECT_EQ(sizeof(block_entry), 48u); }

TEST(BlockTable, PutGetRoundTripsAllFields) {
  block_table t;
  block_entry e = entry(64, 128);
  e.free = 1;
  e.next_free = 512;
  e.prev_free = 1024;
  e.prev_adj = 0;
  t.put(e);
  const auto got = t.get(64);
  ASSERT_TRUE(got);
  EXPECT_EQ(got->addr, 64u);
  EXPECT_EQ(got->size, 128u);
  EXPECT_EQ(got->free, 1u);
  EXPECT_EQ(got->next_free, 512u);
  EXPECT_EQ(got->prev_free, 1024u);
  EXPECT_EQ(got->prev_adj, 0u);
  EXPECT_FALSE(t.get(72));
}

TEST(BlockTable, PutOverwritesExistingKey) {
  block_table t;
  t.put(entry(0, 8));
  t.put(entry(0, 16));
  EXPECT_EQ(t.size(), 1u);
  EXPECT_EQ(t.get(0)->size, 16u);
}

TEST(BlockTable, ResizePreservesEntries) {
  block_table t(8, 4);
  for (address a = 0; a < 8 * 100; a += 8) t.put(entry(a, 8));
  EXPECT_GT(t.counters().resizes, 0u);
  EXPECT_LE(t.load(), block_table::max_load);
  for (address a = 0; a < 8 * 100; a += 8) ASSERT_TRUE(t.contains(a)) << a;
}

TEST(BlockTable, CollidingKeysBothRetrievable) {
  block_table t(8, 2);  // two buckets: any three keys force a shared chain
  t.put(entry(0, 8));
  t.put(entry(8, 8));
  t.put(entry(16, 8));
  EXPECT_EQ(t.get(0)->size, 8u);
  EXPECT_EQ(t.get(8)->size, 8u);
  EXPECT_EQ(t.get(16)->size, 8u);
  t.remove(8);
  EXPECT_FALSE(t.contains(8));
  EXPECT_TRUE(t.contains(0));
  EXPECT_TRUE(t.contains(16));
}

TEST(BlockTable, RemovingAbsentKeyIsCorruption) {
  block_table t;
  EXPECT_THROW(t.remove(0), std::logic_error);
}

TEST(BlockTable, EmptyTableOverheadIsBucketsOnly) {
  block_table t(8, 16);
  EXPECT_EQ(t.entry_bytes(), 0u);
  EXPECT_EQ(t.host_bytes(), 16u * 8);
}

TEST(BlockTable, RandomOpsMatchFlatMap) {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<address> key(0, 4095);
  block_table t;
  std::map<address, std::uint64_t> flat;
  for (int i = 0; i < 10000; ++i) {
    const address a = key(rng) * 8;
    if (flat.count(a) && rng() % 2) {
      t.remove(a);
      flat.erase(a);
    } else {
      const std::uint64_t size = (rng() % 64 + 1) * 8;
      t.put(entry(a, size));
      flat[a] = size;
    }
  }
  ASSERT_EQ(t.size(), flat.size());
  for (const auto& [a, size] : flat) ASSERT_EQ(t.get(a)->size, size);
  std::size_t seen = 0;
  t.for_each([&](const block_entry& e) {
    ++seen;
    EXPECT_EQ(flat.at(e.addr), e.size);
  });
  EXPECT_EQ(seen, flat.size());
}

// Probabilistic smoke bound: random granule-aligned keys at load <= 0.75
// should never chain deeper than 16.
TEST(BlockTable, ChainsStayShortOnRandomKeys) {
  std::mt19937_64 rng(21);
  for (int round = 0; round < 5; ++round) {
    block_table t;
    for (int i = 0; i < 50000; ++i) t.put(entry((rng() >> 20) * 8, 8));
    EXPECT_LE(t.load(), block_table::max_load);
    EXPECT_LE(t.max_chain_length(), 16u);
  }
}

}  // namespace
}  // namespace devalloc
