#pragma once

// Test-only oracles and sweep checkers. Nothing here calls into the code
// paths it is used to check.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "devalloc/core.hpp"

namespace devalloc::testing {

// Empty string when the ranges are pairwise disjoint, else a description.
inline std::string disjointness_violation(std::vector<block_range> ranges) {
  std::sort(ranges.begin(), ranges.end(), [](const auto& a, const auto& b) { return a.addr < b.addr; });
  for (std::size_t i = 1; i < ranges.size(); ++i)
    if (ranges[i - 1].end() > ranges[i].addr)
      return "overlap at " + std::to_string(ranges[i].addr);
  return {};
}

// Empty string when used and free ranges cover [0, heap_size) exactly once.
inline std::string tiling_violation(std::vector<block_range> used, const std::vector<block_range>& free_ranges,
                                    std::uint64_t heap_size) {
  used.insert(used.end(), free_ranges.begin(), free_ranges.end());
  std::sort(used.begin(), used.end(), [](const auto& a, const auto& b) { return a.addr < b.addr; });
  std::uint64_t at = 0;
  for (const auto& r : used) {
    if (r.addr != at) return "gap or overlap at " + std::to_string(at);
    at = r.end();
  }
  if (at != heap_size) return "coverage ends at " + std::to_string(at);
  return {};
}

// Per-bit reference for the bitmask allocator: same next-fit rule (first
// start position in circular order from the cursor whose run of free bits is
// long enough and does not wrap), scanned one bit at a time.
class bit_scanner_oracle {
 public:
  explicit bit_scanner_oracle(std::uint64_t granules) : bits_(granules, true) {}

  std::optional<std::uint64_t> alloc(std::uint64_t run) {
    const std::uint64_t n = bits_.size();
    std::optional<std::uint64_t> found;
    std::uint64_t len = 0;
    for (std::uint64_t p = cursor_; p < n && !found; ++p) {
      len = bits_[p] ? len + 1 : 0;
      if (len == run) found = p + 1 - run;
    }
    len = 0;
    for (std::uint64_t p = 0; p < n && !found; ++p) {
      len = bits_[p] ? len + 1 : 0;
      if (len == run) {
        if (p + 1 - run >= cursor_) break;
        found = p + 1 - run;
      }
    }
    if (!found) return std::nullopt;
    for (std::uint64_t i = 0; i < run; ++i) bits_[*found + i] = false;
    cursor_ = *found + run == n ? 0 : *found + run;
    return found;
  }

  void release(std::uint64_t start, std::uint64_t run) {
    for (std::uint64_t i = 0; i < run; ++i) bits_[start + i] = true;
  }

  bool bit(std::uint64_t i) const { return bits_[i]; }
  std::uint64_t cursor() const { return cursor_; }

 private:
  std::vector<bool> bits_;
  std::uint64_t cursor_ = 0;
};

// A random mixed workload over a fixed number of slots. Each step either
// allocates into an empty slot, frees a live slot, or (with pfree_rate) frees
// the tail of a live slot at a granule-aligned interior offset.
struct random_workload {
  std::uint64_t min_size = 8;
  std::uint64_t max_size = 4096;
  std::uint32_t slots = 64;
  double pfree_rate = 0.0;
};

template <typename Allocator, typename AfterOp>
void drive(Allocator& a, const random_workload& w, std::uint64_t ops, std::uint64_t seed, AfterOp&& after) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::uint32_t> slot_of(0, w.slots - 1);
  std::uniform_int_distribution<std::uint64_t> size_of(w.min_size, w.max_size);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const std::uint64_t g = a.config().min_granule;

  struct live_block {
    address addr = null_address;
    std::uint64_t size = 0;
  };
  std::vector<live_block> live(w.slots);
  for (std::uint64_t op = 0; op < ops; ++op) {
    live_block& s = live[slot_of(rng)];
    if (s.addr == null_address) {
      const std::uint64_t size = size_of(rng);
      const auto r = a.alloc(size);
      if (r) s = {*r, (size + g - 1) / g * g};
      after(op, r.has_value() ? *r : null_address);
    } else if (w.pfree_rate > 0.0 && s.size >= 2 * g && coin(rng) < w.pfree_rate) {
      std::uniform_int_distribution<std::uint64_t> cut(1, s.size / g - 1);
      const std::uint64_t offset = cut(rng) * g;
      a.free(s.addr + offset).value();
      s.size = offset;
      after(op, null_address);
    } else {
      a.free(s.addr).value();
      s = {};
      after(op, null_address);
    }
  }
}

}  // namespace devalloc::testing
