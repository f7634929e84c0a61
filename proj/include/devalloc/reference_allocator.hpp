#pragma once

// Deliberately naive reference allocator: flat address-sorted vectors and
// linear scans. It exists to produce expected address sequences for the
// sequential fits and is registered in the bench as "oracle".

#include <algorithm>
#include <cstdint>
#include <optional>
#include <vector>

#include "devalloc/core.hpp"

namespace devalloc {

enum class fit_policy { best, first, next };

constexpr std::string_view to_string(fit_policy p) noexcept {
  switch (p) {
    case fit_policy::best: return "best";
    case fit_policy::first: return "first";
    case fit_policy::next: return "next";
  }
  return "unknown";
}

// Picks a range index out of an address-sorted list of free ranges.
//
// Next fit resumes at `rover`: the free range containing it, or the first one
// starting above it, wrapping to the lowest range. Best fit breaks ties by
// lowest address and stops at an exact match.
inline std::optional<std::size_t> oracle_pick(const std::vector<block_range>& free_ranges,
                                              std::uint64_t size, fit_policy policy,
                                              address rover = 0) {
  const std::size_t n = free_ranges.size();
  switch (policy) {
    case fit_policy::first:
      for (std::size_t i = 0; i < n; ++i)
        if (free_ranges[i].size >= size) return i;
      return std::nullopt;
    case fit_policy::best: {
      std::optional<std::size_t> best;
      for (std::size_t i = 0; i < n; ++i) {
        const auto s = free_ranges[i].size;
        if (s < size) continue;
        if (!best || s < free_ranges[*best].size) best = i;
        if (s == size) break;
      }
      return best;
    }
    case fit_policy::next: {
      std::size_t start = 0;
      while (start < n && free_ranges[start].end() <= rover) ++start;
      if (start == n) start = 0;
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t i = (start + k) % n;
        if (free_ranges[i].size >= size) return i;
      }
      return std::nullopt;
    }
  }
  return std::nullopt;
}

class reference_allocator {
 public:
  explicit reference_allocator(heap_config cfg, fit_policy policy = fit_policy::best)
      : cfg_(cfg), policy_(policy) {
    cfg_.validate();
    free_.push_back({0, cfg_.heap_size});
  }

  result<address> alloc(std::uint64_t size) {
    if (size == 0) return alloc_error::zero_size;
    const std::uint64_t need = cfg_.round_up(size);
    if (need == 0 || need > cfg_.heap_size) return alloc_error::size_overflow;

    const auto pick = oracle_pick(free_, need, policy_, rover_);
    if (!pick) return alloc_error::out_of_memory;

    block_range& r = free_[*pick];
    const address addr = r.addr;
    if (r.size > need) {
      r.addr += need;
      r.size -= need;
      rover_ = r.addr;
    } else {
      rover_ = r.end();
      free_.erase(free_.begin() + static_cast<std::ptrdiff_t>(*pick));
    }

    auto pos = std::find_if(used_.begin(), used_.end(), [&](const block_range& b) { return b.addr > addr; });
    used_.insert(pos, {addr, need});
    usage_.on_alloc(addr, need);
    return addr;
  }

  // Freeing an interior address releases the tail of the block from that
  // address on; the head stays live.
  result<void> free(address addr) {
    auto it = std::find_if(used_.begin(), used_.end(), [&](const block_range& b) { return b.contains(addr); });
    if (it == used_.end()) {
      const bool in_free = std::any_of(free_.begin(), free_.end(), [&](const block_range& b) { return b.contains(addr); });
      return in_free ? alloc_error::double_free : alloc_error::invalid_free;
    }

    block_range released;
    if (it->addr == addr) {
      released = *it;
      used_.erase(it);
    } else {
      if (addr % cfg_.min_granule != 0) return alloc_error::invalid_free;
      released = {addr, it->end() - addr};
      it->size = addr - it->addr;
    }
    usage_.on_release(released.size);
    release(released);
    return {};
  }

  overhead_stats stats() const {
    overhead_stats s;
    s.host_metadata_bytes = (free_.capacity() + used_.capacity()) * sizeof(block_range);
    s.managed_bytes = cfg_.heap_size;
    s.live_bytes = usage_.live_bytes();
    s.reserved_bytes = usage_.reserved_bytes();
    return s;
  }

  std::vector<block_range> used_blocks() const { return used_; }
  std::vector<block_range> free_blocks() const { return free_; }
  const heap_config& config() const noexcept { return cfg_; }
  fit_policy policy() const noexcept { return policy_; }
  address rover() const noexcept { return rover_; }

 private:
  void release(block_range r) {
    auto right = std::find_if(free_.begin(), free_.end(), [&](const block_range& b) { return b.addr > r.addr; });
    const bool merge_left = right != free_.begin() && std::prev(right)->end() == r.addr;
    const bool merge_right = right != free_.end() && right->addr == r.end();
    if (merge_left && merge_right) {
      auto left = std::prev(right);
      left->size = right->end() - left->addr;
      free_.erase(right);
    } else if (merge_left) {
      std::prev(right)->size += r.size;
    } else if (merge_right) {
      right->addr = r.addr;
      right->size += r.size;
    } else {
      free_.insert(right, r);
    }
  }

  heap_config cfg_;
  fit_policy policy_;
  std::vector<block_range> free_;
  std::vector<block_range> used_;
  address rover_ = 0;
  usage_tracker usage_;
};

}  // namespace devalloc
