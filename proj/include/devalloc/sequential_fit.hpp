#pragma once

// Best, first and next fit over two hybrid array lists: one for free ranges
// and one for in-use ranges. Both lists are address sorted; together they
// tile the heap.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "devalloc/core.hpp"
#include "devalloc/hybrid_array_list.hpp"
#include "devalloc/reference_allocator.hpp"

namespace devalloc {

// One-word HAL entry: granule-unit address in the high half, granule-unit
// size in the low half. Ordering by the raw word is ordering by address.
struct packed_range {
  std::uint64_t bits = 0;

  static constexpr packed_range make(std::uint64_t addr_granules, std::uint64_t size_granules) noexcept {
    return {(addr_granules << 32) | (size_granules & 0xffffffffu)};
  }
  constexpr std::uint64_t addr() const noexcept { return bits >> 32; }
  constexpr std::uint64_t size() const noexcept { return bits & 0xffffffffu; }
  constexpr std::uint64_t end() const noexcept { return addr() + size(); }
  constexpr void set_addr(std::uint64_t a) noexcept { bits = (a << 32) | size(); }
  constexpr void set_size(std::uint64_t s) noexcept { bits = (bits & ~std::uint64_t{0xffffffffu}) | s; }
};
static_assert(sizeof(packed_range) == 8);

struct packed_range_key {
  constexpr std::uint64_t operator()(const packed_range& r) const noexcept { return r.addr(); }
};

class sequential_fit {
 public:
  using list_type = hybrid_array_list<packed_range, packed_range_key>;
  using iterator = list_type::iterator;

  static constexpr std::uint64_t max_granules = 0xffffffffu;

  sequential_fit(heap_config cfg, fit_policy policy,
                 std::size_t chunk_capacity = list_type::default_chunk_capacity)
      : cfg_(cfg),
        policy_(policy),
        shift_(static_cast<unsigned>(std::countr_zero(cfg.min_granule))),
        free_(chunk_capacity),
        used_(chunk_capacity) {
    cfg_.validate();
    if (cfg_.granules() > max_granules)
      throw std::invalid_argument("heap too large for one-word range entries; raise min_granule");
    free_.insert(free_.end(), packed_range::make(0, cfg_.granules()));
    cursor_ = free_.begin();
  }

  // Chooses a free entry able to hold `size` bytes (already granule-rounded)
  // without modifying anything.
  std::optional<iterator> find_candidate(std::uint64_t size) const {
    const std::uint64_t need = size >> shift_;
    switch (policy_) {
      case fit_policy::best: {
        std::optional<iterator> cand;
        for (auto it = free_.begin(); it != free_.end(); it = free_.next(it)) {
          const std::uint64_t s = free_[it].size();
          if (s == need) return it;
          if (s > need && (!cand || s < free_[*cand].size())) cand = it;
        }
        return cand;
      }
      case fit_policy::first:
        for (auto it = free_.begin(); it != free_.end(); it = free_.next(it))
          if (free_[it].size() >= need) return it;
        return std::nullopt;
      case fit_policy::next: {
        const iterator start = free_.is_valid(cursor_) ? cursor_ : free_.begin();
        for (auto it = start; it != free_.end(); it = free_.next(it))
          if (free_[it].size() >= need) return it;
        for (auto it = free_.begin(); it != start && it != free_.end(); it = free_.next(it))
          if (free_[it].size() >= need) return it;
        return std::nullopt;
      }
    }
    return std::nullopt;
  }

  result<address> alloc(std::uint64_t size) {
    if (size == 0) return alloc_error::zero_size;
    const std::uint64_t bytes = cfg_.round_up(size);
    if (bytes == 0 || bytes > cfg_.heap_size) return alloc_error::size_overflow;

    const auto cand = find_candidate(bytes);
    if (!cand) return alloc_error::out_of_memory;

    const std::uint64_t need = bytes >> shift_;
    packed_range& entry = free_[*cand];
    const std::uint64_t addr = entry.addr();
    if (entry.size() > need) {
      // Allocate from the low end; the remainder keeps its list slot.
      entry.set_addr(addr + need);
      entry.set_size(entry.size() - need);
      rover_ = addr + need;
    } else {
      free_.remove(*cand);
      rover_ = addr + need;
    }

    const iterator at = used_.search(addr);
    used_.insert(used_.next(at), packed_range::make(addr, need));

    usage_.on_alloc(addr << shift_, bytes);
    resolve_cursor();
    return addr << shift_;
  }

  // Frees the block starting at `addr`, or the tail of the block containing
  // `addr` when it is an interior, granule-aligned address.
  result<void> free(address addr) {
    if (addr >= cfg_.heap_size) return alloc_error::invalid_free;
    const std::uint64_t g = addr >> shift_;
    const bool aligned = (addr & (cfg_.min_granule - 1)) == 0;

    const iterator it = used_.search(g);
    if (!used_.is_valid(it) || used_[it].end() <= g) {
      const iterator f = free_.search(g);
      const bool in_free = free_.is_valid(f) && free_[f].end() > g;
      return in_free ? alloc_error::double_free : alloc_error::invalid_free;
    }
    if (!aligned) return alloc_error::invalid_free;

    std::uint64_t size;
    if (used_[it].addr() == g) {
      size = used_[it].size();
      used_.remove(it);
    } else {
      size = used_[it].end() - g;
      used_[it].set_size(g - used_[it].addr());
    }

    release(g, size);
    usage_.on_release(size << shift_);
    resolve_cursor();
    return {};
  }

  overhead_stats stats() const {
    overhead_stats s;
    s.host_metadata_bytes = free_.host_bytes() + used_.host_bytes();
    s.managed_bytes = cfg_.heap_size;
    s.live_bytes = usage_.live_bytes();
    s.reserved_bytes = usage_.reserved_bytes();
    return s;
  }

  // Bytes taken by occupied entries only, leaving out chunk slack.
  std::uint64_t entry_bytes() const noexcept { return free_.entry_bytes() + used_.entry_bytes(); }

  std::vector<block_range> used_blocks() const { return to_ranges(used_); }
  std::vector<block_range> free_blocks() const { return to_ranges(free_); }

  const heap_config& config() const noexcept { return cfg_; }
  fit_policy policy() const noexcept { return policy_; }
  const list_type& free_list() const noexcept { return free_; }
  const list_type& used_list() const noexcept { return used_; }
  iterator cursor() const noexcept { return cursor_; }

  // Tiling, full coalescing and cursor validity. Throws std::logic_error.
  void check_invariants() const {
    free_.check_invariants();
    used_.check_invariants();

    std::vector<packed_range> all;
    free_.for_each([&](const packed_range& r) { all.push_back(r); });
    used_.for_each([&](const packed_range& r) { all.push_back(r); });
    std::sort(all.begin(), all.end(), [](auto a, auto b) { return a.addr() < b.addr(); });
    std::uint64_t at = 0;
    for (const auto& r : all) {
      if (r.size() == 0) throw std::logic_error("sequential_fit: zero-size entry");
      if (r.addr() != at) throw std::logic_error("sequential_fit: lists do not tile the heap");
      at = r.end();
    }
    if (at != cfg_.granules()) throw std::logic_error("sequential_fit: tiling stops short of heap end");

    std::optional<std::uint64_t> prev_end;
    free_.for_each([&](const packed_range& r) {
      if (prev_end && *prev_end >= r.addr()) throw std::logic_error("sequential_fit: uncoalesced free neighbours");
      prev_end = r.end();
    });

    if (policy_ == fit_policy::next && !free_.is_valid(cursor_) &&
        !(free_.empty() && cursor_ == list_type::before_begin()))
      throw std::logic_error("sequential_fit: next-fit cursor is stale");
  }

 private:
  void release(std::uint64_t addr, std::uint64_t size) {
    const iterator left = free_.search(addr);
    const iterator right = free_.next(left);
    const std::uint64_t end = addr + size;

    bool merge_left = false;
    if (free_.is_valid(left)) {
      if (free_[left].end() > addr) throw std::logic_error("sequential_fit: freed range overlaps a free entry");
      merge_left = free_[left].end() == addr;
    }
    bool merge_right = false;
    if (free_.is_valid(right)) {
      if (free_[right].addr() < end) throw std::logic_error("sequential_fit: freed range overlaps a free entry");
      merge_right = free_[right].addr() == end;
    }

    if (merge_left && merge_right) {
      free_[left].set_size(free_[right].end() - free_[left].addr());
      free_.remove(right);
    } else if (merge_left) {
      free_[left].set_size(free_[left].size() + size);
    } else if (merge_right) {
      packed_range& r = free_[right];
      r.set_size(r.size() + size);
      r.set_addr(addr);
    } else {
      free_.insert(right, packed_range::make(addr, size));
    }
  }

  // Next fit resumes at the free entry covering the rover address, else the
  // first entry above it, else the lowest entry.
  void resolve_cursor() {
    if (policy_ != fit_policy::next) return;
    if (free_.empty()) {
      cursor_ = list_type::before_begin();
      return;
    }
    iterator it = free_.search(rover_);
    if (!free_.is_valid(it) || free_[it].end() <= rover_) it = free_.next(it);
    cursor_ = it == free_.end() ? free_.begin() : it;
  }

  std::vector<block_range> to_ranges(const list_type& list) const {
    std::vector<block_range> out;
    out.reserve(list.size());
    list.for_each([&](const packed_range& r) { out.push_back({r.addr() << shift_, r.size() << shift_}); });
    return out;
  }

  heap_config cfg_;
  fit_policy policy_;
  unsigned shift_;
  list_type free_;
  list_type used_;
  iterator cursor_{};
  std::uint64_t rover_ = 0;  // granule units
  usage_tracker usage_;
};

}  // namespace devalloc
