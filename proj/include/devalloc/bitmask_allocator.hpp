#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "devalloc/core.hpp"

namespace devalloc {

struct bitmask_counters {
  std::uint64_t words_scanned = 0;  // last operation
  std::uint64_t bits_written = 0;   // last operation
};

// One bit per granule, set = free. Allocation is next fit over runs of set
// bits, skipping whole words with count-trailing-zeros; coalescing on free is
// implicit since adjacency is positional.
//
// The mask alone cannot tell free() how long an allocation was, so run
// lengths live in a side table keyed by address. Freeing an unknown or
// interior address reports invalid_free; a repeated free looks the same.
class bitmask_allocator {
 public:
  explicit bitmask_allocator(heap_config cfg)
      : cfg_(cfg), shift_(static_cast<unsigned>(std::countr_zero(cfg.min_granule))) {
    cfg_.validate();
    total_ = cfg_.granules();
    words_.assign((total_ + 63) / 64, ~std::uint64_t{0});
    if (const auto tail = total_ % 64; tail != 0) words_.back() = (std::uint64_t{1} << tail) - 1;
  }

  result<address> alloc(std::uint64_t size) {
    if (size == 0) return alloc_error::zero_size;
    const std::uint64_t bytes = cfg_.round_up(size);
    if (bytes == 0 || bytes > cfg_.heap_size) return alloc_error::size_overflow;
    const std::uint64_t run = bytes >> shift_;

    counters_ = {};
    const auto start = find_run(run);
    if (!start) return alloc_error::out_of_memory;

    write_range(*start, run, false);
    lengths_.emplace(*start, run);
    cursor_ = *start + run == total_ ? 0 : *start + run;
    usage_.on_alloc(*start << shift_, bytes);
    return *start << shift_;
  }

  result<void> free(address addr) {
    counters_ = {};
    if ((addr & (cfg_.min_granule - 1)) != 0) return alloc_error::invalid_free;
    const auto it = lengths_.find(addr >> shift_);
    if (it == lengths_.end()) return alloc_error::invalid_free;
    write_range(it->first, it->second, true);
    usage_.on_release(it->second << shift_);
    lengths_.erase(it);
    return {};
  }

  // Start granule of the first run of `run` free granules in circular order
  // from the cursor; runs never wrap past the end of the heap.
  std::optional<std::uint64_t> find_run(std::uint64_t run) const {
    if (run == 0 || run > total_) return std::nullopt;
    for (std::uint64_t p = cursor_; p < total_;) {
      const std::uint64_t s = find_set(p);
      if (s >= total_) break;
      const std::uint64_t e = find_clear(s);
      if (e - s >= run) return s;
      p = e;
    }
    for (std::uint64_t p = 0; p < cursor_;) {
      const std::uint64_t s = find_set(p);
      if (s >= cursor_) break;
      const std::uint64_t e = find_clear(s);
      if (e - s >= run) return s;
      p = e;
    }
    return std::nullopt;
  }

  bool is_free(std::uint64_t granule) const noexcept { return (words_[granule / 64] >> (granule % 64)) & 1u; }

  overhead_stats stats() const {
    overhead_stats s;
    s.host_metadata_bytes = mask_bytes();
    // Node-based map: key, value and next pointer per entry plus the buckets.
    s.auxiliary_metadata_bytes = lengths_.size() * 3 * sizeof(std::uint64_t) + lengths_.bucket_count() * sizeof(void*);
    s.managed_bytes = cfg_.heap_size;
    s.live_bytes = usage_.live_bytes();
    s.reserved_bytes = usage_.reserved_bytes();
    return s;
  }

  std::uint64_t mask_bytes() const noexcept { return (total_ + 7) / 8; }

  std::vector<block_range> used_blocks() const {
    std::vector<block_range> out;
    out.reserve(lengths_.size());
    for (const auto& [g, n] : lengths_) out.push_back({g << shift_, n << shift_});
    std::sort(out.begin(), out.end(), [](const block_range& a, const block_range& b) { return a.addr < b.addr; });
    return out;
  }

  const heap_config& config() const noexcept { return cfg_; }
  const std::vector<std::uint64_t>& words() const noexcept { return words_; }
  std::uint64_t cursor() const noexcept { return cursor_; }
  std::uint64_t granule_count() const noexcept { return total_; }
  const bitmask_counters& counters() const noexcept { return counters_; }

 private:
  std::uint64_t find_set(std::uint64_t pos) const noexcept {
    std::uint64_t w = pos / 64;
    std::uint64_t bits = words_[w] & (~std::uint64_t{0} << (pos % 64));
    ++counters_.words_scanned;
    while (bits == 0) {
      if (++w == words_.size()) return total_;
      bits = words_[w];
      ++counters_.words_scanned;
    }
    return w * 64 + static_cast<std::uint64_t>(std::countr_zero(bits));
  }

  // Padding bits past the last granule are kept clear, so this never runs
  // beyond total_.
  std::uint64_t find_clear(std::uint64_t pos) const noexcept {
    std::uint64_t w = pos / 64;
    std::uint64_t bits = ~words_[w] & (~std::uint64_t{0} << (pos % 64));
    ++counters_.words_scanned;
    while (bits == 0) {
      if (++w == words_.size()) return total_;
      bits = ~words_[w];
      ++counters_.words_scanned;
    }
    return std::min(total_, w * 64 + static_cast<std::uint64_t>(std::countr_zero(bits)));
  }

  void write_range(std::uint64_t start, std::uint64_t n, bool set) {
    counters_.bits_written += n;
    std::uint64_t pos = start;
    const std::uint64_t end = start + n;
    while (pos < end) {
      const std::uint64_t w = pos / 64;
      const std::uint64_t lo = pos % 64;
      const std::uint64_t hi = std::min<std::uint64_t>(64, lo + (end - pos));
      const std::uint64_t mask = (hi == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << hi) - 1) & (~std::uint64_t{0} << lo);
      if (set) words_[w] |= mask;
      else words_[w] &= ~mask;
      pos += hi - lo;
    }
  }

  heap_config cfg_;
  unsigned shift_;
  std::uint64_t total_ = 0;
  std::vector<std::uint64_t> words_;
  std::unordered_map<std::uint64_t, std::uint64_t> lengths_;
  std::uint64_t cursor_ = 0;
  usage_tracker usage_;
  mutable bitmask_counters counters_;
};

}  // namespace devalloc
