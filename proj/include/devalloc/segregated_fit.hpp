#pragma once

// Segregated fit over address-keyed block metadata. Free blocks are threaded
// into one list per size class through the block table; an availability
// bitmap over the classes finds a nonempty list with a single
// count-trailing-zeros. The allocator never searches a list: it always
// takes the head, and every block in the chosen class is large enough.
//
// Two class layouts are provided: power-of-two classes (segregated_fit) and
// power-of-two classes subdivided linearly (tlsf_allocator).

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "devalloc/block_table.hpp"
#include "devalloc/core.hpp"

namespace devalloc {

constexpr unsigned floor_log2(std::uint64_t v) noexcept { return static_cast<unsigned>(std::bit_width(v)) - 1; }
constexpr unsigned ceil_log2(std::uint64_t v) noexcept {
  return v <= 1 ? 0 : static_cast<unsigned>(std::bit_width(v - 1));
}

// Power-of-two size classes: class b holds free blocks with size in
// [2^b, 2^(b+1)). Requests of size s look in class ceil(log2 s) and up.
class segregated_bins {
 public:
  static constexpr std::size_t max_bins = 64;

  explicit segregated_bins(std::uint64_t heap_size) : heap_size_(heap_size) {}

  std::size_t bin_count() const noexcept { return max_bins; }
  static std::size_t bin_for_free(std::uint64_t size) noexcept { return floor_log2(size); }

  result<std::size_t> bin_for_request(std::uint64_t size) const {
    const unsigned b = ceil_log2(size);
    if (b >= max_bins || (std::uint64_t{1} << b) > heap_size_) return alloc_error::size_overflow;
    return static_cast<std::size_t>(b);
  }

  // First nonempty class at or above the request's class.
  result<std::size_t> find(std::uint64_t size) const {
    const auto b = bin_for_request(size);
    if (!b) return b;
    const std::uint64_t avail = map_ & (~std::uint64_t{0} << *b);
    if (avail == 0) return alloc_error::out_of_memory;
    return static_cast<std::size_t>(std::countr_zero(avail));
  }

  void mark(std::size_t bin) noexcept { map_ |= std::uint64_t{1} << bin; }
  void unmark(std::size_t bin) noexcept { map_ &= ~(std::uint64_t{1} << bin); }
  bool marked(std::size_t bin) const noexcept { return (map_ >> bin) & 1u; }

  std::uint64_t first_level() const noexcept { return map_; }
  std::uint64_t bitmap_bytes() const noexcept { return sizeof(map_); }

 private:
  std::uint64_t heap_size_;
  std::uint64_t map_ = 0;
};

// Two-level classes: first level floor(log2 size), second level a linear
// split of that range into `sli` lists. Sizes below `sli` bytes get finer
// steps than one byte, so each of their lists holds a single exact size.
class two_level_bins {
 public:
  static constexpr unsigned max_first_level = 64;
  static constexpr unsigned default_sli = 16;

  struct index {
    unsigned fl = 0;
    unsigned sl = 0;
    friend constexpr bool operator==(const index&, const index&) = default;
  };

  explicit two_level_bins(std::uint64_t heap_size, unsigned sli = default_sli) : heap_size_(heap_size), sli_(sli) {
    if (sli == 0 || sli > 64 || !std::has_single_bit(sli))
      throw std::invalid_argument("second-level count must be a power of two in [1, 64]");
    sli_log_ = static_cast<unsigned>(std::countr_zero(sli));
  }

  unsigned sli() const noexcept { return sli_; }
  std::size_t bin_count() const noexcept { return std::size_t{max_first_level} * sli_; }

  index mapping(std::uint64_t size) const noexcept {
    const unsigned fl = floor_log2(size);
    const std::uint64_t rest = size - (std::uint64_t{1} << fl);
    const auto sl = static_cast<unsigned>(fl >= sli_log_ ? rest >> (fl - sli_log_) : rest << (sli_log_ - fl));
    return {fl, sl};
  }

  std::size_t flat(index i) const noexcept { return std::size_t{i.fl} * sli_ + i.sl; }
  index split(std::size_t bin) const noexcept {
    return {static_cast<unsigned>(bin / sli_), static_cast<unsigned>(bin % sli_)};
  }

  std::size_t bin_for_free(std::uint64_t size) const noexcept { return flat(mapping(size)); }

  // Rounds the request up to the next list boundary so that every block in
  // the resulting list is large enough.
  result<index> request_index(std::uint64_t size) const {
    if (size > heap_size_) return alloc_error::size_overflow;
    const unsigned fl = floor_log2(size);
    std::uint64_t rounded = size;
    if (fl >= sli_log_) rounded += (std::uint64_t{1} << (fl - sli_log_)) - 1;
    if (rounded < size || floor_log2(rounded) >= max_first_level) return alloc_error::size_overflow;
    return mapping(rounded);
  }

  result<index> find_index(std::uint64_t size) const {
    const auto req = request_index(size);
    if (!req) return req;
    const index at = *req;
    const std::uint64_t sl_map = second_[at.fl] & (~std::uint64_t{0} << at.sl);
    if (sl_map != 0) return index{at.fl, static_cast<unsigned>(std::countr_zero(sl_map))};
    const std::uint64_t fl_map = at.fl + 1 < max_first_level ? first_ & (~std::uint64_t{0} << (at.fl + 1)) : 0;
    if (fl_map == 0) return alloc_error::out_of_memory;
    const auto fl = static_cast<unsigned>(std::countr_zero(fl_map));
    return index{fl, static_cast<unsigned>(std::countr_zero(second_[fl]))};
  }

  result<std::size_t> find(std::uint64_t size) const {
    const auto i = find_index(size);
    if (!i) return i.error();
    return flat(*i);
  }

  void mark(std::size_t bin) noexcept {
    const index i = split(bin);
    second_[i.fl] |= std::uint64_t{1} << i.sl;
    first_ |= std::uint64_t{1} << i.fl;
  }
  void unmark(std::size_t bin) noexcept {
    const index i = split(bin);
    second_[i.fl] &= ~(std::uint64_t{1} << i.sl);
    if (second_[i.fl] == 0) first_ &= ~(std::uint64_t{1} << i.fl);
  }
  bool marked(std::size_t bin) const noexcept {
    const index i = split(bin);
    return (second_[i.fl] >> i.sl) & 1u;
  }

  std::uint64_t first_level() const noexcept { return first_; }
  std::uint64_t second_level(unsigned fl) const noexcept { return second_[fl]; }
  std::uint64_t bitmap_bytes() const noexcept { return sizeof(first_) + sizeof(second_); }

 private:
  std::uint64_t heap_size_;
  unsigned sli_;
  unsigned sli_log_ = 0;
  std::uint64_t first_ = 0;
  std::array<std::uint64_t, max_first_level> second_{};
};

// Work done by the last alloc/free: table probes, link edits and bitmap
// updates. Table growth is counted apart since it is amortized.
struct segfit_step_counters {
  std::uint64_t table_probes = 0;
  std::uint64_t link_edits = 0;
  std::uint64_t bitmap_ops = 0;
  std::uint64_t table_resizes = 0;

  std::uint64_t total() const noexcept { return table_probes + link_edits + bitmap_ops; }
};

template <typename Bins>
class basic_segregated_fit {
 public:
  template <typename... BinArgs>
  explicit basic_segregated_fit(heap_config cfg, BinArgs&&... bin_args)
      : cfg_(cfg), bins_(cfg.heap_size, std::forward<BinArgs>(bin_args)...), table_(cfg.min_granule) {
    cfg_.validate();
    heads_.assign(bins_.bin_count(), null_address);
    block_entry whole;
    whole.addr = 0;
    whole.size = cfg_.heap_size;
    whole.free = 1;
    push_front(table_.put(whole));
  }

  result<address> alloc(std::uint64_t size) {
    begin_op();
    if (size == 0) return alloc_error::zero_size;
    const std::uint64_t bytes = cfg_.round_up(size);
    if (bytes == 0) return alloc_error::size_overflow;

    const auto bin = bins_.find(bytes);
    if (!bin) return bin.error();

    block_entry* head = table_.find(heads_[*bin]);
    const address addr = head->addr;
    last_bin_ = *bin;
    last_block_size_ = head->size;
    unlink(*head, *bin);
    head->free = 0;

    if (bytes < head->size) {
      block_entry surplus;
      surplus.addr = head->addr + bytes;
      surplus.size = head->size - bytes;
      surplus.free = 1;
      surplus.prev_adj = head->addr;
      head->size = bytes;
      // put() may grow the pool, so `head` is not used past this point.
      if (block_entry* succ = successor(surplus.addr, surplus.size)) {
        succ->prev_adj = surplus.addr;
        ++steps_.link_edits;
      }
      push_front(table_.put(surplus));
    }

    usage_.on_alloc(addr, bytes);
    end_op();
    return addr;
  }

  result<void> free(address addr) {
    begin_op();
    block_entry* it = table_.find(addr);
    if (!it) return alloc_error::invalid_free;
    if (it->free) return alloc_error::double_free;
    const std::uint64_t size = it->size;

    block_entry* left = it->prev_adj != null_address ? table_.find(it->prev_adj) : nullptr;
    block_entry* right = successor(it->addr, it->size);
    const bool left_free = left && left->free;
    const bool right_free = right && right->free;

    block_entry* target = it;
    if (left_free) {
      unlink(*left, bins_.bin_for_free(left->size));
      if (right_free) {
        unlink(*right, bins_.bin_for_free(right->size));
        left->size += it->size + right->size;
        if (block_entry* succ = successor(right->addr, right->size)) {
          succ->prev_adj = left->addr;
          ++steps_.link_edits;
        }
        table_.remove(right->addr);
      } else {
        left->size += it->size;
        if (right) {
          right->prev_adj = left->addr;
          ++steps_.link_edits;
        }
      }
      table_.remove(addr);
      target = left;
    } else if (right_free) {
      unlink(*right, bins_.bin_for_free(right->size));
      it->size += right->size;
      if (block_entry* succ = successor(right->addr, right->size)) {
        succ->prev_adj = it->addr;
        ++steps_.link_edits;
      }
      table_.remove(right->addr);
    }

    target->free = 1;
    push_front(*target);
    usage_.on_release(size);
    end_op();
    return {};
  }

  overhead_stats stats() const {
    overhead_stats s;
    s.host_metadata_bytes = table_.host_bytes() + heads_.size() * sizeof(address) + bins_.bitmap_bytes();
    s.managed_bytes = cfg_.heap_size;
    s.live_bytes = usage_.live_bytes();
    s.reserved_bytes = usage_.reserved_bytes();
    return s;
  }

  std::vector<block_range> used_blocks() const { return collect(false); }
  std::vector<block_range> free_blocks() const { return collect(true); }

  const heap_config& config() const noexcept { return cfg_; }
  const Bins& bins() const noexcept { return bins_; }
  const block_table& table() const noexcept { return table_; }
  address list_head(std::size_t bin) const noexcept { return heads_[bin]; }

  const segfit_step_counters& last_steps() const noexcept { return steps_; }
  // Class and pre-split size of the block chosen by the last successful alloc.
  std::size_t last_bin() const noexcept { return last_bin_; }
  std::uint64_t last_block_size() const noexcept { return last_block_size_; }

  // Tiling, adjacency links, list membership and bitmap agreement.
  // Throws std::logic_error.
  void check_invariants() const {
    std::vector<block_entry> entries;
    table_.for_each([&](const block_entry& e) { entries.push_back(e); });
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.addr < b.addr; });

    address at = 0;
    address prev = null_address;
    std::size_t free_count = 0;
    for (const auto& e : entries) {
      if (e.addr != at || e.size == 0) throw std::logic_error("segfit: entries do not tile the heap");
      if (e.prev_adj != prev) throw std::logic_error("segfit: stale prev_adj");
      if (!e.free && (e.next_free != null_address || e.prev_free != null_address))
        throw std::logic_error("segfit: in-use block still linked");
      if (e.free) ++free_count;
      prev = e.addr;
      at = e.addr + e.size;
    }
    if (at != cfg_.heap_size) throw std::logic_error("segfit: tiling stops short of heap end");

    std::size_t linked = 0;
    for (std::size_t bin = 0; bin < heads_.size(); ++bin) {
      if ((heads_[bin] != null_address) != bins_.marked(bin)) throw std::logic_error("segfit: bitmap disagrees with lists");
      address back = null_address;
      for (address a = heads_[bin]; a != null_address;) {
        const block_entry* e = table_.find(a);
        if (!e || !e->free) throw std::logic_error("segfit: list holds a non-free block");
        if (bins_.bin_for_free(e->size) != bin) throw std::logic_error("segfit: block in the wrong class");
        if (e->prev_free != back) throw std::logic_error("segfit: broken prev_free link");
        if (++linked > free_count) throw std::logic_error("segfit: free list cycle");
        back = a;
        a = e->next_free;
      }
    }
    if (linked != free_count) throw std::logic_error("segfit: free block missing from lists");
  }

 private:
  void begin_op() noexcept {
    steps_ = {};
    probes_before_ = table_.counters().probes;
    resizes_before_ = table_.counters().resizes;
  }
  void end_op() noexcept {
    steps_.table_probes = table_.counters().probes - probes_before_;
    steps_.table_resizes = table_.counters().resizes - resizes_before_;
  }

  block_entry* successor(address addr, std::uint64_t size) {
    const address next = addr + size;
    return next < cfg_.heap_size ? table_.find(next) : nullptr;
  }

  void push_front(block_entry& e) {
    const std::size_t bin = bins_.bin_for_free(e.size);
    e.prev_free = null_address;
    e.next_free = heads_[bin];
    if (e.next_free != null_address) {
      table_.find(e.next_free)->prev_free = e.addr;
      ++steps_.link_edits;
    }
    heads_[bin] = e.addr;
    steps_.link_edits += 2;
    bins_.mark(bin);
    ++steps_.bitmap_ops;
  }

  void unlink(block_entry& e, std::size_t bin) {
    if (e.prev_free != null_address) table_.find(e.prev_free)->next_free = e.next_free;
    else heads_[bin] = e.next_free;
    if (e.next_free != null_address) table_.find(e.next_free)->prev_free = e.prev_free;
    e.next_free = e.prev_free = null_address;
    steps_.link_edits += 2;
    if (heads_[bin] == null_address) {
      bins_.unmark(bin);
      ++steps_.bitmap_ops;
    }
  }

  std::vector<block_range> collect(bool want_free) const {
    std::vector<block_range> out;
    table_.for_each([&](const block_entry& e) {
      if (static_cast<bool>(e.free) == want_free) out.push_back({e.addr, e.size});
    });
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.addr < b.addr; });
    return out;
  }

  heap_config cfg_;
  Bins bins_;
  block_table table_;
  std::vector<address> heads_;
  usage_tracker usage_;
  segfit_step_counters steps_;
  std::uint64_t probes_before_ = 0;
  std::uint64_t resizes_before_ = 0;
  std::size_t last_bin_ = 0;
  std::uint64_t last_block_size_ = 0;
};

using segregated_fit = basic_segregated_fit<segregated_bins>;
using tlsf_allocator = basic_segregated_fit<two_level_bins>;

}  // namespace devalloc
