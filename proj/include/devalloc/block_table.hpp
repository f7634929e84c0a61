#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "devalloc/core.hpp"

namespace devalloc {

// Everything a boundary tag would carry, kept host side. Six words: key,
// size (with the free flag in its top bit), two free-list links, the
// previous adjacent block, and the collision-chain link.
struct block_entry {
  address addr = null_address;
  std::uint64_t size : 63 = 0;
  std::uint64_t free : 1 = 0;
  address next_free = null_address;
  address prev_free = null_address;
  address prev_adj = null_address;
  std::uint64_t chain = null_address;  // slot of the next entry in this bucket
};
static_assert(sizeof(block_entry) == 6 * sizeof(std::uint64_t));

struct block_table_counters {
  std::uint64_t probes = 0;       // lookups, inserts and removals
  std::uint64_t chain_steps = 0;  // entries visited while walking chains
  std::uint64_t resizes = 0;
};

// Address-keyed hash table with separate chaining through the entries' own
// chain field. Entries live in a slot pool; pointers returned by find() stay
// valid until the next put().
class block_table {
 public:
  static constexpr double max_load = 0.75;
  static constexpr std::size_t words_per_entry = 6;

  explicit block_table(std::uint64_t min_granule = 8, std::size_t initial_buckets = 16)
      : shift_(static_cast<unsigned>(std::countr_zero(min_granule))) {
    if (!std::has_single_bit(min_granule)) throw std::invalid_argument("min_granule must be a power of two");
    buckets_.assign(std::bit_ceil(std::max<std::size_t>(initial_buckets, 2)), null_address);
  }

  block_entry* find(address addr) {
    ++counters_.probes;
    for (std::uint64_t s = buckets_[bucket_of(addr)]; s != null_address; s = slots_[s].chain) {
      ++counters_.chain_steps;
      if (slots_[s].addr == addr) return &slots_[s];
    }
    return nullptr;
  }
  const block_entry* find(address addr) const { return const_cast<block_table*>(this)->find(addr); }

  std::optional<block_entry> get(address addr) const {
    const block_entry* e = find(addr);
    if (!e) return std::nullopt;
    return *e;
  }

  bool contains(address addr) const { return find(addr) != nullptr; }

  // Inserts or overwrites the entry keyed by e.addr.
  block_entry& put(const block_entry& e) {
    if (e.addr == null_address) throw std::logic_error("block_table: null key");
    if (block_entry* existing = find(e.addr)) {
      const std::uint64_t chain = existing->chain;
      *existing = e;
      existing->chain = chain;
      return *existing;
    }
    if (static_cast<double>(count_ + 1) > max_load * static_cast<double>(buckets_.size())) grow();

    std::uint64_t s;
    if (free_slot_ != null_address) {
      s = free_slot_;
      free_slot_ = slots_[s].chain;
    } else {
      s = slots_.size();
      slots_.emplace_back();
    }
    const std::size_t b = bucket_of(e.addr);
    slots_[s] = e;
    slots_[s].chain = buckets_[b];
    buckets_[b] = s;
    ++count_;
    return slots_[s];
  }

  // Removing an absent key means the caller's bookkeeping is corrupt.
  void remove(address addr) {
    ++counters_.probes;
    const std::size_t b = bucket_of(addr);
    std::uint64_t* link = &buckets_[b];
    while (*link != null_address) {
      ++counters_.chain_steps;
      block_entry& e = slots_[*link];
      if (e.addr == addr) {
        const std::uint64_t s = *link;
        *link = e.chain;
        e = block_entry{};
        e.chain = free_slot_;
        free_slot_ = s;
        --count_;
        return;
      }
      link = &e.chain;
    }
    throw std::logic_error("block_table: remove of absent key");
  }

  std::size_t size() const noexcept { return count_; }
  std::size_t bucket_count() const noexcept { return buckets_.size(); }
  double load() const noexcept { return static_cast<double>(count_) / static_cast<double>(buckets_.size()); }

  std::size_t max_chain_length() const {
    std::size_t best = 0;
    for (std::uint64_t head : buckets_) {
      std::size_t n = 0;
      for (std::uint64_t s = head; s != null_address; s = slots_[s].chain) ++n;
      best = std::max(best, n);
    }
    return best;
  }

  template <typename F>
  void for_each(F&& f) const {
    for (std::uint64_t head : buckets_)
      for (std::uint64_t s = head; s != null_address; s = slots_[s].chain) f(slots_[s]);
  }

  // Live entries at six words each.
  std::uint64_t entry_bytes() const noexcept { return count_ * sizeof(block_entry); }
  std::uint64_t bucket_bytes() const noexcept { return buckets_.size() * sizeof(std::uint64_t); }
  // Everything held: bucket array and every pool slot, including recycled ones.
  std::uint64_t host_bytes() const noexcept { return slots_.capacity() * sizeof(block_entry) + bucket_bytes(); }

  const block_table_counters& counters() const noexcept { return counters_; }

 private:
  std::size_t bucket_of(address addr) const noexcept {
    // Fibonacci hashing of the granule index; the low address bits are always zero.
    const std::uint64_t h = (addr >> shift_) * 0x9e3779b97f4a7c15ull;
    return static_cast<std::size_t>(h >> (64 - bucket_bits()));
  }
  unsigned bucket_bits() const noexcept { return static_cast<unsigned>(std::countr_zero(buckets_.size())); }

  void grow() {
    ++counters_.resizes;
    std::vector<std::uint64_t> old(buckets_.size() * 2, null_address);
    old.swap(buckets_);
    for (std::uint64_t head : old) {
      for (std::uint64_t s = head; s != null_address;) {
        const std::uint64_t next = slots_[s].chain;
        const std::size_t b = bucket_of(slots_[s].addr);
        slots_[s].chain = buckets_[b];
        buckets_[b] = s;
        s = next;
      }
    }
  }

  unsigned shift_;
  std::vector<std::uint64_t> buckets_;
  std::vector<block_entry> slots_;
  std::uint64_t free_slot_ = null_address;
  std::size_t count_ = 0;
  mutable block_table_counters counters_;
};

}  // namespace devalloc
