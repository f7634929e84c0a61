#pragma once

// Shared vocabulary for allocators that manage an opaque address space.
//
// The managed heap is modelled only by its size: an address is a byte offset
// into it and nothing in this library ever reads or writes the memory behind
// an address. Every piece of bookkeeping lives in ordinary host containers.

#include <bit>
#include <concepts>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace devalloc {

using address = std::uint64_t;

// Offset 0 is a valid block address, so "no block" is the all-ones value.
inline constexpr address null_address = std::numeric_limits<address>::max();

struct block_range {
  address addr = 0;
  std::uint64_t size = 0;

  constexpr address end() const noexcept { return addr + size; }
  constexpr bool contains(address a) const noexcept { return a >= addr && a < end(); }

  friend constexpr bool operator==(const block_range&, const block_range&) = default;
};

struct heap_config {
  std::uint64_t heap_size = 0;
  std::uint64_t min_granule = 8;
  std::uint64_t alignment = 8;

  // Throws std::invalid_argument describing the first violated constraint.
  void validate() const {
    if (heap_size == 0) throw std::invalid_argument("heap_size must be nonzero");
    if (!std::has_single_bit(min_granule))
      throw std::invalid_argument("min_granule must be a power of two");
    if (!std::has_single_bit(alignment))
      throw std::invalid_argument("alignment must be a power of two");
    if (alignment > min_granule)
      throw std::invalid_argument("alignment must not exceed min_granule");
    if (heap_size % min_granule != 0)
      throw std::invalid_argument("heap_size must be a multiple of min_granule");
  }

  std::uint64_t granules() const noexcept { return heap_size / min_granule; }

  // Requests are rounded up to a whole number of granules. Returns 0 when the
  // rounded size would overflow.
  std::uint64_t round_up(std::uint64_t size) const noexcept {
    const std::uint64_t mask = min_granule - 1;
    if (size > std::numeric_limits<std::uint64_t>::max() - mask) return 0;
    return (size + mask) & ~mask;
  }
};

enum class alloc_error {
  out_of_memory,
  invalid_free,  // address is not inside any in-use block
  double_free,   // address lies in a region that is currently free
  zero_size,
  size_overflow,
};

constexpr std::string_view to_string(alloc_error e) noexcept {
  switch (e) {
    case alloc_error::out_of_memory: return "out of memory";
    case alloc_error::invalid_free: return "invalid free";
    case alloc_error::double_free: return "double free";
    case alloc_error::zero_size: return "zero size";
    case alloc_error::size_overflow: return "size overflow";
  }
  return "unknown";
}

class bad_result_access : public std::logic_error {
 public:
  explicit bad_result_access(alloc_error e)
      : std::logic_error("result holds error: " + std::string(to_string(e))), error_(e) {}
  alloc_error error() const noexcept { return error_; }

 private:
  alloc_error error_;
};

// Minimal value-or-error holder; the allocators never throw on ordinary
// failures like exhaustion or a bad free.
template <typename T>
class result {
 public:
  result(T value) : state_(std::move(value)) {}  // NOLINT(google-explicit-constructor)
  result(alloc_error error) : state_(error) {}   // NOLINT(google-explicit-constructor)

  bool has_value() const noexcept { return state_.index() == 0; }
  explicit operator bool() const noexcept { return has_value(); }

  const T& value() const {
    if (!has_value()) throw bad_result_access(std::get<1>(state_));
    return std::get<0>(state_);
  }
  const T& operator*() const { return value(); }
  alloc_error error() const { return std::get<1>(state_); }

  friend bool operator==(const result&, const result&) = default;

 private:
  std::variant<T, alloc_error> state_;
};

template <>
class result<void> {
 public:
  result() = default;
  result(alloc_error error) : error_(error), ok_(false) {}  // NOLINT(google-explicit-constructor)

  bool has_value() const noexcept { return ok_; }
  explicit operator bool() const noexcept { return ok_; }
  void value() const {
    if (!ok_) throw bad_result_access(error_);
  }
  alloc_error error() const { return error_; }

  friend bool operator==(const result& a, const result& b) {
    return a.ok_ == b.ok_ && (a.ok_ || a.error_ == b.error_);
  }

 private:
  alloc_error error_ = alloc_error::out_of_memory;
  bool ok_ = true;
};

struct overhead_stats {
  std::uint64_t host_metadata_bytes = 0;
  // Bookkeeping that the strategy needs beyond its headline structure, e.g.
  // the bitmask allocator's table of allocation lengths.
  std::uint64_t auxiliary_metadata_bytes = 0;
  std::uint64_t managed_bytes = 0;
  std::uint64_t live_bytes = 0;
  std::uint64_t reserved_bytes = 0;
};

// Host metadata per managed byte.
inline double overhead_ratio(const overhead_stats& s) {
  if (s.managed_bytes == 0) throw std::invalid_argument("overhead_ratio: managed_bytes is zero");
  return static_cast<double>(s.host_metadata_bytes) / static_cast<double>(s.managed_bytes);
}

// Fraction of the combined footprint (metadata + managed memory) taken up by
// metadata. This is the figure usually quoted as "worst case overhead".
inline double overhead_share(std::uint64_t metadata_bytes, std::uint64_t managed_bytes) {
  const auto total = metadata_bytes + managed_bytes;
  if (total == 0) throw std::invalid_argument("overhead_share: empty footprint");
  return static_cast<double>(metadata_bytes) / static_cast<double>(total);
}

inline double overhead_share(const overhead_stats& s) {
  return overhead_share(s.host_metadata_bytes, s.managed_bytes);
}

// Tracks live bytes and the high-water mark of the highest block end.
class usage_tracker {
 public:
  void on_alloc(address addr, std::uint64_t size) noexcept {
    live_ += size;
    if (addr + size > reserved_) reserved_ = addr + size;
  }
  void on_release(std::uint64_t size) noexcept { live_ -= size; }

  std::uint64_t live_bytes() const noexcept { return live_; }
  std::uint64_t reserved_bytes() const noexcept { return reserved_; }

 private:
  std::uint64_t live_ = 0;
  std::uint64_t reserved_ = 0;
};

// The behavioural contract shared by every strategy. partial_free is
// optional and expressed through free() on an interior address.
template <typename A>
concept allocator_strategy = requires(A a, const A ca, std::uint64_t size, address addr) {
  { a.alloc(size) } -> std::same_as<result<address>>;
  { a.free(addr) } -> std::same_as<result<void>>;
  { ca.stats() } -> std::same_as<overhead_stats>;
  { ca.used_blocks() } -> std::same_as<std::vector<block_range>>;
  { ca.config() } -> std::convertible_to<const heap_config&>;
};

// Strategies that can also enumerate their free ranges, so that free and used
// ranges can be checked to tile the heap.
template <typename A>
concept tiling_strategy = allocator_strategy<A> && requires(const A ca) {
  { ca.free_blocks() } -> std::same_as<std::vector<block_range>>;
};

}  // namespace devalloc
