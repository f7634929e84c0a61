#pragma once

// Hybrid array list: a doubly linked list of fixed-capacity sorted array
// chunks. Insert and remove shift within a single chunk (splitting a full
// chunk in two), and search walks chunk heads from the tail before a binary
// search inside the one chunk that can hold the answer.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <type_traits>
#include <vector>

namespace devalloc {

struct hal_counters {
  std::uint64_t head_comparisons = 0;  // chunk-head checks made by the last search
  std::uint64_t intra_probes = 0;      // binary-search probes made by the last search
  std::uint64_t chunks_touched = 0;    // chunks modified by the last insert/remove
  std::uint64_t splits = 0;            // running totals
  std::uint64_t unlinks = 0;
};

template <typename Entry, typename KeyOf = std::identity>
class hybrid_array_list {
 public:
  using entry_type = Entry;
  using key_type = std::remove_cvref_t<std::invoke_result_t<KeyOf, const Entry&>>;

  static constexpr std::uint32_t npos = 0xffffffffu;
  static constexpr std::size_t default_chunk_capacity = 64;

  // A chunk reference plus a slot index. The two sentinels carry no chunk:
  // end() has index 0, before_begin() has index 1.
  struct iterator {
    std::uint32_t chunk = npos;
    std::uint32_t index = 0;
    friend constexpr bool operator==(const iterator&, const iterator&) = default;
  };

  explicit hybrid_array_list(std::size_t chunk_capacity = default_chunk_capacity, KeyOf key_of = {})
      : capacity_(chunk_capacity), key_of_(std::move(key_of)) {
    if (capacity_ < 2 || capacity_ >= npos) throw std::invalid_argument("chunk capacity must be at least 2");
    head_ = tail_ = acquire_chunk();
  }

  static constexpr iterator end() noexcept { return {npos, 0}; }
  static constexpr iterator before_begin() noexcept { return {npos, 1}; }

  iterator begin() const noexcept { return size_ == 0 ? end() : iterator{head_, 0}; }
  iterator last() const noexcept {
    return size_ == 0 ? before_begin() : iterator{tail_, chunks_[tail_].count - 1};
  }

  bool is_valid(iterator it) const noexcept {
    return it.chunk != npos && it.chunk < chunks_.size() && it.index < chunks_[it.chunk].count;
  }

  iterator next(iterator it) const noexcept {
    if (it == before_begin()) return begin();
    if (it.chunk == npos) return end();
    const chunk& c = chunks_[it.chunk];
    if (++it.index >= c.count) {
      if (c.next == npos) return end();
      return {c.next, 0};
    }
    return it;
  }

  iterator prev(iterator it) const noexcept {
    if (it == end()) return last();
    if (it.chunk == npos) return before_begin();
    if (it.index == 0) {
      const std::uint32_t p = chunks_[it.chunk].prev;
      if (p == npos) return before_begin();
      return {p, chunks_[p].count - 1};
    }
    --it.index;
    return it;
  }

  Entry& operator[](iterator it) { return chunks_[it.chunk].entries[it.index]; }
  const Entry& operator[](iterator it) const { return chunks_[it.chunk].entries[it.index]; }

  // Inserts before `pos` (which may be end()) and returns the new entry's
  // position. The caller keeps the list sorted.
  iterator insert(iterator pos, const Entry& e) {
    if (pos == before_begin()) throw std::logic_error("hal insert before before_begin");
    std::uint32_t ci;
    std::uint32_t i;
    if (pos == end()) {
      ci = tail_;
      i = chunks_[ci].count;
    } else {
      ci = pos.chunk;
      i = pos.index;
    }

    counters_.chunks_touched = 1;
    if (chunks_[ci].count == capacity_) {
      const std::uint32_t fresh = split(ci);
      const std::uint32_t keep = chunks_[ci].count;
      if (i > keep) {
        ci = fresh;
        i -= keep;
      }
      counters_.chunks_touched = 2;
    }

    chunk& c = chunks_[ci];
    std::move_backward(c.entries.begin() + i, c.entries.begin() + c.count, c.entries.begin() + c.count + 1);
    c.entries[i] = e;
    ++c.count;
    ++size_;
    return {ci, i};
  }

  // Removes the entry at `pos` and returns the position of its successor.
  iterator remove(iterator pos) {
    if (!is_valid(pos)) throw std::logic_error("hal remove at invalid position");
    chunk& c = chunks_[pos.chunk];
    std::move(c.entries.begin() + pos.index + 1, c.entries.begin() + c.count, c.entries.begin() + pos.index);
    --c.count;
    --size_;
    counters_.chunks_touched = 1;

    if (pos.index < c.count) return pos;
    const std::uint32_t following = c.next;
    if (c.count == 0 && head_ != tail_) unlink(pos.chunk);
    return following == npos ? end() : iterator{following, 0};
  }

  // Position of the greatest entry whose key is <= x, or before_begin().
  iterator search(const key_type& x) const {
    counters_.head_comparisons = 0;
    counters_.intra_probes = 0;
    for (std::uint32_t ci = tail_; ci != npos; ci = chunks_[ci].prev) {
      const chunk& c = chunks_[ci];
      if (c.count == 0) continue;
      ++counters_.head_comparisons;
      if (key_of_(c.entries[0]) > x) continue;

      std::uint32_t lo = 0;
      std::uint32_t hi = c.count;
      while (lo < hi) {
        const std::uint32_t mid = lo + (hi - lo) / 2;
        ++counters_.intra_probes;
        if (key_of_(c.entries[mid]) <= x)
          lo = mid + 1;
        else
          hi = mid;
      }
      return {ci, lo - 1};
    }
    return before_begin();
  }

  std::size_t size() const noexcept { return size_; }
  bool empty() const noexcept { return size_ == 0; }
  std::size_t chunk_capacity() const noexcept { return capacity_; }

  std::size_t chunk_count() const noexcept {
    std::size_t n = 0;
    for (std::uint32_t ci = head_; ci != npos; ci = chunks_[ci].next) ++n;
    return n;
  }

  std::vector<std::uint32_t> chunk_occupancy() const {
    std::vector<std::uint32_t> out;
    for (std::uint32_t ci = head_; ci != npos; ci = chunks_[ci].next) out.push_back(chunks_[ci].count);
    return out;
  }

  template <typename F>
  void for_each(F&& f) const {
    for (std::uint32_t ci = head_; ci != npos; ci = chunks_[ci].next) {
      const chunk& c = chunks_[ci];
      for (std::uint32_t i = 0; i < c.count; ++i) f(c.entries[i]);
    }
  }

  std::vector<Entry> flatten() const {
    std::vector<Entry> out;
    out.reserve(size_);
    for_each([&](const Entry& e) { out.push_back(e); });
    return out;
  }

  // Host memory held by the list: entry storage of every chunk plus the
  // per-chunk link/count header. Retired chunks keep only their header.
  std::uint64_t host_bytes() const noexcept {
    std::uint64_t bytes = 0;
    for (const chunk& c : chunks_) bytes += c.entries.capacity() * sizeof(Entry) + chunk_header_bytes;
    return bytes;
  }

  std::uint64_t entry_bytes() const noexcept { return size_ * sizeof(Entry); }

  const hal_counters& counters() const noexcept { return counters_; }

  // Sortedness, chunk occupancy and link symmetry. Throws std::logic_error.
  void check_invariants() const {
    std::size_t seen = 0;
    std::uint32_t prev = npos;
    bool have_last = false;
    key_type last_key{};
    for (std::uint32_t ci = head_; ci != npos; ci = chunks_[ci].next) {
      const chunk& c = chunks_[ci];
      if (c.prev != prev) throw std::logic_error("hal: broken prev link");
      if (c.count > capacity_) throw std::logic_error("hal: chunk over capacity");
      if (c.count == 0 && !(head_ == tail_ && size_ == 0)) throw std::logic_error("hal: empty chunk left linked");
      for (std::uint32_t i = 0; i < c.count; ++i) {
        const key_type k = key_of_(c.entries[i]);
        if (have_last && k < last_key) throw std::logic_error("hal: entries out of order");
        last_key = k;
        have_last = true;
      }
      seen += c.count;
      prev = ci;
    }
    if (prev != tail_) throw std::logic_error("hal: tail mismatch");
    if (seen != size_) throw std::logic_error("hal: size mismatch");
  }

 private:
  static constexpr std::uint64_t chunk_header_bytes = 3 * sizeof(std::uint32_t);

  struct chunk {
    std::vector<Entry> entries;
    std::uint32_t count = 0;
    std::uint32_t prev = npos;
    std::uint32_t next = npos;
  };

  std::uint32_t acquire_chunk() {
    std::uint32_t ci;
    if (!retired_.empty()) {
      ci = retired_.back();
      retired_.pop_back();
      chunks_[ci] = chunk{};
    } else {
      ci = static_cast<std::uint32_t>(chunks_.size());
      chunks_.emplace_back();
    }
    chunks_[ci].entries.resize(capacity_);
    return ci;
  }

  // Moves the upper half of a full chunk into a new chunk linked after it.
  std::uint32_t split(std::uint32_t ci) {
    const std::uint32_t fresh = acquire_chunk();
    chunk& c = chunks_[ci];
    chunk& f = chunks_[fresh];
    const auto keep = static_cast<std::uint32_t>(capacity_ / 2);
    std::move(c.entries.begin() + keep, c.entries.begin() + c.count, f.entries.begin());
    f.count = c.count - keep;
    c.count = keep;

    f.prev = ci;
    f.next = c.next;
    if (c.next != npos) chunks_[c.next].prev = fresh;
    else tail_ = fresh;
    c.next = fresh;
    ++counters_.splits;
    return fresh;
  }

  void unlink(std::uint32_t ci) {
    chunk& c = chunks_[ci];
    if (c.prev != npos) chunks_[c.prev].next = c.next;
    else head_ = c.next;
    if (c.next != npos) chunks_[c.next].prev = c.prev;
    else tail_ = c.prev;
    c = chunk{};
    retired_.push_back(ci);
    ++counters_.unlinks;
  }

  std::size_t capacity_;
  KeyOf key_of_;
  std::vector<chunk> chunks_;
  std::vector<std::uint32_t> retired_;
  std::uint32_t head_ = npos;
  std::uint32_t tail_ = npos;
  std::size_t size_ = 0;
  mutable hal_counters counters_;
};

}  // namespace devalloc
