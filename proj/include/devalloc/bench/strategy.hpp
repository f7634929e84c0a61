#pragma once

#include <array>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "devalloc/bitmask_allocator.hpp"
#include "devalloc/core.hpp"
#include "devalloc/reference_allocator.hpp"
#include "devalloc/segregated_fit.hpp"
#include "devalloc/sequential_fit.hpp"

namespace devalloc::bench {

// Type-erased holder for any allocator_strategy.
class any_allocator {
 public:
  template <allocator_strategy A>
  explicit any_allocator(A allocator) : self_(std::make_unique<model<A>>(std::move(allocator))) {}

  result<address> alloc(std::uint64_t size) { return self_->alloc(size); }
  result<void> free(address addr) { return self_->free(addr); }
  overhead_stats stats() const { return self_->stats(); }
  std::vector<block_range> used_blocks() const { return self_->used_blocks(); }
  // Empty for strategies that do not track free ranges explicitly.
  std::optional<std::vector<block_range>> free_blocks() const { return self_->free_blocks(); }
  const heap_config& config() const { return self_->config(); }

 private:
  struct concept_t {
    virtual ~concept_t() = default;
    virtual result<address> alloc(std::uint64_t) = 0;
    virtual result<void> free(address) = 0;
    virtual overhead_stats stats() const = 0;
    virtual std::vector<block_range> used_blocks() const = 0;
    virtual std::optional<std::vector<block_range>> free_blocks() const = 0;
    virtual const heap_config& config() const = 0;
  };

  template <typename A>
  struct model final : concept_t {
    explicit model(A a) : impl(std::move(a)) {}
    result<address> alloc(std::uint64_t size) override { return impl.alloc(size); }
    result<void> free(address addr) override { return impl.free(addr); }
    overhead_stats stats() const override { return impl.stats(); }
    std::vector<block_range> used_blocks() const override { return impl.used_blocks(); }
    std::optional<std::vector<block_range>> free_blocks() const override {
      if constexpr (tiling_strategy<A>) return impl.free_blocks();
      else return std::nullopt;
    }
    const heap_config& config() const override { return impl.config(); }
    A impl;
  };

  std::unique_ptr<concept_t> self_;
};

struct strategy_options {
  heap_config heap;
  std::size_t chunk_capacity = 64;
  unsigned sli = two_level_bins::default_sli;
};

inline constexpr std::array<std::string_view, 7> strategy_names = {
    "best-fit", "first-fit", "next-fit", "bitmask", "seg-fit", "tlsf", "oracle",
};

// "oracle" is the flat reference allocator running best fit.
inline any_allocator make_strategy(std::string_view name, const strategy_options& opt) {
  if (name == "best-fit") return any_allocator(sequential_fit(opt.heap, fit_policy::best, opt.chunk_capacity));
  if (name == "first-fit") return any_allocator(sequential_fit(opt.heap, fit_policy::first, opt.chunk_capacity));
  if (name == "next-fit") return any_allocator(sequential_fit(opt.heap, fit_policy::next, opt.chunk_capacity));
  if (name == "bitmask") return any_allocator(bitmask_allocator(opt.heap));
  if (name == "seg-fit") return any_allocator(segregated_fit(opt.heap));
  if (name == "tlsf") return any_allocator(tlsf_allocator(opt.heap, opt.sli));
  if (name == "oracle") return any_allocator(reference_allocator(opt.heap, fit_policy::best));
  throw std::invalid_argument("unknown strategy: " + std::string(name));
}

}  // namespace devalloc::bench
