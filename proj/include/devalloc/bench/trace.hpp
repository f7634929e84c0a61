#pragma once

// Allocation traces: synthesis in the style of a large-block malloc stress
// test, plus a line-oriented text format:
//
//   a <id> <size>     allocate <size> bytes into slot <id>
//   f <id>            free slot <id>
//   p <id> <offset>   free the tail of slot <id> from <offset> on

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace devalloc::bench {

enum class op_kind { alloc, free, pfree };

constexpr std::string_view to_string(op_kind k) noexcept {
  switch (k) {
    case op_kind::alloc: return "alloc";
    case op_kind::free: return "free";
    case op_kind::pfree: return "pfree";
  }
  return "unknown";
}

inline op_kind parse_op_kind(std::string_view s) {
  if (s == "alloc") return op_kind::alloc;
  if (s == "free") return op_kind::free;
  if (s == "pfree") return op_kind::pfree;
  throw std::invalid_argument("unknown op kind: " + std::string(s));
}

struct trace_event {
  op_kind op = op_kind::alloc;
  std::uint32_t id = 0;
  std::uint64_t size = 0;    // alloc only
  std::uint64_t offset = 0;  // pfree only

  friend bool operator==(const trace_event&, const trace_event&) = default;
};

struct synth_params {
  std::uint64_t seed = 1;
  std::uint64_t n_ops = 5000;
  std::uint32_t n_slots = 1000;
  std::uint64_t min_size = 1024;
  std::uint64_t max_size = 16ull << 20;
  std::uint64_t granule = 8;
  // Chance that a step on an occupied slot trims its tail instead of
  // replacing it. Zero keeps the trace to plain alloc/free pairs.
  double pfree_rate = 0.0;
};

// Each step picks a slot uniformly. An empty slot gets an allocation; an
// occupied one is freed and reallocated (or, with pfree_rate, trimmed).
// Sizes are log-uniform in [min_size, max_size], rounded up to the granule.
inline std::vector<trace_event> synth_trace(const synth_params& p) {
  if (p.min_size == 0 || p.min_size > p.max_size) throw std::invalid_argument("synth_trace: need 0 < min_size <= max_size");
  if (p.n_slots == 0) throw std::invalid_argument("synth_trace: need at least one slot");
  if (p.granule == 0) throw std::invalid_argument("synth_trace: granule must be nonzero");

  std::mt19937_64 rng(p.seed);
  std::uniform_int_distribution<std::uint32_t> pick_slot(0, p.n_slots - 1);
  std::uniform_real_distribution<double> log_size(std::log(static_cast<double>(p.min_size)),
                                                  std::log(static_cast<double>(p.max_size)));
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  const auto round = [&](std::uint64_t s) { return (s + p.granule - 1) / p.granule * p.granule; };
  const auto draw_size = [&] {
    const auto raw = static_cast<std::uint64_t>(std::llround(std::exp(log_size(rng))));
    return round(std::clamp(raw, p.min_size, p.max_size));
  };

  std::vector<std::uint64_t> live(p.n_slots, 0);
  std::vector<trace_event> out;
  out.reserve(p.n_ops * 2);
  for (std::uint64_t step = 0; step < p.n_ops; ++step) {
    const std::uint32_t slot = pick_slot(rng);
    if (live[slot] != 0) {
      const std::uint64_t granules = live[slot] / p.granule;
      if (p.pfree_rate > 0.0 && granules >= 2 && coin(rng) < p.pfree_rate) {
        std::uniform_int_distribution<std::uint64_t> cut(1, granules - 1);
        const std::uint64_t offset = cut(rng) * p.granule;
        out.push_back({op_kind::pfree, slot, 0, offset});
        live[slot] = offset;
        continue;
      }
      out.push_back({op_kind::free, slot, 0, 0});
    }
    const std::uint64_t size = draw_size();
    out.push_back({op_kind::alloc, slot, size, 0});
    live[slot] = size;
  }
  return out;
}

// Throws std::invalid_argument naming the first event that frees a slot that
// is not live, allocates into a live slot, or trims past a slot's size.
inline void validate_trace(const std::vector<trace_event>& events) {
  std::unordered_map<std::uint32_t, std::uint64_t> live;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    const auto it = live.find(e.id);
    const auto fail = [&](const char* why) {
      throw std::invalid_argument("trace event " + std::to_string(i) + ": " + why);
    };
    switch (e.op) {
      case op_kind::alloc:
        if (it != live.end()) fail("alloc into a live slot");
        if (e.size == 0) fail("zero-size alloc");
        live.emplace(e.id, e.size);
        break;
      case op_kind::free:
        if (it == live.end()) fail("free of a slot that is not live");
        live.erase(it);
        break;
      case op_kind::pfree:
        if (it == live.end()) fail("partial free of a slot that is not live");
        if (e.offset == 0 || e.offset >= it->second) fail("partial free offset outside the live block");
        it->second = e.offset;
        break;
    }
  }
}

inline void write_trace(std::ostream& os, const std::vector<trace_event>& events) {
  for (const auto& e : events) {
    switch (e.op) {
      case op_kind::alloc: os << "a " << e.id << ' ' << e.size << '\n'; break;
      case op_kind::free: os << "f " << e.id << '\n'; break;
      case op_kind::pfree: os << "p " << e.id << ' ' << e.offset << '\n'; break;
    }
  }
}

inline std::vector<trace_event> read_trace(std::istream& is) {
  std::vector<trace_event> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    char tag = 0;
    trace_event e;
    ls >> tag >> e.id;
    bool ok = static_cast<bool>(ls);
    switch (tag) {
      case 'a': e.op = op_kind::alloc; ok = ok && static_cast<bool>(ls >> e.size); break;
      case 'f': e.op = op_kind::free; break;
      case 'p': e.op = op_kind::pfree; ok = ok && static_cast<bool>(ls >> e.offset); break;
      default: ok = false;
    }
    std::string extra;
    if (!ok || (ls >> extra)) throw std::runtime_error("trace line " + std::to_string(line_no) + ": malformed: " + line);
    out.push_back(e);
  }
  return out;
}

}  // namespace devalloc::bench
