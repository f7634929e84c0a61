#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "devalloc/bench/trace.hpp"
#include "devalloc/core.hpp"

namespace devalloc::bench {

struct op_record {
  std::uint64_t op_index = 0;
  op_kind op = op_kind::alloc;
  std::uint64_t latency_ns = 0;
  std::uint64_t live_bytes = 0;
  std::uint64_t reserved_bytes = 0;

  friend bool operator==(const op_record&, const op_record&) = default;
};

// 1 - live/reserved, with an untouched heap counting as unfragmented.
inline double fragmentation(const op_record& r) noexcept {
  if (r.reserved_bytes == 0) return 0.0;
  return 1.0 - static_cast<double>(r.live_bytes) / static_cast<double>(r.reserved_bytes);
}

struct replay_failure {
  std::uint64_t op_index = 0;
  alloc_error error = alloc_error::out_of_memory;
};

struct run_report {
  std::vector<op_record> per_op;
  // Address handed out by each alloc event; null_address for other events.
  std::vector<address> addresses;
  std::optional<replay_failure> failure;
};

struct latency_summary {
  std::size_t count = 0;
  std::uint64_t p50 = 0;
  std::uint64_t p99 = 0;
  std::uint64_t max = 0;
};

// Nearest-rank percentile of an unsorted sample; q in (0, 1].
inline std::uint64_t percentile(std::vector<std::uint64_t> v, double q) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
  return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

inline latency_summary summarize_latency(const std::vector<op_record>& records, op_kind kind,
                                         std::size_t first = 0, std::size_t last = SIZE_MAX) {
  std::vector<std::uint64_t> lat;
  last = std::min(last, records.size());
  for (std::size_t i = first; i < last; ++i)
    if (records[i].op == kind) lat.push_back(records[i].latency_ns);
  latency_summary s;
  s.count = lat.size();
  if (lat.empty()) return s;
  s.max = *std::max_element(lat.begin(), lat.end());
  s.p50 = percentile(lat, 0.50);
  s.p99 = percentile(std::move(lat), 0.99);
  return s;
}

// Mean fragmentation over the second half of the run.
inline double steady_state_fragmentation(const std::vector<op_record>& records) {
  if (records.empty()) return 0.0;
  const std::size_t from = records.size() / 2;
  double sum = 0.0;
  for (std::size_t i = from; i < records.size(); ++i) sum += fragmentation(records[i]);
  return sum / static_cast<double>(records.size() - from);
}

// Runs the events in order against `allocator`. Stops at the first
// allocator error and reports it; the records up to that point are kept.
// `observe` is called after every successful event with the event index.
template <typename Allocator, typename Observer>
run_report replay(const std::vector<trace_event>& events, Allocator& allocator, Observer&& observe) {
  using clock = std::chrono::steady_clock;
  validate_trace(events);

  run_report report;
  report.per_op.reserve(events.size());
  report.addresses.reserve(events.size());
  std::unordered_map<std::uint32_t, address> slots;

  for (std::size_t i = 0; i < events.size(); ++i) {
    const trace_event& e = events[i];
    clock::time_point t0;
    clock::time_point t1;
    address handed_out = null_address;
    bool ok = true;
    alloc_error err{};

    switch (e.op) {
      case op_kind::alloc: {
        t0 = clock::now();
        const result<address> r = allocator.alloc(e.size);
        t1 = clock::now();
        if (r) {
          handed_out = *r;
          slots[e.id] = *r;
        } else {
          ok = false;
          err = r.error();
        }
        break;
      }
      case op_kind::free:
      case op_kind::pfree: {
        const address base = slots.at(e.id);
        const address target = e.op == op_kind::free ? base : base + e.offset;
        t0 = clock::now();
        const result<void> r = allocator.free(target);
        t1 = clock::now();
        if (!r) {
          ok = false;
          err = r.error();
        } else if (e.op == op_kind::free) {
          slots.erase(e.id);
        }
        break;
      }
    }

    if (!ok) {
      report.failure = replay_failure{i, err};
      break;
    }
    const overhead_stats s = allocator.stats();
    report.per_op.push_back({i, e.op,
                             static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count()),
                             s.live_bytes, s.reserved_bytes});
    report.addresses.push_back(handed_out);
    observe(i);
  }
  return report;
}

template <typename Allocator>
run_report replay(const std::vector<trace_event>& events, Allocator& allocator) {
  return replay(events, allocator, [](std::size_t) {});
}

inline constexpr std::string_view csv_header = "op_index,op,latency_ns,live_bytes,reserved_bytes";

inline void write_csv(std::ostream& os, const run_report& report) {
  os << csv_header << '\n';
  for (const auto& r : report.per_op)
    os << r.op_index << ',' << to_string(r.op) << ',' << r.latency_ns << ',' << r.live_bytes << ',' << r.reserved_bytes
       << '\n';
}

inline void emit_csv(const run_report& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_csv(out, report);
  out.flush();
  if (!out) throw std::runtime_error("write to " + path + " failed");
}

inline std::vector<op_record> read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != csv_header) throw std::runtime_error("csv: missing or unexpected header");
  std::vector<op_record> out;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields.size() != 5) throw std::runtime_error("csv line " + std::to_string(line_no) + ": expected 5 fields");
    try {
      op_record r;
      r.op_index = std::stoull(fields[0]);
      r.op = parse_op_kind(fields[1]);
      r.latency_ns = std::stoull(fields[2]);
      r.live_bytes = std::stoull(fields[3]);
      r.reserved_bytes = std::stoull(fields[4]);
      out.push_back(r);
    } catch (const std::logic_error& ex) {
      throw std::runtime_error("csv line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return out;
}

}  // namespace devalloc::bench
