//===- allocator.hpp - Simulated two-heap runtime ---------------*- C++ -*-===//
//
// Safe heap: one pool per allocated-type.  A pool owns spans carved from
// simulated OS memory; every slot in a pool has size round_up(S, 16) and
// freed slots go back on the pool's LIFO freelist, never to another type.
// Memory fresh from the OS reads as zero.
//
// Unsafe heap: a bump region of 2^40 bytes at kUnsafeBase with per-size
// freelists.  Every access through an unsafe handle is masked into the
// region.
//
// Addresses are plain integers; bytes live in a sparse map.
//
//===----------------------------------------------------------------------===//
#pragma once

#include "uriah/layout.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace uriah {

inline constexpr std::uint64_t kUnsafeBase = 0x700000000000ull;
inline constexpr std::uint64_t kUnsafeSize = 1ull << 40;
inline constexpr std::uint64_t kSafeBase = 0x100000000000ull;
inline constexpr std::uint64_t kSafeSize = 1ull << 40;
inline constexpr std::uint64_t kSpanBytes = 1ull << 16;
inline constexpr std::uint64_t kSlotAlign = 16;

constexpr std::uint64_t mask_unsafe(std::uint64_t a) { return kUnsafeBase | (a & (kUnsafeSize - 1)); }
constexpr std::uint64_t round_up(std::uint64_t v, std::uint64_t a) { return (v + a - 1) / a * a; }

struct AllocatorOptions {
  /// Test-only control: one size-class freelist shared by all types.
  bool pools_disabled = false;
  /// Test-only control: hand out OS memory without zeroing it.
  bool zero_on_fresh = true;
};

struct Span {
  std::uint64_t start = 0;
  std::uint64_t size = 0;
  std::uint64_t pool = 0;  // allocated-type hash (size class when pools are disabled)
};

struct Pool {
  TypePtr type;
  std::uint64_t slot_size = 0;
  std::vector<std::uint64_t> spans;     // span starts
  std::vector<std::uint64_t> freelist;  // LIFO, slot starts
  std::uint64_t bump = 0;               // next never-used slot in the newest span
  std::uint64_t bump_end = 0;
};

enum class SlotState : std::uint8_t { Live, Free };

struct SlotInfo {
  std::uint64_t size = 0;       // slot bytes
  std::uint64_t obj_size = 0;   // bytes of the object now (or last) in it
  std::uint64_t type_hash = 0;  // type of the object now (or last) in it
  SlotState state = SlotState::Live;
  bool safe = true;
};

enum class FreeStatus : std::uint8_t { Ok, DoubleFree, Foreign };

class HeapState {
public:
  explicit HeapState(AllocatorOptions opt = {}) : opt_(opt) {}

  std::optional<std::uint64_t> salloc(const TypePtr &t);
  FreeStatus sfree(std::uint64_t addr);
  /// nullopt with `status` set when the old slot cannot be freed.
  std::optional<std::uint64_t> srealloc(std::uint64_t addr, const TypePtr &t_new, FreeStatus *status = nullptr);

  std::optional<std::uint64_t> ualloc(std::uint64_t size);
  FreeStatus ufree(std::uint64_t addr);

  std::uint8_t read_byte(std::uint64_t addr) const;
  void write_byte(std::uint64_t addr, std::uint8_t v);
  /// Never written since the OS handed the byte out.
  bool untouched(std::uint64_t addr) const { return bytes_.find(addr) == bytes_.end(); }

  bool in_safe(std::uint64_t a) const { return a >= kSafeBase && a < kSafeBase + kSafeSize; }
  bool in_unsafe(std::uint64_t a) const { return a >= kUnsafeBase && a < kUnsafeBase + kUnsafeSize; }

  /// Span containing `addr`, if any.
  const Span *span_at(std::uint64_t addr) const;
  /// Slot containing `addr`, if any (slot start, info).
  std::optional<std::pair<std::uint64_t, SlotInfo>> slot_at(std::uint64_t addr) const;

  const std::map<std::uint64_t, Pool> &pools() const { return pools_; }
  const std::map<std::uint64_t, Span> &spans() const { return spans_; }
  const std::map<std::uint64_t, SlotInfo> &slots() const { return slots_; }
  const AllocatorOptions &options() const { return opt_; }

  /// Violations found while mutating the heap (span type changes, overlaps,
  /// freelist inconsistencies).  Cleared by the caller.
  std::vector<std::string> violations;

  /// Full scan of every invariant; appends to `violations`.
  void check_all();
  /// Order-independent digest of spans, slots and freelists.
  std::uint64_t checksum() const;

private:
  AllocatorOptions opt_;
  std::map<std::uint64_t, Pool> pools_;
  std::map<std::uint64_t, Span> spans_;
  std::map<std::uint64_t, SlotInfo> slots_;
  std::map<std::uint64_t, std::vector<std::uint64_t>> unsafe_free_;  // slot size -> LIFO
  std::unordered_map<std::uint64_t, std::uint8_t> bytes_;
  std::map<std::uint64_t, std::set<std::uint64_t>> span_types_;  // span -> types ever placed
  std::map<std::uint64_t, std::uint64_t> zeroed_;  // granted ranges: start -> end
  std::uint64_t os_cursor_ = kSafeBase;
  std::uint64_t unsafe_cursor_ = kUnsafeBase;

  void grant(std::uint64_t start, std::uint64_t size);
  void new_slot(std::uint64_t addr, SlotInfo info);
};

// ---- traces ----------------------------------------------------------------

struct TraceEvent {
  enum Op : std::uint8_t { Alloc, Free, Realloc, Write, Read, StaleRead, StaleWrite } op = Alloc;
  int site = -1;
  int handle = -1;
  int new_handle = -1;
  std::optional<std::uint64_t> type_hash;  // realloc to a declared type
  std::optional<std::uint64_t> size;       // realloc to a byte size; size of an unsafe variable alloc
  std::uint64_t offset = 0;
  std::uint64_t len = 0;
  std::uint64_t value = 0;  // written bytes: little-endian, repeating every 8
  int thread = 0;
  int line = 0;             // source line in the trace file
};

std::string_view trace_op_name(TraceEvent::Op op);

struct TraceError : std::runtime_error {
  int line;
  TraceError(int l, const std::string &m) : std::runtime_error("line " + std::to_string(l) + ": " + m), line(l) {}
};

std::vector<TraceEvent> parse_trace(std::string_view jsonl);
std::string trace_to_jsonl(const std::vector<TraceEvent> &events);

/// Where each site's objects live.
struct SitePlacement {
  bool safe = false;
  TypePtr type;               // safe sites
  std::uint64_t size = 0;     // unsafe sites of constant size; 0: taken from the event
};

struct SiteTable {
  std::map<int, SitePlacement> sites;
  std::map<std::uint64_t, TypePtr> types;  // by hash, for typed reallocs
};

struct EventOutcome {
  std::size_t index = 0;
  std::string outcome;  // ok | oob-blocked-by-classification | masked | type-preserved-reuse
                        // | double-free | ubi-zero-read | type-violation | error
  std::uint64_t address = 0;
  std::string detail;
};

struct TraceReport {
  std::vector<EventOutcome> events;
  std::map<std::string, std::size_t> counts;
  std::vector<std::string> violations;  // invariant failures, prefixed by event index
  std::uint64_t checksum = 0;
  std::size_t live_slots = 0;
  std::size_t free_slots = 0;
  std::size_t spans = 0;
  std::size_t pools = 0;

  std::string to_json(bool per_event = true) const;
};

/// Replays `events` against a fresh heap, checking invariants after every
/// event.  Throws TraceError for events that do not fit the trace schema or
/// the site table.
TraceReport replay_trace(HeapState &heap, const SiteTable &table, const std::vector<TraceEvent> &events);

/// A well-formed random trace over the table's sites.
std::vector<TraceEvent> random_trace(std::uint64_t seed, std::size_t n, const SiteTable &table);

} // namespace uriah
