//===- events.hpp - Per-site facts consumed by the validators ---*- C++ -*-===//
//
// Both the static pass and the path explorer reduce a program to the same
// set of per-site observations: how big each version of the object is, and
// every gep, access, free, realloc and cast that may touch it, with the
// byte index involved.  The validators only ever look at these.
//
//===----------------------------------------------------------------------===//
#pragma once

#include "uriah/interval.hpp"
#include "uriah/layout.hpp"
#include "uriah/ranges.hpp"

#include <map>
#include <string>
#include <vector>

namespace uriah {

struct Where {
  int fn = -1;
  int line = 0;
  std::uint32_t instr = 0;
};

/// One failed rule.  Rendered as "validator:code@fn:line".
struct Reason {
  std::string validator;
  std::string code;
  Where at;
  std::string detail;
  std::string str(const hir::Program &p) const;
};

/// Version -1 is the object as allocated; otherwise the id of the realloc
/// instruction that produced it.
struct GepEvent { Where at; int version; Interval base; Interval offset; Interval result; };
struct AliasEvent { Where at; int version; Interval index; };
struct AccessEvent { Where at; int version; Interval index; Prim prim; bool store; };
struct FreeEvent { Where at; int version; Interval index; };
struct ReallocEvent {
  Where at;
  int from;
  int to;
  Interval index;
  Interval size;
  TypePtr to_type;  // typed realloc
};
struct CastEvent {
  Where at;
  int version;
  Interval index;
  TypePtr target;
  TypePtr operand_type;  // static pointee of the operand; null if opaque
  bool elided = false;
};
struct IntCastEvent { Where at; Prim from; Interval value; Prim to; };

struct SiteEvents {
  int site = -1;
  Interval alloc_size;
  std::vector<GepEvent> geps;
  std::vector<AliasEvent> aliases;
  std::vector<AccessEvent> accesses;
  std::vector<FreeEvent> frees;
  std::vector<ReallocEvent> reallocs;
  std::vector<CastEvent> casts;
  std::vector<IntCastEvent> int_casts;

  /// Size of a version, from the allocation or the producing realloc.
  Interval size_of(int version) const;
  void merge(const SiteEvents &o);
};

struct EventSet {
  std::vector<SiteEvents> sites;  // indexed by site id
};

EventSet collect_static_events(const hir::Program &p, const hir::ProgramIndex &ix,
                               const AliasResult &a, const IntRanges &ints,
                               const IndexRanges &idx);

/// Empty per-site event lists with allocation sizes filled in.
EventSet empty_events(const hir::Program &p, const IntRanges &ints);

} // namespace uriah
