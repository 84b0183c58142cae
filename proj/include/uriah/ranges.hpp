//===- ranges.hpp - Integer and pointer-index range analysis ----*- C++ -*-===//
//
// Integer ranges: flow-insensitive over SSA, interprocedural through
// parameters and returns.  Values on a dependency cycle widen to their full
// width, except induction variables of recognized counted loops.
//
// Index ranges: for every ref-valued node of the points-to graph, the byte
// offset from the start of each abstract object it may point into.  Cycles
// through memory normally widen to top; a cycle that repeatedly loads a
// pointer from one cell, advances it by bounded non-negative amounts and
// stores it back is summarised by counting how often each load can run.
//
//===----------------------------------------------------------------------===//
#pragma once

#include "uriah/alias.hpp"
#include "uriah/interval.hpp"

#include <map>
#include <set>

namespace uriah {

/// Inside the body of a counted loop the induction variable is known to
/// be below the bound; uses there see the narrower range.
struct LoopRefinement {
  int fn;
  hir::ValueId value;
  std::vector<bool> blocks;
  Interval range;
};

struct IntRanges {
  std::vector<std::vector<Interval>> val;  // [fn][value]
  std::vector<LoopRefinement> refinements;

  Interval of(int fn, const hir::Operand &o) const {
    if (o.is_const) return Interval::of(o.constant);
    return val[fn][o.value];
  }
  /// Range of `o` as seen by an instruction in block `b`.
  Interval at(int fn, hir::BlockId b, const hir::Operand &o) const {
    if (o.is_const) return Interval::of(o.constant);
    for (const auto &r : refinements)
      if (r.fn == fn && r.value == o.value && r.blocks[b]) return r.range;
    return val[fn][o.value];
  }
};

IntRanges compute_int_ranges(const hir::Program &p, const hir::ProgramIndex &ix);

/// Interval of a value of the given width when nothing else is known.
Interval full_range(Prim p);

using IndexMap = std::map<ObjId, Interval>;

struct Accumulation {
  ObjId cell;         // object whose cell holds the advancing pointer
  ObjId key;          // object the pointer points into
  Interval base;      // before any advance
  Interval result;    // after all advances
  hir::Count loads;   // bounded number of reloads feeding the cycle
};

struct IndexRanges {
  std::vector<IndexMap> node;  // per alias-graph node
  std::vector<Accumulation> accumulations;
  std::set<ObjId> advanced;  // objects some pointer stored in memory is moved through

  const IndexMap &of(const AliasResult &a, int fn, hir::ValueId v) const;
};

IndexRanges compute_index_ranges(const hir::Program &p, const hir::ProgramIndex &ix,
                                 const AliasResult &a, const IntRanges &ints);

} // namespace uriah
