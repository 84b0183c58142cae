//===- spatial.hpp - Bounds validation per allocation site ------*- C++ -*-===//
#pragma once

#include "uriah/events.hpp"

#include <map>
#include <optional>

namespace uriah {

struct SpatialOptions {
  /// Test-only: drop the negative-offset and lower-bound checks.
  bool skip_lower_bound = false;
  /// Test-only: accept frees and reallocs at a nonzero index.
  bool skip_free_check = false;
};

/// Size of every version of a site seen so far.  A version that is never
/// reallocated keeps its own size, so stale aliases are checked against it.
struct SpatialState {
  std::map<int, Interval> size;
};

/// Grows the state by one realloc.  Returns the failure code, if any:
/// "realloc-variable" for a non-constant new size, "realloc-shrink" when the
/// new size is below the old one.
std::optional<std::string> apply_realloc_rule(SpatialState &st, const ReallocEvent &ev);

/// Index of a use: the alias index moved by the use's offset.
inline Interval eval_index_range(const Interval &alias_index, const Interval &offset) {
  return alias_index.add(offset);
}

/// All violated rules for one site, in event order.  Empty means safe.
std::vector<Reason> validate_spatial(const hir::Program &p, const SiteEvents &e,
                                     const SpatialOptions &opt = {});

} // namespace uriah
