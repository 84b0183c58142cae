//===- typecheck.hpp - Cast and layout validation per site ------*- C++ -*-===//
#pragma once

#include "uriah/events.hpp"

#include <map>

namespace uriah {

/// True iff every value in `v` is representable in `to` (and in `from`).
bool validate_int_cast(const Interval &v, Prim from, Prim to);

struct TypeResolution {
  TypePtr type;                  // null on failure
  std::optional<Reason> failure;
};

/// The concrete allocated-type of a site as first allocated.  Typed allocs
/// use their declared type.  Byte allocs take the type of the casts that
/// first view them at offset 0 from an opaque ref; all such casts must agree
/// on the layout and cover the whole allocation.  A byte alloc that is never
/// cast is an array of the one primitive it is accessed with (i8 if none).
TypeResolution resolve_delayed_type(const hir::Program &p, const SiteEvents &e);

struct TypeOptions {
  /// Check each cast against the operand's static pointee type.  The path
  /// explorer turns this off: it knows the object behind every cast.
  bool static_casts = true;
};

struct TypeVerdict {
  std::vector<Reason> reasons;
  TypePtr type;                       // version -1
  std::map<int, TypePtr> versions;    // every version, including -1
};

TypeVerdict validate_type(const hir::Program &p, const SiteEvents &e, const TypeOptions &opt = {});

} // namespace uriah
