//===- layout.hpp - Allocated types and flattened layouts -------*- C++ -*-===//
//
// An allocated-type is the tuple (S, T, fields) that identifies a safe-heap
// pool.  Compounds are packed: each field starts where the previous one ends,
// no padding.  Nested compounds and arrays flatten into a sequence of
// (offset, primitive) entries, which is the representation every type
// comparison in the pipeline works on.
//
//===----------------------------------------------------------------------===//
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace uriah {

enum class Prim : std::uint8_t { I8, I16, I32, I64, Ref };

constexpr std::uint64_t prim_size(Prim p) {
  switch (p) {
  case Prim::I8: return 1;
  case Prim::I16: return 2;
  case Prim::I32: return 4;
  case Prim::I64: return 8;
  case Prim::Ref: return 8;
  }
  return 0;
}

std::string_view prim_name(Prim p);
std::optional<Prim> prim_from_name(std::string_view s);
inline bool is_int(Prim p) { return p != Prim::Ref; }

/// Signed range representable by an integer primitive.
std::int64_t prim_min(Prim p);
std::int64_t prim_max(Prim p);

struct AllocatedType;
using TypePtr = std::shared_ptr<const AllocatedType>;

/// One declared field: either a primitive or a nested compound, optionally
/// an array of `count` elements.
struct FieldDesc {
  std::string name;
  std::optional<Prim> prim;  // set iff the element is primitive
  TypePtr compound;          // set iff the element is a compound
  std::uint64_t count = 1;
  bool is_array = false;
  std::uint64_t offset = 0;
  std::uint64_t size = 0;  // element size * count

  std::uint64_t element_size() const;
  std::string element_name() const;
  /// Layout-level equality: element type, count and offset; names ignored.
  bool same_layout(const FieldDesc &o) const;
};

struct LayoutEntry {
  std::uint64_t offset;
  Prim prim;
  bool operator==(const LayoutEntry &) const = default;
};

struct AllocatedType {
  std::uint64_t total_size = 0;
  std::string tag;
  std::vector<FieldDesc> fields;

  std::size_t field_count() const { return fields.size(); }
  /// "S|tag|f:o:s:τ;...": input to the pool hash.
  std::string canonical() const;
  /// FNV-1a 64 over canonical().
  std::uint64_t hash() const;
  const std::vector<LayoutEntry> &flat() const;

  // Cached flattened layout; computed on construction by make_type().
  std::vector<LayoutEntry> flat_cache;
};

/// Builds a packed compound from fields whose offset/size are filled in here.
/// Throws std::invalid_argument on an empty field list.
TypePtr make_type(std::string tag, std::vector<FieldDesc> fields);
/// Scalar or array of a primitive, e.g. `i8[10]`.
TypePtr make_prim_type(Prim p, std::uint64_t count, bool is_array);
/// Array of a compound, e.g. `P[4]`.
TypePtr make_array_type(const TypePtr &elem, std::uint64_t count);

std::vector<LayoutEntry> flatten_layout(const AllocatedType &t);
std::uint64_t fnv1a64(std::string_view bytes);

/// True iff T's flattened layout equals, or is an exact prefix of, TN's.
bool is_compatible_cast(const AllocatedType &tn, const AllocatedType &t);
/// T viewed at byte `offset` inside A: A's entries from `offset` on, rebased,
/// must start with T's entries.
bool is_compatible_at(const AllocatedType &a, const AllocatedType &t,
                      std::uint64_t offset);
bool same_layout(const AllocatedType &a, const AllocatedType &b);

/// Realloc to a new declared type: T' must keep T's leading fields, may grow
/// the last array field, and may append fields.  nullopt means unsafe.
std::optional<TypePtr> realloc_type_transition(const TypePtr &from,
                                               const TypePtr &to);
/// Realloc to a byte size: identity, or growth of a trailing array field by
/// whole elements.  nullopt means unsafe.
std::optional<TypePtr> realloc_type_transition(const TypePtr &from,
                                               std::uint64_t new_size);

} // namespace uriah
