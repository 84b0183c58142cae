#include "uriah/layout.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace uriah {

std::string_view prim_name(Prim p) {
  switch (p) {
  case Prim::I8: return "i8";
  case Prim::I16: return "i16";
  case Prim::I32: return "i32";
  case Prim::I64: return "i64";
  case Prim::Ref: return "ref";
  }
  return "?";
}

std::optional<Prim> prim_from_name(std::string_view s) {
  if (s == "i8") return Prim::I8;
  if (s == "i16") return Prim::I16;
  if (s == "i32") return Prim::I32;
  if (s == "i64") return Prim::I64;
  if (s == "ref") return Prim::Ref;
  return std::nullopt;
}

std::int64_t prim_min(Prim p) {
  switch (p) {
  case Prim::I8: return std::numeric_limits<std::int8_t>::min();
  case Prim::I16: return std::numeric_limits<std::int16_t>::min();
  case Prim::I32: return std::numeric_limits<std::int32_t>::min();
  default: return std::numeric_limits<std::int64_t>::min();
  }
}

std::int64_t prim_max(Prim p) {
  switch (p) {
  case Prim::I8: return std::numeric_limits<std::int8_t>::max();
  case Prim::I16: return std::numeric_limits<std::int16_t>::max();
  case Prim::I32: return std::numeric_limits<std::int32_t>::max();
  default: return std::numeric_limits<std::int64_t>::max();
  }
}

std::uint64_t FieldDesc::element_size() const {
  return prim ? prim_size(*prim) : compound->total_size;
}

std::string FieldDesc::element_name() const {
  return prim ? std::string(prim_name(*prim)) : compound->tag;
}

bool FieldDesc::same_layout(const FieldDesc &o) const {
  if (offset != o.offset || count != o.count || size != o.size) return false;
  if (prim.has_value() != o.prim.has_value()) return false;
  if (prim) return *prim == *o.prim;
  return uriah::same_layout(*compound, *o.compound);
}

std::string AllocatedType::canonical() const {
  std::string s = std::to_string(total_size) + "|" + tag + "|";
  for (const auto &f : fields) {
    s += f.name + ":" + std::to_string(f.offset) + ":" + std::to_string(f.size) +
         ":" + f.element_name();
    if (f.is_array) s += "[" + std::to_string(f.count) + "]";
    s += ";";
  }
  return s;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t AllocatedType::hash() const { return fnv1a64(canonical()); }

const std::vector<LayoutEntry> &AllocatedType::flat() const {
  return flat_cache;
}

static void flatten_into(const AllocatedType &t, std::uint64_t base,
                         std::vector<LayoutEntry> &out) {
  for (const auto &f : t.fields) {
    std::uint64_t esz = f.element_size();
    for (std::uint64_t i = 0; i < f.count; ++i) {
      std::uint64_t at = base + f.offset + i * esz;
      if (f.prim)
        out.push_back({at, *f.prim});
      else
        flatten_into(*f.compound, at, out);
    }
  }
}

std::vector<LayoutEntry> flatten_layout(const AllocatedType &t) {
  std::vector<LayoutEntry> out;
  flatten_into(t, 0, out);
  return out;
}

TypePtr make_type(std::string tag, std::vector<FieldDesc> fields) {
  if (fields.empty())
    throw std::invalid_argument("compound type '" + tag + "' has no fields");
  auto t = std::make_shared<AllocatedType>();
  t->tag = std::move(tag);
  std::uint64_t off = 0;
  for (auto &f : fields) {
    f.offset = off;
    f.size = f.element_size() * f.count;
    off += f.size;
  }
  t->total_size = off;
  t->fields = std::move(fields);
  t->flat_cache = flatten_layout(*t);
  return t;
}

TypePtr make_prim_type(Prim p, std::uint64_t count, bool is_array) {
  FieldDesc f;
  f.name = "v";
  f.prim = p;
  f.count = count;
  f.is_array = is_array;
  std::string tag(prim_name(p));
  if (is_array) tag += "[" + std::to_string(count) + "]";
  return make_type(std::move(tag), {f});
}

TypePtr make_array_type(const TypePtr &elem, std::uint64_t count) {
  FieldDesc f;
  f.name = "v";
  f.compound = elem;
  f.count = count;
  f.is_array = true;
  return make_type(elem->tag + "[" + std::to_string(count) + "]", {f});
}

bool same_layout(const AllocatedType &a, const AllocatedType &b) {
  return a.total_size == b.total_size && a.flat() == b.flat();
}

bool is_compatible_cast(const AllocatedType &tn, const AllocatedType &t) {
  const auto &big = tn.flat();
  const auto &small = t.flat();
  if (small.size() > big.size() || t.total_size > tn.total_size) return false;
  return std::equal(small.begin(), small.end(), big.begin());
}

bool is_compatible_at(const AllocatedType &a, const AllocatedType &t,
                      std::uint64_t offset) {
  if (offset + t.total_size > a.total_size) return false;
  const auto &big = a.flat();
  auto it = std::lower_bound(
      big.begin(), big.end(), offset,
      [](const LayoutEntry &e, std::uint64_t o) { return e.offset < o; });
  for (const auto &e : t.flat()) {
    if (it == big.end() || it->offset != e.offset + offset || it->prim != e.prim)
      return false;
    ++it;
  }
  return true;
}

std::optional<TypePtr> realloc_type_transition(const TypePtr &from,
                                               const TypePtr &to) {
  if (same_layout(*from, *to)) return to;
  const auto &a = from->fields;
  const auto &b = to->fields;
  if (b.size() < a.size() || to->total_size < from->total_size)
    return std::nullopt;
  for (std::size_t i = 0; i + 1 < a.size(); ++i)
    if (!a[i].same_layout(b[i])) return std::nullopt;
  const FieldDesc &last = a.back();
  const FieldDesc &nl = b[a.size() - 1];
  if (!last.same_layout(nl)) {
    // Only a trailing array may grow, by whole elements of the same type.
    if (!last.is_array || !nl.is_array || nl.offset != last.offset ||
        nl.count < last.count || nl.prim != last.prim)
      return std::nullopt;
    if (!last.prim && !same_layout(*last.compound, *nl.compound))
      return std::nullopt;
  }
  return to;
}

std::optional<TypePtr> realloc_type_transition(const TypePtr &from,
                                               std::uint64_t new_size) {
  if (new_size == from->total_size) return from;
  if (new_size < from->total_size) return std::nullopt;
  const FieldDesc &last = from->fields.back();
  std::uint64_t grow = new_size - from->total_size;
  if (!last.is_array || grow % last.element_size() != 0) return std::nullopt;
  auto fields = from->fields;
  fields.back().count += grow / last.element_size();
  return make_type(from->tag + "+" + std::to_string(grow), std::move(fields));
}

} // namespace uriah
