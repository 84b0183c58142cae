#include "uriah/typecheck.hpp"

#include "uriah/ranges.hpp"

#include <algorithm>
#include <set>

namespace uriah {

using namespace hir;

namespace {

constexpr std::uint64_t kMaxEnumerated = 4096;

bool has_entry(const AllocatedType &t, std::int64_t off, Prim prim) {
  if (off < 0) return false;
  const auto &flat = t.flat();
  auto it = std::lower_bound(flat.begin(), flat.end(), static_cast<std::uint64_t>(off),
                             [](const LayoutEntry &e, std::uint64_t o) { return e.offset < o; });
  return it != flat.end() && it->offset == static_cast<std::uint64_t>(off) && it->prim == prim;
}

Where site_where(const Program &p, int site) {
  const AllocationSite &s = p.sites[site];
  return {s.function, s.line, s.instr_id};
}

} // namespace

bool validate_int_cast(const Interval &v, Prim from, Prim to) {
  Interval f = full_range(from), t = full_range(to);
  return v.within(f.lo, f.hi) && v.within(t.lo, t.hi);
}

TypeResolution resolve_delayed_type(const Program &p, const SiteEvents &e) {
  const AllocationSite &s = p.sites[e.site];
  if (s.declared) return {s.declared, std::nullopt};
  Where at = site_where(p, e.site);
  if (!e.alloc_size.is_singleton() || e.alloc_size.lo <= 0)
    return {nullptr, Reason{"type", "delayed-type", at, "allocation size not constant"}};
  std::uint64_t size = static_cast<std::uint64_t>(e.alloc_size.lo);
  TypePtr chosen;
  for (const auto &c : e.casts) {
    if (c.version != -1 || c.operand_type || !(c.index == Interval::of(0))) continue;
    if (!chosen) {
      chosen = c.target;
      continue;
    }
    if (!same_layout(*chosen, *c.target))
      return {nullptr, Reason{"type", "delayed-type", c.at,
                              "viewed as both " + chosen->tag + " and " + c.target->tag}};
  }
  if (chosen) {
    if (chosen->total_size != size)
      return {nullptr, Reason{"type", "delayed-type", at,
                              chosen->tag + " does not cover " + std::to_string(size) + " bytes"}};
    return {chosen, std::nullopt};
  }
  std::set<Prim> prims;
  for (const auto &a : e.accesses)
    if (a.version == -1) prims.insert(a.prim);
  if (prims.size() > 1)
    return {nullptr, Reason{"type", "delayed-type", at, "untyped bytes accessed as several primitives"}};
  Prim prim = prims.empty() ? Prim::I8 : *prims.begin();
  if (size % prim_size(prim) != 0)
    return {nullptr, Reason{"type", "delayed-type", at, "size not a multiple of the access width"}};
  return {make_prim_type(prim, size / prim_size(prim), true), std::nullopt};
}

TypeVerdict validate_type(const Program &p, const SiteEvents &e, const TypeOptions &opt) {
  TypeVerdict v;
  if (e.alloc_size.is_empty()) {
    // Never allocated: only the declared type matters.
    v.type = p.sites[e.site].declared;
    if (!v.type && p.sites[e.site].constant_size)
      v.type = make_prim_type(Prim::I8, static_cast<std::uint64_t>(p.sites[e.site].size), true);
    v.versions[-1] = v.type;
    return v;
  }
  TypeResolution base = resolve_delayed_type(p, e);
  if (base.failure) v.reasons.push_back(*base.failure);
  v.type = base.type;
  v.versions[-1] = base.type;

  // Version types, following realloc chains until nothing changes.
  auto reallocs = e.reallocs;
  std::stable_sort(reallocs.begin(), reallocs.end(),
                   [](const ReallocEvent &a, const ReallocEvent &b) { return a.at.instr < b.at.instr; });
  std::set<std::uint32_t> reported;
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto &r : reallocs) {
      auto from = v.versions.find(r.from);
      if (from == v.versions.end() || !from->second) continue;
      std::optional<TypePtr> next;
      if (r.to_type) next = realloc_type_transition(from->second, r.to_type);
      else if (r.size.is_singleton() && r.size.lo > 0)
        next = realloc_type_transition(from->second, static_cast<std::uint64_t>(r.size.lo));
      else continue;  // spatial reports the variable size
      if (!next) {
        if (reported.insert(r.at.instr).second)
          v.reasons.push_back({"type", "realloc-retype", r.at, "from " + from->second->tag});
        continue;
      }
      auto cur = v.versions.find(r.to);
      if (cur == v.versions.end()) {
        v.versions[r.to] = *next;
        changed = true;
      } else if (cur->second && !same_layout(*cur->second, **next)) {
        if (reported.insert(r.at.instr).second)
          v.reasons.push_back({"type", "realloc-retype", r.at, "conflicting layouts"});
      }
    }
  }
  auto type_of = [&](int version) -> TypePtr {
    auto it = v.versions.find(version);
    return it == v.versions.end() ? nullptr : it->second;
  };

  for (const auto &c : e.casts) {
    if (c.elided) continue;
    if (opt.static_casts && c.operand_type && !is_compatible_cast(*c.operand_type, *c.target)) {
      v.reasons.push_back({"type", "incompatible-cast", c.at, c.operand_type->tag + " -> " + c.target->tag});
      continue;
    }
    TypePtr t = type_of(c.version);
    if (!t) continue;
    bool ok = !c.index.is_empty() && c.index.width() <= kMaxEnumerated;
    for (std::int64_t off = c.index.lo; ok && off <= c.index.hi; off += c.index.stride)
      ok = off >= 0 && is_compatible_at(*t, *c.target, static_cast<std::uint64_t>(off));
    if (c.index.is_empty()) ok = true;
    if (!ok)
      v.reasons.push_back({"type", "cast-layout-mismatch", c.at,
                           c.target->tag + " at " + c.index.str() + " in " + t->tag});
  }
  for (const auto &a : e.accesses) {
    TypePtr t = type_of(a.version);
    if (!t || a.index.is_empty()) continue;
    bool ok = a.index.width() <= kMaxEnumerated;
    for (std::int64_t off = a.index.lo; ok && off <= a.index.hi; off += a.index.stride)
      ok = has_entry(*t, off, a.prim);
    if (!ok)
      v.reasons.push_back({"type", "access-type-mismatch", a.at,
                           std::string(prim_name(a.prim)) + " at " + a.index.str() + " in " + t->tag});
  }
  for (const auto &ic : e.int_casts)
    if (!validate_int_cast(ic.value, ic.from, ic.to))
      v.reasons.push_back({"type", "int-cast", ic.at,
                           ic.value.str() + " " + std::string(prim_name(ic.from)) + "->" +
                               std::string(prim_name(ic.to))});

  std::vector<Reason> uniq;
  for (auto &r : v.reasons) {
    bool dup = std::any_of(uniq.begin(), uniq.end(), [&](const Reason &u) {
      return u.code == r.code && u.at.instr == r.at.instr && u.at.fn == r.at.fn;
    });
    if (!dup) uniq.push_back(std::move(r));
  }
  v.reasons = std::move(uniq);
  if (!v.reasons.empty()) v.type = base.type;
  return v;
}

} // namespace uriah
