#include "uriah/spatial.hpp"

#include <algorithm>

namespace uriah {

using namespace hir;

std::optional<std::string> apply_realloc_rule(SpatialState &st, const ReallocEvent &ev) {
  Interval old = st.size.count(ev.from) ? st.size[ev.from] : Interval::empty();
  auto &slot = st.size[ev.to];
  slot = slot.join(ev.size);
  if (!ev.size.is_singleton()) return "realloc-variable";
  if (!old.is_empty() && ev.size.lo < old.hi) return "realloc-shrink";
  return std::nullopt;
}

std::vector<Reason> validate_spatial(const Program &p, const SiteEvents &e, const SpatialOptions &opt) {
  std::vector<Reason> out;
  const AllocationSite &site = p.sites[e.site];
  Where site_at{site.function, site.line, site.instr_id};
  if (e.alloc_size.is_empty()) return out;  // never allocated
  if (!e.alloc_size.is_singleton()) out.push_back({"spatial", "non-constant-size", site_at, e.alloc_size.str()});

  SpatialState st;
  st.size[-1] = e.alloc_size;
  // Reallocs in instruction order; a version's source is sized first.
  auto reallocs = e.reallocs;
  std::stable_sort(reallocs.begin(), reallocs.end(),
                   [](const ReallocEvent &a, const ReallocEvent &b) { return a.at.instr < b.at.instr; });
  for (int round = 0; round < 2; ++round)
    for (const auto &r : reallocs) {
      SpatialState tmp = st;
      auto err = apply_realloc_rule(tmp, r);
      st.size[r.to] = tmp.size[r.to];
      if (round == 1) {
        if (err) out.push_back({"spatial", *err, r.at, r.size.str()});
        if (!opt.skip_free_check && !(r.index == Interval::of(0)))
          out.push_back({"spatial", "invalid-free", r.at, "realloc at index " + r.index.str()});
      }
    }

  const std::int64_t lower = opt.skip_lower_bound ? Interval::kMin : 0;
  auto limit = [&](int version) -> std::optional<std::int64_t> {
    auto it = st.size.find(version);
    if (it == st.size.end() || it->second.is_empty()) return std::nullopt;
    return it->second.lo;  // smallest possible size
  };
  for (const auto &g : e.geps) {
    if (g.offset.is_empty()) continue;
    if (g.offset.lo == Interval::kMin || g.offset.hi == Interval::kMax) {
      out.push_back({"spatial", "non-constant-offset", g.at, g.offset.str()});
      continue;
    }
    if (!opt.skip_lower_bound && g.offset.lo < 0)
      out.push_back({"spatial", "negative-offset", g.at, g.offset.str()});
    if (auto sz = limit(g.version); sz && !g.result.within(lower, *sz - 1))
      out.push_back({"spatial", "index-out-of-bounds", g.at, g.result.str() + " size " + std::to_string(*sz)});
  }
  for (const auto &a : e.aliases)
    if (auto sz = limit(a.version); sz && !a.index.within(lower, *sz - 1))
      out.push_back({"spatial", "index-out-of-bounds", a.at, a.index.str() + " size " + std::to_string(*sz)});
  for (const auto &a : e.accesses) {
    auto sz = limit(a.version);
    if (!sz) continue;
    std::int64_t w = static_cast<std::int64_t>(prim_size(a.prim));
    if (!a.index.within(lower, *sz - w))
      out.push_back({"spatial", "out-of-bounds-access", a.at,
                     a.index.str() + " width " + std::to_string(w) + " size " + std::to_string(*sz)});
  }
  for (const auto &f : e.frees)
    if (!opt.skip_free_check && !(f.index == Interval::of(0)))
      out.push_back({"spatial", "invalid-free", f.at, f.index.str()});

  // Keep the first occurrence of each (code, location).
  std::vector<Reason> uniq;
  for (auto &r : out) {
    bool dup = std::any_of(uniq.begin(), uniq.end(), [&](const Reason &u) {
      return u.code == r.code && u.at.instr == r.at.instr && u.at.fn == r.at.fn && u.at.line == r.at.line;
    });
    if (!dup) uniq.push_back(std::move(r));
  }
  return uniq;
}

} // namespace uriah
