#include "uriah/shared.hpp"

#include <algorithm>

namespace uriah {

using namespace hir;

std::map<int, SharedFlag> find_shared_objects(const Program &p, const ProgramIndex &ix,
                                              const AliasResult &a, const RegionInfo &regions) {
  std::map<int, SharedFlag> out;
  bool any_spawn = std::any_of(ix.calls.begin(), ix.calls.end(),
                               [&](const CallSite &c) { return c.spawn && ix.reachable[c.caller]; });
  if (!any_spawn) return out;
  auto mark = [&](ObjId o, const char *why) {
    if (a.objects[o].kind != AbsObject::Heap) return;
    SharedFlag &f = out[a.objects[o].site];
    if (!f.shared) f = {true, why};
  };
  for (const auto &c : ix.calls) {
    if (!c.spawn || !ix.reachable[c.caller]) continue;
    const Instr &in = p.functions[c.caller].blocks[c.block].instrs[c.index];
    for (const auto &arg : in.args)
      if (!arg.is_const)
        for (ObjId o : a.pts_of(c.caller, arg.value)) mark(o, "spawn-argument");
  }
  for (std::size_t f = 0; f < p.functions.size(); ++f) {
    if (!ix.reachable[f]) continue;
    const Function &fn = p.functions[f];
    for (ValueId v = 0; v < fn.values.size(); ++v) {
      if (!fn.values[v].type.is_ref) continue;
      unsigned bits = regions.bits[f][v];
      if (!bits) continue;
      const char *why = (bits & kRegionGlobal) ? "global-alias" : "heap-alias";
      for (ObjId o : a.pts_of(static_cast<int>(f), v)) mark(o, why);
    }
  }
  return out;
}

ThreadsSet thread_count(const Program &p, const ProgramIndex &ix, const AliasResult &a, int site) {
  // Functions that hold an alias to the site.
  std::vector<bool> uses(p.functions.size(), false);
  for (std::size_t f = 0; f < p.functions.size(); ++f) {
    if (!ix.reachable[f]) continue;
    for (ValueId v = 0; v < p.functions[f].values.size() && !uses[f]; ++v)
      for (ObjId o : a.pts_of(static_cast<int>(f), v))
        if (a.objects[o].kind == AbsObject::Heap && a.objects[o].site == site) {
          uses[f] = true;
          break;
        }
  }
  ThreadsSet ts;
  Count total = 0;
  for (const auto &c : ix.calls) {
    if (!c.spawn || !ix.reachable[c.caller]) continue;
    auto reach = reachable_from(ix, {c.callee});
    bool touches = false;
    for (std::size_t f = 0; f < reach.size(); ++f) touches = touches || (reach[f] && uses[f]);
    if (!touches) continue;
    ts.spawns.push_back(p.functions[c.caller].blocks[c.block].instrs[c.index].id);
    total = sat_add(total, sat_mul(ix.exec_count[c.caller], ix.loops[c.caller].block_mult[c.block]));
  }
  if (total != kInfinite) ts.count = total;
  return ts;
}

SharedVerdict validate_shared(const Program &p, const SiteEvents &e, const SharedFlag &flag,
                              const ThreadsSet &threads, const AliasResult &a,
                              const IndexRanges &idx) {
  SharedVerdict v;
  for (const auto &acc : idx.accumulations)
    if (a.objects[acc.key].kind == AbsObject::Heap && a.objects[acc.key].site == e.site &&
        !acc.result.is_empty())
      v.accumulated = std::max(v.accumulated.value_or(Interval::kMin), acc.result.hi);
  if (!flag.shared) return v;
  const AllocationSite &s = p.sites[e.site];
  Where at{s.function, s.line, s.instr_id};
  bool advanced = false;
  for (ObjId o : idx.advanced)
    advanced = advanced || (a.objects[o].kind == AbsObject::Heap && a.objects[o].site == e.site);
  if (!threads.count && advanced) v.reasons.push_back({"shared", "unknown-thread-count", at, flag.evidence});
  if (v.accumulated && e.alloc_size.is_singleton() && *v.accumulated >= e.alloc_size.lo)
    v.reasons.push_back({"shared", "accumulated-index-out-of-bounds", at,
                         std::to_string(*v.accumulated) + " size " + std::to_string(e.alloc_size.lo)});
  for (const auto &r : e.reallocs)
    if (!r.size.is_singleton()) v.reasons.push_back({"shared", "realloc-variable", r.at, r.size.str()});
  return v;
}

} // namespace uriah
