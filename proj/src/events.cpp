#include "uriah/events.hpp"

namespace uriah {

using namespace hir;

std::string Reason::str(const Program &p) const {
  std::string s = validator + ":" + code;
  if (at.fn >= 0) s += "@" + p.functions[at.fn].name + ":" + std::to_string(at.line);
  else if (at.line > 0) s += "@<global>:" + std::to_string(at.line);
  return s;
}

Interval SiteEvents::size_of(int version) const {
  if (version < 0) return alloc_size;
  Interval r = Interval::empty();
  for (const auto &e : reallocs)
    if (e.to == version) r = r.join(e.size);
  return r;
}

void SiteEvents::merge(const SiteEvents &o) {
  alloc_size = alloc_size.join(o.alloc_size);
  geps.insert(geps.end(), o.geps.begin(), o.geps.end());
  aliases.insert(aliases.end(), o.aliases.begin(), o.aliases.end());
  accesses.insert(accesses.end(), o.accesses.begin(), o.accesses.end());
  frees.insert(frees.end(), o.frees.begin(), o.frees.end());
  reallocs.insert(reallocs.end(), o.reallocs.begin(), o.reallocs.end());
  casts.insert(casts.end(), o.casts.begin(), o.casts.end());
  int_casts.insert(int_casts.end(), o.int_casts.begin(), o.int_casts.end());
}

EventSet empty_events(const Program &p, const IntRanges &ints) {
  EventSet es;
  es.sites.resize(p.sites.size());
  for (const auto &s : p.sites) {
    SiteEvents &e = es.sites[s.id];
    e.site = s.id;
    if (s.declared || s.constant_size) {
      e.alloc_size = Interval::of(s.size);
    } else {
      const Instr &in = p.functions[s.function].blocks[s.block].instrs[s.index];
      e.alloc_size = ints.at(s.function, s.block, in.args[0]);
    }
  }
  return es;
}

namespace {

// The load an int value was read by, looking through plain copies.
const Instr *loaded_by(const Function &fn, Operand o) {
  for (int guard = 0; guard < 64 && !o.is_const; ++guard) {
    const ValueInfo &vi = fn.values[o.value];
    if (vi.def_block < 0) return nullptr;
    const Instr &d = fn.blocks[vi.def_block].instrs[vi.def_index];
    if (d.op == Op::Load) return &d;
    if (d.op != Op::Assign) return nullptr;
    o = d.args[0];
  }
  return nullptr;
}

} // namespace

EventSet collect_static_events(const Program &p, const ProgramIndex &ix, const AliasResult &a,
                               const IntRanges &ints, const IndexRanges &idx) {
  EventSet es = empty_events(p, ints);
  auto heap = [&](ObjId o) { return a.objects[o].kind == AbsObject::Heap; };
  for (std::size_t f = 0; f < p.functions.size(); ++f) {
    if (!ix.reachable[f]) continue;
    const Function &fn = p.functions[f];
    int fi = static_cast<int>(f);
    auto index_of = [&](const Operand &o) -> const IndexMap & {
      static const IndexMap none;
      return o.is_const ? none : idx.of(a, fi, o.value);
    };
    for (const auto &prm : fn.params) {
      if (!fn.values[prm.value].type.is_ref) continue;
      for (const auto &[o, iv] : idx.of(a, fi, prm.value))
        if (heap(o))
          es.sites[a.objects[o].site].aliases.push_back({{fi, fn.line, 0}, a.objects[o].version, iv});
    }
    for (BlockId b = 0; b < fn.blocks.size(); ++b) {
      if (!ix.cfg[f].reachable[b]) continue;
      for (const Instr &in : fn.blocks[b].instrs) {
        Where at{fi, in.line, in.id};
        if (in.result != kNoValue && fn.values[in.result].type.is_ref)
          for (const auto &[o, iv] : idx.of(a, fi, in.result))
            if (heap(o))
              es.sites[a.objects[o].site].aliases.push_back({at, a.objects[o].version, iv});
        switch (in.op) {
        case Op::Gep: {
          Interval off = ints.at(fi, b, in.args[1]);
          const IndexMap &res = idx.of(a, fi, in.result);
          for (const auto &[o, iv] : index_of(in.args[0])) {
            if (!heap(o)) continue;
            auto r = res.find(o);
            es.sites[a.objects[o].site].geps.push_back(
                {at, a.objects[o].version, iv, off, r == res.end() ? iv.add(off) : r->second});
          }
          break;
        }
        case Op::Load:
        case Op::Store:
          for (const auto &[o, iv] : index_of(in.args[0]))
            if (heap(o))
              es.sites[a.objects[o].site].accesses.push_back(
                  {at, a.objects[o].version, iv, in.prim, in.op == Op::Store});
          break;
        case Op::Free:
          for (const auto &[o, iv] : index_of(in.args[0]))
            if (heap(o)) es.sites[a.objects[o].site].frees.push_back({at, a.objects[o].version, iv});
          break;
        case Op::Realloc: {
          Interval size = in.type ? Interval::of(static_cast<std::int64_t>(in.type->total_size))
                                  : ints.at(fi, b, in.args[1]);
          for (const auto &[o, iv] : index_of(in.args[0]))
            if (heap(o))
              es.sites[a.objects[o].site].reallocs.push_back(
                  {at, a.objects[o].version, static_cast<int>(in.id), iv, size, in.type});
          break;
        }
        case Op::Cast: {
          if (in.args[0].is_const) break;
          const ValueInfo &src = fn.values[in.args[0].value];
          if (src.type.is_ref) {
            for (const auto &[o, iv] : index_of(in.args[0]))
              if (heap(o))
                es.sites[a.objects[o].site].casts.push_back(
                    {at, a.objects[o].version, iv, in.type, src.type.pointee, in.elided});
          } else if (const Instr *ld = loaded_by(fn, in.args[0])) {
            Interval v = ints.at(fi, b, in.args[0]);
            for (ObjId o : a.pts_of(fi, ld->args[0].value))
              if (heap(o))
                es.sites[a.objects[o].site].int_casts.push_back({at, ld->prim, v, in.prim});
          }
          break;
        }
        default: break;
        }
      }
    }
  }
  return es;
}

} // namespace uriah
