#include "uriah/ranges.hpp"

#include <algorithm>

namespace uriah {

using namespace hir;

Interval full_range(Prim p) {
  if (p == Prim::Ref) return Interval::top();
  return Interval::range(prim_min(p), prim_max(p));
}

namespace {

const Instr *def_of(const Function &fn, const Operand &o) {
  if (o.is_const) return nullptr;
  const ValueInfo &vi = fn.values[o.value];
  if (vi.def_block < 0) return nullptr;
  return &fn.blocks[vi.def_block].instrs[vi.def_index];
}

// Smallest 2^k - 1 covering v (v >= 0).
std::int64_t low_mask(std::int64_t v) {
  std::uint64_t m = 0;
  while (m < static_cast<std::uint64_t>(v)) m = (m << 1) | 1;
  return static_cast<std::int64_t>(m);
}

Interval arith(ArithOp op, const Interval &a, const Interval &b) {
  if (a.is_empty() || b.is_empty()) return Interval::empty();
  switch (op) {
  case ArithOp::Add: return a.add(b);
  case ArithOp::Sub: return a.sub(b);
  case ArithOp::Mul: return a.mul(b);
  case ArithOp::And:
    if (a.lo >= 0 && b.lo >= 0) return Interval::range(0, std::min(a.hi, b.hi));
    if (a.lo >= 0) return Interval::range(0, a.hi);
    if (b.lo >= 0) return Interval::range(0, b.hi);
    return Interval::top();
  case ArithOp::Or:
  case ArithOp::Xor:
    if (a.lo >= 0 && b.lo >= 0) return Interval::range(0, low_mask(std::max(a.hi, b.hi)));
    return Interval::top();
  }
  return Interval::top();
}

} // namespace

IntRanges compute_int_ranges(const Program &p, const ProgramIndex &ix) {
  std::size_t nf = p.functions.size();
  std::vector<int> base(nf, 0);
  int total = 0;
  for (std::size_t f = 0; f < nf; ++f) {
    base[f] = total;
    total += static_cast<int>(p.functions[f].values.size());
  }
  int nodes = total + static_cast<int>(nf);
  auto ret_node = [&](int f) { return total + f; };
  std::vector<std::vector<int>> succ(nodes);
  std::vector<bool> pinned(nodes, false);
  std::vector<Interval> val(nodes, Interval::empty());
  std::vector<LoopRefinement> refinements;

  // Induction variables of counted loops.
  for (std::size_t f = 0; f < nf; ++f) {
    const Function &fn = p.functions[f];
    for (const auto &L : ix.loops[f].loops) {
      if (!L.trip) continue;
      const Instr &br = fn.blocks[L.header].instrs.back();
      const Instr *cmp = def_of(fn, br.args[0]);
      const Instr *phi = def_of(fn, cmp->args[0]);
      std::int64_t c0 = 0, step = 0;
      for (const auto &in : phi->incoming) {
        if (L.body[in.block]) step = def_of(fn, in.value)->args[1].constant;
        else c0 = in.value.constant;
      }
      int n = base[f] + static_cast<int>(phi->result);
      pinned[n] = true;
      auto span = [&](std::int64_t k) {
        Interval last = Interval::of(c0).add(Interval::of(k).mul(Interval::of(step)));
        if (last.is_top()) return last;
        return Interval::strided(std::min(c0, last.lo), std::max(c0, last.lo), step < 0 ? -static_cast<__int128>(step) : step);
      };
      val[n] = span(static_cast<std::int64_t>(*L.trip));
      if (*L.trip >= 1) {
        LoopRefinement r{static_cast<int>(f), phi->result, std::vector<bool>(fn.blocks.size(), false), {}};
        // Any body block other than the header is entered through the
        // header's true edge since the last update of the phi.
        for (BlockId b = 0; b < fn.blocks.size(); ++b) r.blocks[b] = L.body[b] && b != L.header;
        r.range = span(static_cast<std::int64_t>(*L.trip - 1));
        refinements.push_back(std::move(r));
      }
    }
  }

  auto dep = [&](int f, const Operand &o, int to) {
    if (!o.is_const && !pinned[to]) succ[base[f] + o.value].push_back(to);
  };
  for (std::size_t f = 0; f < nf; ++f) {
    if (!ix.reachable[f]) continue;
    const Function &fn = p.functions[f];
    int fi = static_cast<int>(f);
    for (BlockId b = 0; b < fn.blocks.size(); ++b) {
      if (!ix.cfg[f].reachable[b]) continue;
      for (const auto &in : fn.blocks[b].instrs) {
        int res = in.result != kNoValue ? base[f] + static_cast<int>(in.result) : -1;
        switch (in.op) {
        case Op::Arith:
        case Op::Cmp:
          dep(fi, in.args[0], res);
          dep(fi, in.args[1], res);
          break;
        case Op::Assign:
        case Op::Cast: dep(fi, in.args[0], res); break;
        case Op::Phi:
          for (const auto &pi : in.incoming) dep(fi, pi.value, res);
          break;
        case Op::Call:
        case Op::Spawn: {
          const Function &cal = p.functions[in.callee];
          for (std::size_t k = 0; k < in.args.size(); ++k)
            dep(fi, in.args[k], base[in.callee] + static_cast<int>(cal.params[k].value));
          if (res >= 0) succ[ret_node(in.callee)].push_back(res);
          break;
        }
        case Op::Ret:
          if (!in.args.empty()) dep(fi, in.args[0], ret_node(fi));
          break;
        default: break;
        }
      }
    }
  }

  // Where each value node is defined.
  struct Def { int f; const Instr *in; BlockId block; };
  std::vector<Def> defs(nodes, {-1, nullptr, 0});
  for (std::size_t f = 0; f < nf; ++f) {
    const Function &fn = p.functions[f];
    for (BlockId b = 0; b < fn.blocks.size(); ++b)
      for (const auto &in : fn.blocks[b].instrs)
        if (in.result != kNoValue) defs[base[f] + in.result] = {static_cast<int>(f), &in, b};
  }
  auto of = [&](int f, const Operand &o, BlockId b) {
    if (o.is_const) return Interval::of(o.constant);
    for (const auto &r : refinements)
      if (r.fn == f && r.value == o.value && r.blocks[b]) return r.range;
    return val[base[f] + o.value];
  };
  auto width_of = [&](int n) -> Prim {
    if (n >= total) {
      const Function &fn = p.functions[n - total];
      return fn.ret_type.is_ref ? Prim::I64 : fn.ret_type.width;
    }
    auto f = std::upper_bound(base.begin(), base.end(), n) - base.begin() - 1;
    const ValueInfo &vi = p.functions[f].values[n - base[f]];
    return vi.type.is_ref ? Prim::I64 : vi.type.width;
  };

  auto eval = [&](int n) -> Interval {
    if (n >= total) {
      int f = n - total;
      if (!ix.reachable[f]) return Interval::empty();
      Interval r = Interval::empty();
      const Function &fn = p.functions[f];
      for (BlockId b = 0; b < fn.blocks.size(); ++b)
        if (ix.cfg[f].reachable[b])
          for (const auto &in : fn.blocks[b].instrs)
            if (in.op == Op::Ret && !in.args.empty()) r = r.join(of(f, in.args[0], b));
      return r;
    }
    int f = static_cast<int>(std::upper_bound(base.begin(), base.end(), n) - base.begin() - 1);
    ValueId v = static_cast<ValueId>(n - base[f]);
    const Function &fn = p.functions[f];
    if (!ix.reachable[f] || fn.values[v].type.is_ref) return Interval::empty();
    const Def &d = defs[n];
    if (!d.in) {
      // Parameter.
      if (f == p.entry) return full_range(fn.values[v].type.width);
      std::size_t k = 0;
      while (fn.params[k].value != v) ++k;
      Interval r = Interval::empty();
      for (const auto &cs : ix.calls) {
        if (cs.callee != f || !ix.reachable[cs.caller]) continue;
        const Instr &ci = p.functions[cs.caller].blocks[cs.block].instrs[cs.index];
        r = r.join(of(cs.caller, ci.args[k], cs.block));
      }
      return r;
    }
    if (!ix.cfg[f].reachable[d.block]) return Interval::empty();
    const Instr &in = *d.in;
    BlockId b = d.block;
    switch (in.op) {
    case Op::Load: return full_range(in.prim);
    case Op::Arith: return arith(in.arith, of(f, in.args[0], b), of(f, in.args[1], b));
    case Op::Cmp: return Interval::range(0, 1);
    case Op::Assign: return of(f, in.args[0], b);
    case Op::Cast: {
      Interval s = of(f, in.args[0], b);
      Interval t = full_range(in.prim);
      return s.within(t.lo, t.hi) ? s : t;
    }
    case Op::Phi: {
      Interval r = Interval::empty();
      for (const auto &pi : in.incoming)
        if (ix.cfg[f].reachable[pi.block]) r = r.join(of(f, pi.value, pi.block));
      return r;
    }
    case Op::Call: return val[ret_node(in.callee)];
    default: return Interval::empty();
    }
  };

  auto sccs = strongly_connected(succ);
  for (auto it = sccs.rbegin(); it != sccs.rend(); ++it) {
    const auto &c = *it;
    bool cyclic = c.size() > 1 ||
                  std::find(succ[c[0]].begin(), succ[c[0]].end(), c[0]) != succ[c[0]].end();
    for (int n : c) {
      if (pinned[n]) continue;
      if (cyclic) {
        // Nodes on the cycle that are never reached stay empty; that is
        // decided by eval on unreachable definitions.
        Interval e = eval(n);
        val[n] = e.is_empty() && defs[n].in && !ix.cfg[defs[n].f].reachable[defs[n].block]
                     ? e
                     : full_range(width_of(n));
      } else {
        val[n] = eval(n);
      }
    }
  }

  IntRanges out;
  out.refinements = std::move(refinements);
  out.val.resize(nf);
  for (std::size_t f = 0; f < nf; ++f)
    out.val[f].assign(val.begin() + base[f], val.begin() + base[f] + p.functions[f].values.size());
  return out;
}

const IndexMap &IndexRanges::of(const AliasResult &a, int fn, ValueId v) const {
  static const IndexMap empty;
  if (fn < 0 || static_cast<std::size_t>(fn) >= a.value_node.size()) return empty;
  int n = v < a.value_node[fn].size() ? a.value_node[fn][v] : -1;
  return n < 0 ? empty : node[n];
}

namespace {

void join_into(IndexMap &dst, const IndexMap &src, const Interval &off) {
  for (const auto &[k, iv] : src) {
    Interval moved = iv.add(off);
    auto it = dst.find(k);
    if (it == dst.end()) dst.emplace(k, moved);
    else it->second = it->second.join(moved);
  }
}

} // namespace

IndexRanges compute_index_ranges(const Program &p, const ProgramIndex &ix, const AliasResult &a,
                                 const IntRanges &ints) {
  IndexRanges out;
  std::size_t n = a.nodes.size();
  out.node.assign(n, {});
  std::vector<std::vector<int>> succ(n), in_edges(n);
  for (std::size_t e = 0; e < a.edges.size(); ++e) {
    succ[a.edges[e].src].push_back(a.edges[e].dst);
    in_edges[a.edges[e].dst].push_back(static_cast<int>(e));
  }
  std::vector<std::vector<ObjId>> src_at(n);
  for (const auto &s : a.sources) src_at[s.node].push_back(s.obj);
  auto offset = [&](const FlowEdge &e) {
    if (!e.has_offset) return Interval::of(0);
    const GraphNode &g = a.nodes[e.dst];
    BlockId b = static_cast<BlockId>(p.functions[g.function].values[g.value].def_block);
    return ints.at(e.function, b, e.offset);
  };
  // Executions of the load that defines a value node.
  auto load_count = [&](int node) -> Count {
    const GraphNode &g = a.nodes[node];
    if (g.kind != NodeKind::Value) return kInfinite;
    const ValueInfo &vi = p.functions[g.function].values[g.value];
    if (vi.def_block < 0) return kInfinite;
    const Instr &in = p.functions[g.function].blocks[vi.def_block].instrs[vi.def_index];
    if (in.op != Op::Load) return kInfinite;
    return sat_mul(ix.exec_count[g.function], ix.loops[g.function].block_mult[vi.def_block]);
  };

  auto sccs = strongly_connected(succ);
  std::vector<int> comp(n, -1);
  for (std::size_t c = 0; c < sccs.size(); ++c)
    for (int x : sccs[c]) comp[x] = static_cast<int>(c);

  for (auto it = sccs.rbegin(); it != sccs.rend(); ++it) {
    const auto &S = *it;
    int cid = comp[S[0]];
    bool cyclic = S.size() > 1 ||
                  std::find(succ[S[0]].begin(), succ[S[0]].end(), S[0]) != succ[S[0]].end();
    // Contributions from outside the component.
    std::map<int, IndexMap> ext;
    for (int x : S) {
      IndexMap &m = ext[x];
      for (ObjId o : src_at[x]) join_into(m, {{o, Interval::of(0)}}, Interval::of(0));
      for (int e : in_edges[x]) {
        const FlowEdge &fe = a.edges[e];
        if (comp[fe.src] == cid) continue;
        join_into(m, out.node[fe.src], offset(fe));
      }
    }
    if (!cyclic) {
      out.node[S[0]] = ext[S[0]];
      continue;
    }

    // Try the accumulation summary.
    bool ok = true;
    int cell = -1;
    for (int x : S)
      if (a.nodes[x].kind == NodeKind::Cell) {
        if (cell >= 0) ok = false;
        cell = x;
      }
    if (cell < 0) ok = false;
    std::vector<const FlowEdge *> internal;
    for (int x : S)
      for (int e : in_edges[x])
        if (comp[a.edges[e].src] == cid) internal.push_back(&a.edges[e]);
    for (const FlowEdge *e : internal) {
      Interval off = offset(*e);
      if (off.is_empty() || off.lo < 0 || off.hi == Interval::kMax) ok = false;
    }
    std::vector<int> loads;
    if (ok)
      for (const FlowEdge *e : internal)
        if (e->src == cell) {
          if (load_count(e->dst) == kInfinite) ok = false;
          if (std::find(loads.begin(), loads.end(), e->dst) == loads.end()) loads.push_back(e->dst);
        }
    // Topological order of the component without the cell.
    std::vector<int> order;
    if (ok) {
      std::map<int, int> indeg;
      for (int x : S)
        if (x != cell) indeg[x] = 0;
      for (const FlowEdge *e : internal)
        if (e->src != cell && e->dst != cell) ++indeg[e->dst];
      std::vector<int> ready;
      for (auto &[x, d] : indeg)
        if (d == 0) ready.push_back(x);
      while (!ready.empty()) {
        int x = ready.back();
        ready.pop_back();
        order.push_back(x);
        for (const FlowEdge *e : internal)
          if (e->src == x && e->dst != cell && --indeg[e->dst] == 0) ready.push_back(e->dst);
      }
      if (order.size() + 1 != S.size()) ok = false;
    }

    if (cell >= 0) {
      bool moves = false;
      for (const FlowEdge *e : internal) moves = moves || !(offset(*e) == Interval::of(0));
      if (moves)
        for (auto &[x, m] : ext)
          for (auto &[k, iv] : m) out.advanced.insert(k);
    }
    if (!ok) {
      IndexMap all;
      for (auto &[x, m] : ext) join_into(all, m, Interval::of(0));
      for (auto &[k, iv] : all) iv = Interval::top();
      for (int x : S) out.node[x] = all;
      continue;
    }

    // Values reachable without passing through the cell.
    std::map<int, IndexMap> val0;
    for (int x : order) {
      IndexMap m = ext[x];
      for (const FlowEdge *e : internal)
        if (e->dst == x && e->src != cell) join_into(m, val0[e->src], offset(*e));
      val0[x] = std::move(m);
    }
    IndexMap base = ext[cell];
    for (const FlowEdge *e : internal)
      if (e->dst == cell) join_into(base, val0[e->src], offset(*e));

    // Per load: shortest / longest offset sums to every node, and the most
    // a single reload can advance the cell.
    struct Span { std::map<int, __int128> dmin, dmax; __int128 inc = 0; Count count = 0; };
    std::vector<Span> spans;
    __int128 growth = 0;
    for (int L : loads) {
      Span sp;
      sp.count = load_count(L);
      sp.dmin[L] = 0;
      sp.dmax[L] = 0;
      for (int x : order) {
        if (!sp.dmin.count(x)) continue;
        for (const FlowEdge *e : internal) {
          if (e->src != x) continue;
          Interval off = offset(*e);
          __int128 lo = sp.dmin[x] + off.lo, hi = sp.dmax[x] + off.hi;
          if (e->dst == cell) {
            sp.inc = std::max(sp.inc, hi);
            continue;
          }
          if (!sp.dmin.count(e->dst)) {
            sp.dmin[e->dst] = lo;
            sp.dmax[e->dst] = hi;
          } else {
            sp.dmin[e->dst] = std::min(sp.dmin[e->dst], lo);
            sp.dmax[e->dst] = std::max(sp.dmax[e->dst], hi);
          }
        }
      }
      growth += static_cast<__int128>(sp.count) * sp.inc;
      if (growth > static_cast<__int128>(Interval::kMax)) growth = Interval::kMax;
      spans.push_back(std::move(sp));
    }
    IndexMap cval;
    for (const auto &[k, iv] : base) {
      Interval r = Interval::from128(iv.lo, static_cast<__int128>(iv.hi) + growth);
      cval[k] = r;
      if (!spans.empty())
        out.accumulations.push_back({a.nodes[cell].obj, k, iv, r, 0});
    }
    Count total_loads = 0;
    for (const auto &sp : spans) total_loads = sat_add(total_loads, sp.count);
    for (auto &acc : out.accumulations)
      if (acc.cell == a.nodes[cell].obj && acc.loads == 0) acc.loads = total_loads;
    out.node[cell] = cval;
    for (int x : order) {
      IndexMap m = val0[x];
      for (const auto &sp : spans) {
        if (sp.count == 0 || !sp.dmin.count(x)) continue;
        for (const auto &[k, iv] : cval) {
          Interval r = Interval::from128(static_cast<__int128>(iv.lo) + sp.dmin.at(x),
                                         static_cast<__int128>(iv.hi) - sp.inc + sp.dmax.at(x));
          auto f = m.find(k);
          if (f == m.end()) m.emplace(k, r);
          else f->second = f->second.join(r);
        }
      }
      out.node[x] = std::move(m);
    }
  }
  return out;
}

} // namespace uriah
