#include "uriah/cfg.hpp"

#include <algorithm>
#include <functional>

namespace uriah::hir {

CfgInfo build_cfg(const Function &fn) {
  CfgInfo c;
  std::size_t n = fn.blocks.size();
  c.succs.resize(n);
  c.preds.resize(n);
  c.reachable.assign(n, false);
  for (BlockId b = 0; b < n; ++b) {
    if (fn.blocks[b].instrs.empty()) continue;
    const Instr &t = fn.blocks[b].instrs.back();
    for (BlockId s : t.targets)
      if (std::find(c.succs[b].begin(), c.succs[b].end(), s) == c.succs[b].end())
        c.succs[b].push_back(s);
  }
  for (BlockId b = 0; b < n; ++b)
    for (BlockId s : c.succs[b]) c.preds[s].push_back(b);
  if (n == 0) return c;
  // Iterative DFS for post-order.
  std::vector<BlockId> post;
  std::vector<std::pair<BlockId, std::size_t>> stack{{0, 0}};
  c.reachable[0] = true;
  while (!stack.empty()) {
    auto &[b, i] = stack.back();
    if (i < c.succs[b].size()) {
      BlockId s = c.succs[b][i++];
      if (!c.reachable[s]) {
        c.reachable[s] = true;
        stack.push_back({s, 0});
      }
    } else {
      post.push_back(b);
      stack.pop_back();
    }
  }
  c.rpo.assign(post.rbegin(), post.rend());
  return c;
}

bool DomTree::dominates(BlockId a, BlockId b) const {
  if (rpo_index[a] < 0 || rpo_index[b] < 0) return false;
  int x = static_cast<int>(b);
  while (x >= 0) {
    if (x == static_cast<int>(a)) return true;
    x = idom[x];
  }
  return false;
}

DomTree build_dominators(const CfgInfo &cfg) {
  std::size_t n = cfg.succs.size();
  DomTree d;
  d.idom.assign(n, -1);
  d.rpo_index.assign(n, -1);
  for (std::size_t i = 0; i < cfg.rpo.size(); ++i) d.rpo_index[cfg.rpo[i]] = static_cast<int>(i);
  if (cfg.rpo.empty()) return d;
  std::vector<int> doms(n, -1);
  doms[0] = 0;
  auto intersect = [&](int a, int b) {
    while (a != b) {
      while (d.rpo_index[a] > d.rpo_index[b]) a = doms[a];
      while (d.rpo_index[b] > d.rpo_index[a]) b = doms[b];
    }
    return a;
  };
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t i = 1; i < cfg.rpo.size(); ++i) {
      BlockId b = cfg.rpo[i];
      int nd = -1;
      for (BlockId p : cfg.preds[b]) {
        if (doms[p] < 0) continue;
        nd = nd < 0 ? static_cast<int>(p) : intersect(static_cast<int>(p), nd);
      }
      if (nd != doms[b]) {
        doms[b] = nd;
        changed = true;
      }
    }
  }
  for (std::size_t b = 1; b < n; ++b) d.idom[b] = d.rpo_index[b] >= 0 ? doms[b] : -1;
  return d;
}

Count sat_add(Count a, Count b) {
  if (a == kInfinite || b == kInfinite || a > kInfinite - b) return kInfinite;
  return a + b;
}

Count sat_mul(Count a, Count b) {
  if (a == 0 || b == 0) return 0;
  if (a == kInfinite || b == kInfinite || a > kInfinite / b) return kInfinite;
  return a * b;
}

namespace {

const Instr *def_of(const Function &fn, const Operand &o) {
  if (o.is_const) return nullptr;
  const ValueInfo &vi = fn.values[o.value];
  if (vi.def_block < 0) return nullptr;
  return &fn.blocks[vi.def_block].instrs[vi.def_index];
}

// Header of the form
//   i = phi [pre: C0], [latch: i2]      (i2 = add i, STEP inside the loop)
//   c = cmp lt|le i, K
//   br c, <in loop>, <outside>
std::optional<Count> counted_trip(const Function &fn, const NaturalLoop &L) {
  const Block &h = fn.blocks[L.header];
  const Instr &br = h.instrs.back();
  if (br.op != Op::Br || br.args[0].is_const) return std::nullopt;
  if (!L.body[br.targets[0]] || L.body[br.targets[1]]) return std::nullopt;
  const Instr *cmp = def_of(fn, br.args[0]);
  if (!cmp || cmp->op != Op::Cmp || (cmp->cmp != CmpOp::Lt && cmp->cmp != CmpOp::Le))
    return std::nullopt;
  if (fn.values[br.args[0].value].def_block != static_cast<int>(L.header)) return std::nullopt;
  if (cmp->args[0].is_const || !cmp->args[1].is_const) return std::nullopt;
  const Instr *phi = def_of(fn, cmp->args[0]);
  if (!phi || phi->op != Op::Phi || phi->incoming.size() != 2) return std::nullopt;
  if (fn.values[cmp->args[0].value].def_block != static_cast<int>(L.header)) return std::nullopt;
  const PhiIn *init = nullptr, *step = nullptr;
  for (const auto &in : phi->incoming) (L.body[in.block] ? step : init) = &in;
  if (!init || !step || !init->value.is_const) return std::nullopt;
  const Instr *inc = def_of(fn, step->value);
  if (!inc || inc->op != Op::Arith || inc->arith != ArithOp::Add) return std::nullopt;
  if (inc->args[0].is_const || inc->args[0].value != phi->result || !inc->args[1].is_const)
    return std::nullopt;
  std::int64_t c0 = init->value.constant, k = cmp->args[1].constant, s = inc->args[1].constant;
  if (s <= 0) return std::nullopt;
  // Guard against wraparound of i + STEP before the exit test fires.
  if (k > std::numeric_limits<std::int64_t>::max() - s) return std::nullopt;
  __int128 span = static_cast<__int128>(k) - c0;
  __int128 trips;
  if (cmp->cmp == CmpOp::Lt) trips = span <= 0 ? 0 : (span + s - 1) / s;
  else trips = span < 0 ? 0 : span / s + 1;
  if (trips > static_cast<__int128>(kInfinite / 4)) return std::nullopt;
  return static_cast<Count>(trips);
}

} // namespace

LoopInfo analyze_loops(const Function &fn, const CfgInfo &cfg, const DomTree &dom) {
  LoopInfo li;
  std::size_t n = fn.blocks.size();
  li.block_mult.assign(n, 1);
  // Back edges grouped by header.
  std::vector<std::vector<BlockId>> latches(n);
  for (BlockId b = 0; b < n; ++b) {
    if (!cfg.reachable[b]) continue;
    for (BlockId s : cfg.succs[b])
      if (dom.dominates(s, b)) latches[s].push_back(b);
  }
  for (BlockId h = 0; h < n; ++h) {
    if (latches[h].empty()) continue;
    NaturalLoop L;
    L.header = h;
    L.latches = latches[h];
    L.body.assign(n, false);
    L.body[h] = true;
    std::vector<BlockId> work(latches[h].begin(), latches[h].end());
    while (!work.empty()) {
      BlockId b = work.back();
      work.pop_back();
      if (L.body[b]) continue;
      L.body[b] = true;
      for (BlockId p : cfg.preds[b])
        if (cfg.reachable[p]) work.push_back(p);
    }
    L.trip = counted_trip(fn, L);
    li.loops.push_back(std::move(L));
  }
  // Irreducible cycles: the graph without back edges must be acyclic.
  std::vector<int> state(n, 0);
  std::function<bool(BlockId)> cyclic = [&](BlockId b) {
    state[b] = 1;
    for (BlockId s : cfg.succs[b]) {
      if (dom.dominates(s, b)) continue;
      if (state[s] == 1) return true;
      if (state[s] == 0 && cyclic(s)) return true;
    }
    state[b] = 2;
    return false;
  };
  if (n > 0) li.irreducible = cyclic(0);
  for (BlockId b = 0; b < n; ++b) {
    if (!cfg.reachable[b]) {
      li.block_mult[b] = 0;
      continue;
    }
    if (li.irreducible) {
      li.block_mult[b] = kInfinite;
      continue;
    }
    Count m = 1;
    for (const auto &L : li.loops)
      if (L.body[b]) {
        // The header runs once more than the body to take the exit.
        Count k = L.trip ? (b == L.header ? sat_add(*L.trip, 1) : *L.trip) : kInfinite;
        m = sat_mul(m, k);
      }
    li.block_mult[b] = m;
  }
  if (li.irreducible) {
    // Blocks outside every cycle still run at most once.
    for (BlockId b = 0; b < n; ++b) {
      if (!cfg.reachable[b]) continue;
      std::vector<bool> seen(n, false);
      std::vector<BlockId> work(cfg.succs[b].begin(), cfg.succs[b].end());
      bool on_cycle = false;
      while (!work.empty() && !on_cycle) {
        BlockId x = work.back();
        work.pop_back();
        if (x == b) on_cycle = true;
        if (seen[x]) continue;
        seen[x] = true;
        for (BlockId s : cfg.succs[x]) work.push_back(s);
      }
      if (!on_cycle) li.block_mult[b] = 1;
    }
  }
  return li;
}

ProgramIndex build_index(const Program &p) {
  ProgramIndex ix;
  std::size_t nf = p.functions.size();
  ix.callees.resize(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    const Function &fn = p.functions[f];
    ix.cfg.push_back(build_cfg(fn));
    ix.dom.push_back(build_dominators(ix.cfg.back()));
    ix.loops.push_back(analyze_loops(fn, ix.cfg.back(), ix.dom.back()));
    for (BlockId b = 0; b < fn.blocks.size(); ++b) {
      if (!ix.cfg[f].reachable[b]) continue;
      for (std::uint32_t i = 0; i < fn.blocks[b].instrs.size(); ++i) {
        const Instr &in = fn.blocks[b].instrs[i];
        if (in.op != Op::Call && in.op != Op::Spawn) continue;
        ix.calls.push_back({static_cast<int>(f), b, i, in.callee, in.op == Op::Spawn});
        auto &cs = ix.callees[f];
        if (std::find(cs.begin(), cs.end(), in.callee) == cs.end()) cs.push_back(in.callee);
      }
    }
  }
  ix.reachable = p.entry >= 0 ? reachable_from(ix, {p.entry}) : std::vector<bool>(nf, false);

  // Tarjan SCCs over the call graph; callers before callees in the result.
  std::vector<int> index(nf, -1), low(nf, 0), comp(nf, -1);
  std::vector<bool> on(nf, false);
  std::vector<int> st;
  std::vector<std::vector<int>> sccs;
  int counter = 0;
  std::function<void(int)> strong = [&](int v) {
    index[v] = low[v] = counter++;
    st.push_back(v);
    on[v] = true;
    for (int w : ix.callees[v]) {
      if (index[w] < 0) {
        strong(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on[w]) {
        low[v] = std::min(low[v], index[w]);
      }
    }
    if (low[v] == index[v]) {
      std::vector<int> c;
      int w;
      do {
        w = st.back();
        st.pop_back();
        on[w] = false;
        comp[w] = static_cast<int>(sccs.size());
        c.push_back(w);
      } while (w != v);
      sccs.push_back(std::move(c));
    }
  };
  for (std::size_t f = 0; f < nf; ++f)
    if (index[f] < 0) strong(static_cast<int>(f));
  ix.in_call_cycle.assign(nf, false);
  for (const auto &c : sccs) {
    bool cyc = c.size() > 1;
    if (!cyc)
      for (int w : ix.callees[c[0]])
        if (w == c[0]) cyc = true;
    for (int f : c) ix.in_call_cycle[f] = cyc;
  }
  ix.exec_count.assign(nf, 0);
  if (p.entry >= 0) ix.exec_count[p.entry] = 1;
  // Tarjan emits callees first; walk in reverse for callers-first order.
  for (auto it = sccs.rbegin(); it != sccs.rend(); ++it) {
    const auto &c = *it;
    bool cyc = ix.in_call_cycle[c[0]];
    for (int f : c) {
      Count total = ix.exec_count[f];
      for (const auto &cs : ix.calls) {
        if (cs.callee != f || comp[cs.caller] == comp[f]) continue;
        total = sat_add(total, sat_mul(ix.exec_count[cs.caller],
                                       ix.loops[cs.caller].block_mult[cs.block]));
      }
      ix.exec_count[f] = total;
    }
    if (cyc) {
      bool any = false;
      for (int f : c) any = any || ix.exec_count[f] > 0;
      for (int f : c) ix.exec_count[f] = any ? kInfinite : 0;
    }
  }
  return ix;
}

std::vector<std::vector<int>> strongly_connected(const std::vector<std::vector<int>> &succ) {
  // Iterative Tarjan.
  int n = static_cast<int>(succ.size());
  std::vector<int> index(n, -1), low(n, 0);
  std::vector<bool> on(n, false);
  std::vector<int> st;
  std::vector<std::vector<int>> out;
  int counter = 0;
  std::vector<std::pair<int, std::size_t>> call;
  for (int root = 0; root < n; ++root) {
    if (index[root] >= 0) continue;
    call.push_back({root, 0});
    index[root] = low[root] = counter++;
    st.push_back(root);
    on[root] = true;
    while (!call.empty()) {
      auto &[v, i] = call.back();
      if (i < succ[v].size()) {
        int w = succ[v][i++];
        if (index[w] < 0) {
          index[w] = low[w] = counter++;
          st.push_back(w);
          on[w] = true;
          call.push_back({w, 0});
        } else if (on[w]) {
          low[v] = std::min(low[v], index[w]);
        }
        continue;
      }
      if (low[v] == index[v]) {
        std::vector<int> c;
        int w;
        do {
          w = st.back();
          st.pop_back();
          on[w] = false;
          c.push_back(w);
        } while (w != v);
        out.push_back(std::move(c));
      }
      int done = v;
      call.pop_back();
      if (!call.empty()) low[call.back().first] = std::min(low[call.back().first], low[done]);
    }
  }
  return out;
}

std::vector<bool> reachable_from(const ProgramIndex &ix, const std::vector<int> &roots) {
  std::vector<bool> r(ix.callees.size(), false);
  std::vector<int> work(roots.begin(), roots.end());
  while (!work.empty()) {
    int f = work.back();
    work.pop_back();
    if (r[f]) continue;
    r[f] = true;
    for (int g : ix.callees[f]) work.push_back(g);
  }
  return r;
}

} // namespace uriah::hir
