#include "uriah/alias.hpp"

#include <json.hpp>

#include <algorithm>
#include <map>
#include <set>
#include <tuple>

namespace uriah {

using namespace hir;

std::string AbsObject::label(const Program &p) const {
  if (kind == Global) return "g:" + p.globals[global].name;
  std::string s = "s" + std::to_string(site);
  if (version >= 0) s += "@r" + std::to_string(version);
  if (clone >= 0) s += "#c" + std::to_string(clone);
  return s;
}

const ObjSet &AliasResult::pts_of(int fn, ValueId v) const {
  static const ObjSet empty;
  if (fn < 0 || static_cast<std::size_t>(fn) >= value_node.size()) return empty;
  const auto &vn = value_node[fn];
  if (v >= vn.size() || vn[v] < 0) return empty;
  return pts[vn[v]];
}

std::vector<ObjId> AliasResult::objects_of_site(int site) const {
  std::vector<ObjId> out;
  for (ObjId o = 0; o < objects.size(); ++o)
    if (objects[o].kind == AbsObject::Heap && objects[o].site == site) out.push_back(o);
  return out;
}

int AliasResult::global_object(int global) const {
  for (ObjId o = 0; o < objects.size(); ++o)
    if (objects[o].kind == AbsObject::Global && objects[o].global == global)
      return static_cast<int>(o);
  return -1;
}

std::string AliasResult::to_json(const Program &p) const {
  nlohmann::ordered_json j;
  auto labels = [&](const ObjSet &s) {
    nlohmann::json arr = nlohmann::json::array();
    for (ObjId o : s) arr.push_back(objects[o].label(p));
    return arr;
  };
  j["objects"] = nlohmann::json::array();
  for (const auto &o : objects) j["objects"].push_back(o.label(p));
  nlohmann::ordered_json fns = nlohmann::ordered_json::object();
  for (std::size_t f = 0; f < value_node.size(); ++f) {
    nlohmann::ordered_json vals = nlohmann::ordered_json::object();
    for (ValueId v = 0; v < value_node[f].size(); ++v)
      if (value_node[f][v] >= 0) vals[p.functions[f].values[v].name] = labels(pts[value_node[f][v]]);
    fns[p.functions[f].name] = vals;
  }
  j["functions"] = fns;
  nlohmann::ordered_json cells = nlohmann::ordered_json::object();
  for (ObjId o = 0; o < objects.size(); ++o)
    if (cell_node[o] >= 0 && !pts[cell_node[o]].empty())
      cells[objects[o].label(p)] = labels(pts[cell_node[o]]);
  j["cells"] = cells;
  return j.dump(2);
}

namespace {

bool merge_into(ObjSet &dst, const ObjSet &src) {
  if (src.empty()) return false;
  ObjSet out;
  out.reserve(dst.size() + src.size());
  std::set_union(dst.begin(), dst.end(), src.begin(), src.end(), std::back_inserter(out));
  if (out.size() == dst.size()) return false;
  dst.swap(out);
  return true;
}

bool insert_one(ObjSet &dst, ObjId o) {
  auto it = std::lower_bound(dst.begin(), dst.end(), o);
  if (it != dst.end() && *it == o) return false;
  dst.insert(it, o);
  return true;
}

// f returns a fresh allocation that it never lets escape otherwise: the alloc
// result (optionally through one cast) is used only by the function's single
// `ret`.
bool is_alloc_wrapper(const Function &fn) {
  const Instr *ret = nullptr;
  for (const auto &b : fn.blocks)
    for (const auto &in : b.instrs)
      if (in.op == Op::Ret) {
        if (ret) return false;
        ret = &in;
      }
  if (!ret || ret->args.empty() || ret->args[0].is_const) return false;
  ValueId rv = ret->args[0].value;
  const ValueInfo &vi = fn.values[rv];
  if (vi.def_block < 0) return false;
  const Instr &def = fn.blocks[vi.def_block].instrs[vi.def_index];
  ValueId alloc_v = rv;
  if (def.op == Op::Cast) {
    if (def.args[0].is_const) return false;
    alloc_v = def.args[0].value;
    const ValueInfo &ai = fn.values[alloc_v];
    if (ai.def_block < 0 || fn.blocks[ai.def_block].instrs[ai.def_index].op != Op::Alloc)
      return false;
  } else if (def.op != Op::Alloc) {
    return false;
  }
  // Count uses of the alloc value and the returned value.
  int alloc_uses = 0, ret_uses = 0;
  auto count = [&](const Operand &o) {
    if (o.is_const) return;
    if (o.value == alloc_v) ++alloc_uses;
    if (o.value == rv && rv != alloc_v) ++ret_uses;
  };
  for (const auto &b : fn.blocks)
    for (const auto &in : b.instrs) {
      for (const auto &a : in.args) count(a);
      for (const auto &pi : in.incoming) count(pi.value);
    }
  if (rv == alloc_v) return alloc_uses == 1;
  return alloc_uses == 1 && ret_uses == 1;
}

int wrapper_site(const Function &fn) {
  for (const auto &b : fn.blocks)
    for (const auto &in : b.instrs)
      if (in.op == Op::Alloc) return in.site;
  return -1;
}

struct Solver {
  const Program &p;
  const ProgramIndex &ix;
  AliasResult &r;
  std::map<std::tuple<int, int, int, int, int>, ObjId> obj_index;
  std::vector<std::vector<int>> succ;
  std::set<std::pair<int, int>> edge_set;
  struct Complex {
    enum Kind { Load, Store, Realloc } kind;
    int other;        // load: dst node; store: src node; realloc: result node
    int realloc_id;   // realloc instr id
  };
  std::vector<std::vector<Complex>> complex;  // by address node
  std::vector<int> work;
  std::vector<bool> queued;

  Solver(const Program &p, const ProgramIndex &ix, AliasResult &r) : p(p), ix(ix), r(r) {}

  int add_node(GraphNode n) {
    r.nodes.push_back(n);
    r.pts.emplace_back();
    succ.emplace_back();
    complex.emplace_back();
    queued.push_back(false);
    return static_cast<int>(r.nodes.size() - 1);
  }

  ObjId object(const AbsObject &o) {
    auto key = std::make_tuple(static_cast<int>(o.kind), o.site, o.global, o.version, o.clone);
    auto it = obj_index.find(key);
    if (it != obj_index.end()) return it->second;
    ObjId id = static_cast<ObjId>(r.objects.size());
    r.objects.push_back(o);
    r.cell_node.push_back(-1);
    obj_index[key] = id;
    GraphNode cn{NodeKind::Cell};
    cn.obj = id;
    r.cell_node[id] = add_node(cn);
    return id;
  }

  void push(int n) {
    if (!queued[n]) {
      queued[n] = true;
      work.push_back(n);
    }
  }

  void add_edge(int src, int dst, bool has_off = false, int fn = -1, Operand off = {}) {
    if (src < 0 || dst < 0) return;
    if (!has_off && src == dst) return;
    if (!has_off && !edge_set.insert({src, dst}).second) return;
    r.edges.push_back({src, dst, has_off, fn, off});
    succ[src].push_back(dst);
    if (merge_into(r.pts[dst], r.pts[src])) push(dst);
  }

  void add_source(int node, ObjId o) {
    r.sources.push_back({node, o});
    if (insert_one(r.pts[node], o)) push(node);
  }

  int vnode(int f, const Operand &o) const {
    if (o.is_const) return -1;
    return r.value_node[f][o.value];
  }

  void build() {
    std::size_t nf = p.functions.size();
    r.value_node.resize(nf);
    r.ret_node.assign(nf, -1);
    r.wrapper.assign(nf, false);
    for (std::size_t g = 0; g < p.globals.size(); ++g) {
      AbsObject o;
      o.kind = AbsObject::Global;
      o.global = static_cast<int>(g);
      object(o);
    }
    for (std::size_t f = 0; f < nf; ++f) {
      const Function &fn = p.functions[f];
      r.value_node[f].assign(fn.values.size(), -1);
      if (!ix.reachable[f]) continue;
      for (ValueId v = 0; v < fn.values.size(); ++v)
        if (fn.values[v].type.is_ref) {
          GraphNode n{NodeKind::Value};
          n.function = static_cast<int>(f);
          n.value = v;
          r.value_node[f][v] = add_node(n);
        }
      if (fn.returns_value && fn.ret_type.is_ref) {
        GraphNode n{NodeKind::Ret};
        n.function = static_cast<int>(f);
        r.ret_node[f] = add_node(n);
      }
    }
    // Global initializers.
    for (std::size_t g = 0; g < p.globals.size(); ++g) {
      int cell = r.cell_node[r.global_object(static_cast<int>(g))];
      std::vector<const GlobalInit *> stack{&p.globals[g].init};
      while (!stack.empty()) {
        const GlobalInit *gi = stack.back();
        stack.pop_back();
        if (gi->kind == GlobalInit::Alloc) {
          AbsObject o;
          o.site = gi->site;
          add_source(cell, object(o));
        }
        for (const auto &[k, v] : gi->fields) stack.push_back(&v);
      }
    }
    if (opt_heap_clone)
      for (std::size_t f = 0; f < nf; ++f)
        if (static_cast<int>(f) != p.entry && ix.reachable[f] && is_alloc_wrapper(p.functions[f]))
          r.wrapper[f] = true;

    for (std::size_t f = 0; f < nf; ++f) {
      if (!ix.reachable[f]) continue;
      const Function &fn = p.functions[f];
      int fi = static_cast<int>(f);
      for (BlockId b = 0; b < fn.blocks.size(); ++b) {
        if (!ix.cfg[f].reachable[b]) continue;
        for (const Instr &in : fn.blocks[b].instrs) {
          int res = in.result != kNoValue ? r.value_node[f][in.result] : -1;
          switch (in.op) {
          case Op::Alloc: {
            AbsObject o;
            o.site = in.site;
            add_source(res, object(o));
            break;
          }
          case Op::GlobalAddr:
            add_source(res, static_cast<ObjId>(r.global_object(in.global)));
            break;
          case Op::Assign:
          case Op::Cast:
            if (res >= 0) add_edge(vnode(fi, in.args[0]), res);
            break;
          case Op::Phi:
            if (res >= 0)
              for (const auto &pi : in.incoming) add_edge(vnode(fi, pi.value), res);
            break;
          case Op::Gep:
            add_edge(vnode(fi, in.args[0]), res, true, fi, in.args[1]);
            break;
          case Op::Load:
            if (res >= 0) complex_add(vnode(fi, in.args[0]), {Complex::Load, res, -1});
            break;
          case Op::Store:
            if (in.prim == Prim::Ref)
              complex_add(vnode(fi, in.args[0]), {Complex::Store, vnode(fi, in.args[1]), -1});
            break;
          case Op::Realloc:
            complex_add(vnode(fi, in.args[0]), {Complex::Realloc, res, static_cast<int>(in.id)});
            break;
          case Op::Call:
          case Op::Spawn: {
            const Function &cal = p.functions[in.callee];
            for (std::size_t k = 0; k < in.args.size(); ++k)
              add_edge(vnode(fi, in.args[k]), r.value_node[in.callee][cal.params[k].value]);
            if (in.op == Op::Call && res >= 0) {
              if (r.wrapper[in.callee]) {
                AbsObject o;
                o.site = wrapper_site(cal);
                o.clone = static_cast<int>(in.id);
                add_source(res, object(o));
              } else {
                add_edge(r.ret_node[in.callee], res);
              }
            }
            break;
          }
          case Op::Ret:
            if (!in.args.empty() && r.ret_node[f] >= 0) add_edge(vnode(fi, in.args[0]), r.ret_node[f]);
            break;
          default: break;
          }
        }
      }
    }
  }

  bool opt_heap_clone = false;

  void complex_add(int addr, Complex c) {
    if (addr < 0) return;
    complex[addr].push_back(c);
    push(addr);
  }

  void solve() {
    while (!work.empty()) {
      int n = work.back();
      work.pop_back();
      queued[n] = false;
      // Copy: the vectors may grow while we iterate.
      ObjSet here = r.pts[n];
      auto cs = complex[n];
      for (const auto &c : cs) {
        for (ObjId o : here) {
          switch (c.kind) {
          case Complex::Load: add_edge(r.cell_node[o], c.other); break;
          case Complex::Store: add_edge(c.other, r.cell_node[o]); break;
          case Complex::Realloc: {
            if (r.objects[o].kind != AbsObject::Heap || c.other < 0) break;
            AbsObject nv = r.objects[o];
            nv.version = c.realloc_id;
            ObjId o2 = object(nv);
            if (insert_one(r.pts[c.other], o2)) push(c.other);
            if (!edge_set.count({-1 - static_cast<int>(o), static_cast<int>(o2)})) {
              edge_set.insert({-1 - static_cast<int>(o), static_cast<int>(o2)});
              r.sources.push_back({c.other, o2});
              add_edge(r.cell_node[o], r.cell_node[o2]);
            }
            break;
          }
          }
        }
      }
      for (std::size_t k = 0; k < succ[n].size(); ++k) {
        int d = succ[n][k];
        if (merge_into(r.pts[d], r.pts[n])) push(d);
      }
    }
  }
};

} // namespace

AliasResult compute_points_to(const Program &p, const ProgramIndex &ix, const AliasOptions &opt) {
  AliasResult r;
  Solver s(p, ix, r);
  s.opt_heap_clone = opt.heap_clone;
  s.build();
  s.solve();
  return r;
}

RegionInfo compute_regions(const Program &p, const ProgramIndex &ix, const AliasResult &a) {
  RegionInfo ri;
  std::size_t nf = p.functions.size();
  ri.bits.resize(nf);
  for (std::size_t f = 0; f < nf; ++f) ri.bits[f].assign(p.functions[f].values.size(), 0);
  auto src_bits = [&](int f, const Operand &o) -> unsigned {
    return o.is_const ? 0u : ri.bits[f][o.value];
  };
  for (bool changed = true; changed;) {
    changed = false;
    auto set = [&](int f, ValueId v, unsigned b) {
      if ((ri.bits[f][v] | b) != ri.bits[f][v]) {
        ri.bits[f][v] |= b;
        changed = true;
      }
    };
    for (std::size_t f = 0; f < nf; ++f) {
      if (!ix.reachable[f]) continue;
      const Function &fn = p.functions[f];
      int fi = static_cast<int>(f);
      for (const auto &blk : fn.blocks)
        for (const auto &in : blk.instrs) {
          if (in.op == Op::Call || in.op == Op::Spawn) {
            const Function &cal = p.functions[in.callee];
            for (std::size_t k = 0; k < in.args.size(); ++k)
              set(in.callee, cal.params[k].value, src_bits(fi, in.args[k]));
            if (in.op == Op::Call && in.result != kNoValue) {
              unsigned rb = 0;
              for (const auto &cb : cal.blocks)
                for (const auto &ci : cb.instrs)
                  if (ci.op == Op::Ret && !ci.args.empty()) rb |= src_bits(in.callee, ci.args[0]);
              set(fi, in.result, rb);
            }
            continue;
          }
          if (in.result == kNoValue || !fn.values[in.result].type.is_ref) continue;
          switch (in.op) {
          case Op::Load: {
            unsigned b = 0;
            for (ObjId o : a.pts_of(fi, in.args[0].value))
              b |= a.objects[o].kind == AbsObject::Global ? kRegionGlobal : kRegionHeap;
            set(fi, in.result, b);
            break;
          }
          case Op::Assign:
          case Op::Cast:
          case Op::Gep:
          case Op::Realloc: set(fi, in.result, src_bits(fi, in.args[0])); break;
          case Op::Phi:
            for (const auto &pi : in.incoming) set(fi, in.result, src_bits(fi, pi.value));
            break;
          default: break;
          }
        }
    }
  }
  return ri;
}

Region classify_alias_region(const RegionInfo &r, int fn, ValueId v) {
  unsigned b = r.bits[fn][v];
  if (b & kRegionGlobal) return Region::Global;
  if (b & kRegionHeap) return Region::Heap;
  return Region::Stack;
}

namespace {

// True if every ref slot of the global is filled by an allocation at its
// definition.
bool refs_initialized(const Global &g) {
  switch (classify_global(g)) {
  case GlobalClass::NoRefs: return true;
  case GlobalClass::Singleton: return g.init.kind == GlobalInit::Alloc;
  case GlobalClass::SingletonFields:
    for (const auto &f : g.type->fields) {
      if (f.prim != Prim::Ref) continue;
      auto it = g.init.fields.find(f.name);
      if (g.init.kind != GlobalInit::Compound || it == g.init.fields.end() ||
          it->second.kind != GlobalInit::Alloc)
        return false;
    }
    return true;
  case GlobalClass::Compound: return false;
  }
  return false;
}

} // namespace

std::vector<GlobalAliasViolation> validate_global_aliases(const Program &p, const AliasResult &a) {
  std::vector<GlobalAliasViolation> out;
  for (std::size_t g = 0; g < p.globals.size(); ++g) {
    const Global &gl = p.globals[g];
    GlobalClass c = classify_global(gl);
    if (c == GlobalClass::NoRefs) continue;
    std::string reason;
    if (c == GlobalClass::Compound) reason = "compound-global";
    else if (!refs_initialized(gl)) reason = "uninitialized-global";
    else continue;
    int go = a.global_object(static_cast<int>(g));
    std::set<int> sites;
    for (ObjId o : a.pts[a.cell_node[go]])
      if (a.objects[o].kind == AbsObject::Heap) sites.insert(a.objects[o].site);
    for (int s : sites) out.push_back({s, static_cast<int>(g), reason});
  }
  return out;
}

} // namespace uriah
