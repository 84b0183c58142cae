#include "uriah/symexec.hpp"

#include "uriah/ranges.hpp"

#include <map>
#include <optional>
#include <set>
#include <tuple>

namespace uriah {

using namespace hir;

namespace {

constexpr std::int64_t kMaxAlloc = 1 << 20;

struct APtr {
  int obj = -1;  // -1: null
  AbsInt off = AbsInt::of(0);
};

struct AVal {
  AbsInt i = AbsInt::of(0);
  APtr p;
  bool unknown = false;  // ref of unknown target
  int load_site = -1;    // int read straight out of this heap site
  Prim load_prim = Prim::I64;
};

AVal int_val(AbsInt i) {
  AVal v;
  v.i = std::move(i);
  return v;
}

AVal unknown_ref() {
  AVal v;
  v.unknown = true;
  return v;
}

AVal join(const AVal &a, const AVal &b, bool is_ref) {
  if (!is_ref) {
    AVal r = int_val(a.i.join(b.i));
    if (a.load_site == b.load_site && a.load_prim == b.load_prim) {
      r.load_site = a.load_site;
      r.load_prim = a.load_prim;
    }
    return r;
  }
  if (a.unknown || b.unknown || a.p.obj != b.p.obj) return unknown_ref();
  AVal r;
  r.p = {a.p.obj, a.p.off.join(b.p.off)};
  return r;
}

struct Slot {
  Prim prim;
  AVal v;
};

struct AObj {
  int site = -1;     // heap objects only
  int version = -1;
  bool heap = true;
  AbsInt size;
  std::map<std::int64_t, Slot> slots;
  bool smashed = false;  // a store landed somewhere unknown
};

struct AFrame {
  int fn;
  BlockId block = 0;
  BlockId prev = 0;
  std::size_t idx = 0;
  std::vector<AVal> vals;
  std::map<BlockId, int> visits;
  ValueId ret_to = kNoValue;
  std::uint32_t call_instr = 0;
  int call_line = 0;
};

struct AState {
  std::vector<AObj> objs;
  std::vector<AFrame> stack;
  bool done = false;
};

class Explorer {
public:
  Explorer(const Program &p, const ExplorationBudget &b) : p_(p), b_(b) {}

  Exploration run() {
    out_.events.sites.resize(p_.sites.size());
    for (const auto &s : p_.sites) {
      out_.events.sites[s.id].site = s.id;
      out_.events.sites[s.id].alloc_size = Interval::empty();
    }
    AState s;
    init_globals(s);
    const Function &main = p_.functions[p_.entry];
    AFrame f = frame(p_.entry);
    for (const auto &prm : main.params) f.vals[prm.value] = int_val(AbsInt::from(full_range(main.values[prm.value].type.width)));
    s.stack.push_back(std::move(f));
    enter(s, 0, kNoBlock);
    std::vector<AState> work;
    if (!s.done) work.push_back(std::move(s));
    out_.paths = 1;
    while (!work.empty() && !failed_) {
      AState st = std::move(work.back());
      work.pop_back();
      while (!st.done && !failed_) {
        if (auto fork = step(st)) {
          if (++out_.paths > b_.paths) give_up("more than " + std::to_string(b_.paths) + " paths");
          work.push_back(std::move(*fork));
        }
      }
    }
    out_.complete = !failed_;
    return std::move(out_);
  }

private:
  static constexpr BlockId kNoBlock = ~0u;
  const Program &p_;
  const ExplorationBudget &b_;
  Exploration out_;
  bool failed_ = false;
  std::vector<int> global_obj_;
  std::set<std::tuple<int, int, std::uint32_t, int, std::int64_t, std::int64_t, std::int64_t, std::int64_t>> seen_;

  void give_up(std::string why) {
    if (failed_) return;
    failed_ = true;
    out_.why = std::move(why);
  }

  AFrame frame(int fn) {
    AFrame f;
    f.fn = fn;
    f.vals.resize(p_.functions[fn].values.size());
    return f;
  }

  bool fresh_event(int kind, int site, std::uint32_t instr, int version, Interval a, Interval b = Interval::empty()) {
    if (a.is_empty()) a = Interval::range(1, 0);
    if (b.is_empty()) b = Interval::range(1, 0);
    return seen_.insert({kind, site, instr, version, a.lo, a.hi, b.lo, b.hi}).second;
  }

  SiteEvents &events(int site) { return out_.events.sites[site]; }

  int new_obj(AState &s, int site, int version, bool heap, AbsInt size) {
    AObj o;
    o.site = site;
    o.version = version;
    o.heap = heap;
    o.size = std::move(size);
    s.objs.push_back(std::move(o));
    return static_cast<int>(s.objs.size() - 1);
  }

  void note_alloc(int site, const AbsInt &size) {
    SiteEvents &e = events(site);
    e.alloc_size = e.alloc_size.join(size.hull());
  }

  // ---- memory ----------------------------------------------------------

  static bool overlaps(const AObj &o, std::int64_t off, std::int64_t w) {
    for (auto it = o.slots.lower_bound(off - 7); it != o.slots.end() && it->first < off + w; ++it)
      if (it->first + static_cast<std::int64_t>(prim_size(it->second.prim)) > off) return true;
    return false;
  }

  static AVal read_at(const AObj &o, std::int64_t off, Prim prim) {
    std::int64_t w = static_cast<std::int64_t>(prim_size(prim));
    Interval size = o.size.hull();
    bool is_ref = prim == Prim::Ref;
    if (off < 0 || off + w > size.hi) return is_ref ? AVal{} : int_val(AbsInt::of(0));  // dropped read
    if (off + w > size.lo || o.smashed) return is_ref ? unknown_ref() : int_val(AbsInt::from(full_range(prim)));
    auto it = o.slots.find(off);
    if (it != o.slots.end() && it->second.prim == prim) return it->second.v;
    if (is_ref) return AVal{};  // bytes never held a ref here: reads as null
    if (overlaps(o, off, w)) return int_val(AbsInt::from(full_range(prim)));
    return int_val(AbsInt::of(0));
  }

  static AVal read(const AObj &o, const AbsInt &off, Prim prim) {
    bool is_ref = prim == Prim::Ref;
    const auto *offs = off.values();
    if (!offs) return is_ref ? unknown_ref() : int_val(AbsInt::from(full_range(prim)));
    std::optional<AVal> r;
    for (auto x : *offs) {
      AVal v = read_at(o, x, prim);
      r = r ? join(*r, v, is_ref) : v;
    }
    return r ? *r : AVal{};
  }

  static void write(AObj &o, const AbsInt &off, Prim prim, AVal v) {
    std::int64_t w = static_cast<std::int64_t>(prim_size(prim));
    Interval size = o.size.hull();
    if (!off.is_singleton()) {
      o.smashed = true;
      return;
    }
    std::int64_t at = off.hull().lo;
    if (at < 0 || at + w > size.hi) return;  // dropped write
    if (at + w > size.lo) {
      o.smashed = true;
      return;
    }
    for (auto it = o.slots.lower_bound(at - 7); it != o.slots.end() && it->first < at + w;)
      it = it->first + static_cast<std::int64_t>(prim_size(it->second.prim)) > at ? o.slots.erase(it) : std::next(it);
    if (prim != Prim::Ref) {
      v.i = abs_truncate(v.i, prim);
      v.load_site = -1;
    }
    o.slots[at] = {prim, std::move(v)};
  }

  void init_value(AState &s, int obj, std::uint64_t off, const TypePtr &t, const GlobalInit &gi) {
    switch (gi.kind) {
    case GlobalInit::None: return;
    case GlobalInit::Int:
      write(s.objs[obj], AbsInt::of(static_cast<std::int64_t>(off)), t->flat()[0].prim, int_val(AbsInt::of(gi.value)));
      return;
    case GlobalInit::Alloc: {
      const AllocationSite &site = p_.sites[gi.site];
      int h = new_obj(s, site.id, -1, true, AbsInt::of(site.size));
      note_alloc(site.id, AbsInt::of(site.size));
      AVal v;
      v.p = {h, AbsInt::of(0)};
      write(s.objs[obj], AbsInt::of(static_cast<std::int64_t>(off)), Prim::Ref, v);
      return;
    }
    case GlobalInit::Compound:
      for (const auto &f : t->fields) {
        auto it = gi.fields.find(f.name);
        if (it == gi.fields.end()) continue;
        TypePtr ft = f.prim ? make_prim_type(*f.prim, f.count, f.is_array)
                            : (f.is_array ? make_array_type(f.compound, f.count) : f.compound);
        init_value(s, obj, off + f.offset, ft, it->second);
      }
      return;
    }
  }

  void init_globals(AState &s) {
    for (const auto &g : p_.globals)
      global_obj_.push_back(new_obj(s, -1, -1, false, AbsInt::of(static_cast<std::int64_t>(g.type->total_size))));
    for (std::size_t g = 0; g < p_.globals.size(); ++g)
      init_value(s, global_obj_[g], 0, p_.globals[g].type, p_.globals[g].init);
  }

  // ---- events ----------------------------------------------------------

  const AObj *heap_obj(const AState &s, const APtr &ptr) const {
    if (ptr.obj < 0 || !s.objs[ptr.obj].heap) return nullptr;
    return &s.objs[ptr.obj];
  }

  void def_ref(AState &s, AFrame &f, ValueId r, AVal v, Where at) {
    if (const AObj *o = heap_obj(s, v.p); o && !v.unknown) {
      Interval idx = v.p.off.hull();
      if (fresh_event(0, o->site, at.instr, o->version, idx)) events(o->site).aliases.push_back({at, o->version, idx});
    }
    f.vals[r] = std::move(v);
  }

  // ---- control ---------------------------------------------------------

  void enter(AState &s, BlockId to, BlockId prev) {
    AFrame &f = s.stack.back();
    if (++f.visits[to] > b_.unroll + 1) {
      give_up("loop unrolled more than " + std::to_string(b_.unroll) + " times");
      s.done = true;
      return;
    }
    const Function &fn = p_.functions[f.fn];
    f.prev = prev;
    f.block = to;
    f.idx = 0;
    const auto &instrs = fn.blocks[to].instrs;
    std::vector<std::pair<const Instr *, AVal>> phis;
    for (; f.idx < instrs.size() && instrs[f.idx].op == Op::Phi; ++f.idx) {
      const Instr &in = instrs[f.idx];
      for (const auto &inc : in.incoming)
        if (inc.block == prev) phis.push_back({&in, value(f, inc.value)});
    }
    for (auto &[in, v] : phis) {
      if (p_.functions[f.fn].values[in->result].type.is_ref) def_ref(s, f, in->result, v, {f.fn, in->line, in->id});
      else f.vals[in->result] = v;
    }
  }

  static AVal value(const AFrame &f, const Operand &o) {
    if (o.is_const) return int_val(AbsInt::of(o.constant));
    return f.vals[o.value];
  }

  // Narrows an int SSA value and whatever it was copied or offset from.
  bool narrow(AFrame &f, const Operand &o, AbsInt x, int depth = 0) {
    if (o.is_const) return x.contains(o.constant);
    AVal &v = f.vals[o.value];
    v.i = v.i.meet(x);
    if (v.i.is_empty()) return false;
    if (depth >= 4) return true;
    const Function &fn = p_.functions[f.fn];
    const ValueInfo &vi = fn.values[o.value];
    if (vi.def_block < 0) return true;
    const Instr &d = fn.blocks[vi.def_block].instrs[vi.def_index];
    if (d.op == Op::Assign && !d.args[0].is_const) return narrow(f, d.args[0], v.i, depth + 1);
    if (d.op == Op::Arith && (d.arith == ArithOp::Add || d.arith == ArithOp::Sub)) {
      if (d.args[1].is_const && !d.args[0].is_const) {
        auto inv = d.arith == ArithOp::Add ? ArithOp::Sub : ArithOp::Add;
        return narrow(f, d.args[0], abs_arith(inv, v.i, AbsInt::of(d.args[1].constant)), depth + 1);
      }
      if (d.args[0].is_const && !d.args[1].is_const) {
        AbsInt k = AbsInt::of(d.args[0].constant);
        AbsInt src = d.arith == ArithOp::Add ? abs_arith(ArithOp::Sub, v.i, k) : abs_arith(ArithOp::Sub, k, v.i);
        return narrow(f, d.args[1], src, depth + 1);
      }
    }
    return true;
  }

  // Assumes the branch condition `c` took direction `taken`.
  bool assume(AFrame &f, const Operand &c, bool taken) {
    const Function &fn = p_.functions[f.fn];
    AVal &cv = f.vals[c.value];
    cv.i = taken ? cv.i.without(0) : cv.i.meet(AbsInt::of(0));
    if (cv.i.is_empty()) return false;
    const ValueInfo &vi = fn.values[c.value];
    if (vi.def_block < 0) return true;
    const Instr &d = fn.blocks[vi.def_block].instrs[vi.def_index];
    if (d.op != Op::Cmp) return true;
    bool refs = !d.args[0].is_const && fn.values[d.args[0].value].type.is_ref;
    if (refs) return true;
    CmpOp op = taken ? d.cmp : negate(d.cmp);
    AbsInt a = value(f, d.args[0]).i, b = value(f, d.args[1]).i;
    AbsInt na = refine(a, op, b), nb = refine(b, swap_sides(op), a);
    return narrow(f, d.args[0], na) && narrow(f, d.args[1], nb);
  }

  AbsInt alloc_size(const AFrame &f, const Instr &in, std::size_t arg) const {
    if (in.type) return AbsInt::of(static_cast<std::int64_t>(in.type->total_size));
    return value(f, in.args[arg]).i.meet(Interval::range(0, kMaxAlloc));  // others trap
  }

  std::optional<AState> step(AState &s) {
    AFrame &f = s.stack.back();
    const Function &fn = p_.functions[f.fn];
    const Instr &in = fn.blocks[f.block].instrs[f.idx];
    Where at{f.fn, in.line, in.id};
    auto trap = [&] { s.done = true; };
    // Refs whose target the explorer lost track of end the exploration.
    auto ptr_arg = [&](std::size_t k, APtr &out) {
      AVal v = value(f, in.args[k]);
      if (v.unknown) {
        give_up("reference of unknown target at " + fn.name + ":" + std::to_string(in.line));
        s.done = true;
        return false;
      }
      out = v.p;
      return true;
    };
    switch (in.op) {
    case Op::Alloc: {
      AbsInt size = alloc_size(f, in, 0);
      note_alloc(in.site, value(f, in.type ? Operand::imm(static_cast<std::int64_t>(in.type->total_size)) : in.args[0]).i);
      if (size.is_empty()) return trap(), std::nullopt;
      AVal v;
      v.p = {new_obj(s, in.site, -1, true, size), AbsInt::of(0)};
      def_ref(s, f, in.result, v, at);
      break;
    }
    case Op::Free: {
      APtr ptr;
      if (!ptr_arg(0, ptr)) return std::nullopt;
      if (const AObj *o = heap_obj(s, ptr)) {
        Interval idx = ptr.off.hull();
        if (fresh_event(1, o->site, in.id, o->version, idx)) events(o->site).frees.push_back({at, o->version, idx});
      }
      break;
    }
    case Op::Realloc: {
      APtr ptr;
      if (!ptr_arg(0, ptr)) return std::nullopt;
      AbsInt size = alloc_size(f, in, 1);
      if (ptr.obj < 0 || size.is_empty() || !s.objs[ptr.obj].heap) return trap(), std::nullopt;
      AObj &old = s.objs[ptr.obj];
      Interval idx = ptr.off.hull();
      Interval req = in.type ? size.hull() : value(f, in.args[1]).i.hull();
      if (fresh_event(2, old.site, in.id, old.version, idx, req))
        events(old.site).reallocs.push_back({at, old.version, static_cast<int>(in.id), idx, req, in.type});
      if (!ptr.off.contains(0)) return trap(), std::nullopt;  // interior pointer
      int site = old.site;
      int n = new_obj(s, site, static_cast<int>(in.id), true, size);
      AObj &src = s.objs[ptr.obj];
      AObj &dst = s.objs[n];
      std::int64_t keep = std::min(src.size.hull().lo, size.hull().lo);
      for (const auto &[off, slot] : src.slots)
        if (off + static_cast<std::int64_t>(prim_size(slot.prim)) <= keep) dst.slots[off] = slot;
      dst.smashed = src.smashed || !size.is_singleton() || !src.size.is_singleton();
      AVal v;
      v.p = {n, AbsInt::of(0)};
      def_ref(s, f, in.result, v, at);
      break;
    }
    case Op::Gep: {
      AVal base = value(f, in.args[0]);
      AbsInt off = value(f, in.args[1]).i;
      if (base.unknown) {
        f.vals[in.result] = unknown_ref();
        break;
      }
      AVal r;
      r.p = {base.p.obj, abs_arith(ArithOp::Add, base.p.off, off)};
      if (const AObj *o = heap_obj(s, base.p)) {
        Interval b = base.p.off.hull(), k = off.hull();
        if (fresh_event(3, o->site, in.id, o->version, b, k))
          events(o->site).geps.push_back({at, o->version, b, k, r.p.off.hull()});
      }
      def_ref(s, f, in.result, r, at);
      break;
    }
    case Op::Cast: {
      if (fn.values[in.result].type.is_ref) {
        APtr ptr;
        if (!ptr_arg(0, ptr)) return std::nullopt;
        if (const AObj *o = heap_obj(s, ptr)) {
          Interval idx = ptr.off.hull();
          TypePtr from = in.args[0].is_const ? nullptr : fn.values[in.args[0].value].type.pointee;
          if (fresh_event(4, o->site, in.id, o->version, idx))
            events(o->site).casts.push_back({at, o->version, idx, in.type, from, in.elided});
        }
        AVal v;
        v.p = ptr;
        def_ref(s, f, in.result, v, at);
      } else {
        AVal v = value(f, in.args[0]);
        if (v.load_site >= 0) {
          Interval h = v.i.hull();
          if (fresh_event(5, v.load_site, in.id, static_cast<int>(v.load_prim), h))
            events(v.load_site).int_casts.push_back({at, v.load_prim, h, in.prim});
        }
        f.vals[in.result] = int_val(abs_truncate(v.i, in.prim));
      }
      break;
    }
    case Op::Load:
    case Op::Store: {
      APtr ptr;
      if (!ptr_arg(0, ptr)) return std::nullopt;
      if (ptr.obj < 0) return trap(), std::nullopt;
      AObj &o = s.objs[ptr.obj];
      bool store = in.op == Op::Store;
      if (o.heap) {
        Interval idx = ptr.off.hull();
        if (fresh_event(store ? 6 : 7, o.site, in.id, o.version, idx))
          events(o.site).accesses.push_back({at, o.version, idx, in.prim, store});
      }
      if (store) {
        write(o, ptr.off, in.prim, value(f, in.args[1]));
      } else {
        AVal v = read(o, ptr.off, in.prim);
        if (in.prim == Prim::Ref) {
          def_ref(s, f, in.result, v, at);
        } else {
          v.load_site = o.heap ? o.site : -1;
          v.load_prim = in.prim;
          f.vals[in.result] = v;
        }
      }
      break;
    }
    case Op::Assign:
      if (fn.values[in.result].type.is_ref) def_ref(s, f, in.result, value(f, in.args[0]), at);
      else f.vals[in.result] = value(f, in.args[0]);
      break;
    case Op::Arith:
      f.vals[in.result] = int_val(abs_arith(in.arith, value(f, in.args[0]).i, value(f, in.args[1]).i));
      break;
    case Op::Cmp: {
      bool refs = !in.args[0].is_const && fn.values[in.args[0].value].type.is_ref;
      if (!refs) {
        f.vals[in.result] = int_val(abs_cmp(in.cmp, value(f, in.args[0]).i, value(f, in.args[1]).i));
        break;
      }
      AVal a = value(f, in.args[0]), b = value(f, in.args[1]);
      AbsInt r = AbsInt::set({0, 1});
      if (!a.unknown && !b.unknown && (in.cmp == CmpOp::Eq || in.cmp == CmpOp::Ne)) {
        AbsInt eq;
        if (a.p.obj != b.p.obj) eq = AbsInt::of(0);
        else if (a.p.obj < 0) eq = AbsInt::of(1);
        else eq = abs_cmp(CmpOp::Eq, a.p.off, b.p.off);
        r = in.cmp == CmpOp::Eq ? eq : abs_arith(ArithOp::Xor, eq, AbsInt::of(1));
      }
      f.vals[in.result] = int_val(r);
      break;
    }
    case Op::Phi: break;
    case Op::Jmp:
      enter(s, in.targets[0], f.block);
      return std::nullopt;
    case Op::Br: {
      AbsInt c = value(f, in.args[0]).i;
      BlockId here = f.block;
      bool can_true = !c.without(0).is_empty(), can_false = c.contains(0);
      if (!can_true || !can_false || in.args[0].is_const) {
        enter(s, can_true ? in.targets[0] : in.targets[1], here);
        return std::nullopt;
      }
      AState other = s;
      bool t_ok = assume(s.stack.back(), in.args[0], true);
      bool f_ok = assume(other.stack.back(), in.args[0], false);
      if (f_ok) enter(other, in.targets[1], here);
      if (t_ok) enter(s, in.targets[0], here);
      else s.done = true;
      if (!f_ok || other.done) return std::nullopt;
      return other;
    }
    case Op::Spawn:
      give_up("threads are not explored");
      s.done = true;
      return std::nullopt;
    case Op::Call: {
      if (static_cast<int>(s.stack.size()) > b_.depth) {
        give_up("call depth above " + std::to_string(b_.depth));
        s.done = true;
        return std::nullopt;
      }
      const Function &cal = p_.functions[in.callee];
      AFrame nf = frame(in.callee);
      nf.ret_to = in.result;
      nf.call_instr = in.id;
      nf.call_line = in.line;
      for (std::size_t k = 0; k < in.args.size(); ++k) nf.vals[cal.params[k].value] = value(f, in.args[k]);
      ++f.idx;
      s.stack.push_back(std::move(nf));
      enter(s, 0, kNoBlock);
      return std::nullopt;
    }
    case Op::Ret: {
      AVal v = in.args.empty() ? AVal{} : value(f, in.args[0]);
      AFrame done = std::move(s.stack.back());
      s.stack.pop_back();
      if (s.stack.empty()) {
        s.done = true;
        return std::nullopt;
      }
      AFrame &caller = s.stack.back();
      if (done.ret_to != kNoValue) {
        if (p_.functions[caller.fn].values[done.ret_to].type.is_ref)
          def_ref(s, caller, done.ret_to, v, {caller.fn, done.call_line, done.call_instr});
        else caller.vals[done.ret_to] = v;
      }
      return std::nullopt;
    }
    case Op::GlobalAddr: {
      AVal v;
      v.p = {global_obj_[in.global], AbsInt::of(0)};
      f.vals[in.result] = v;
      break;
    }
    }
    ++f.idx;
    return std::nullopt;
  }
};

} // namespace

Exploration explore_program(const Program &p, const ExplorationBudget &budget) {
  return Explorer(p, budget).run();
}

} // namespace uriah
