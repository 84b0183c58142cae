#include "uriah/oracle.hpp"

#include <json.hpp>

#include <algorithm>
#include <map>
#include <set>
#include <tuple>

namespace uriah {

using namespace hir;

std::string_view finding_name(FindingKind k) {
  switch (k) {
  case FindingKind::OutOfBounds: return "oob";
  case FindingKind::InvalidFree: return "invalid-free";
  case FindingKind::TypeConfusion: return "type-confusion";
  case FindingKind::UseAfterFree: return "uaf";
  case FindingKind::DoubleFree: return "double-free";
  case FindingKind::UninitRead: return "ubi-read";
  }
  return "?";
}

bool OracleResult::violates(int site) const {
  for (const auto &f : findings)
    if (f.site == site && (f.kind == FindingKind::OutOfBounds || f.kind == FindingKind::InvalidFree ||
                           f.kind == FindingKind::TypeConfusion))
      return true;
  return false;
}

std::string OracleResult::to_json(const Program &p) const {
  nlohmann::ordered_json j;
  j["partial"] = partial;
  j["inputs"] = inputs;
  j["executions"] = executions;
  j["traps"] = traps;
  j["findings"] = nlohmann::json::array();
  for (const auto &f : findings) {
    nlohmann::ordered_json o;
    o["kind"] = finding_name(f.kind);
    o["site"] = f.site;
    o["fn"] = f.fn >= 0 ? p.functions[f.fn].name : "<global>";
    o["line"] = f.line;
    o["input"] = f.input;
    o["detail"] = f.detail;
    j["findings"].push_back(o);
  }
  return j.dump(2);
}

namespace {

constexpr std::int64_t kMaxAlloc = 1 << 20;

struct Ptr {
  std::int32_t obj = -1;
  std::int64_t off = 0;
  bool operator==(const Ptr &) const = default;
};

struct Val {
  std::int64_t i = 0;
  Ptr p;
};

struct Byte {
  std::uint8_t v = 0;
  std::uint8_t tag = 0;  // 0: never written, else prim + 1
  std::uint8_t pos = 0;
};

struct Obj {
  int site = -1;
  bool heap = true;
  std::int64_t size = 0;
  std::vector<Byte> bytes;
  std::map<std::int64_t, Ptr> refs;
  bool alive = true;
};

struct Frame {
  int fn;
  BlockId block = 0;
  BlockId prev = 0;
  std::uint32_t idx = 0;
  std::vector<Val> vals;
  ValueId ret_to = kNoValue;
};

struct Thread {
  std::vector<Frame> stack;
  bool done = false;
};

struct State {
  std::vector<Obj> objs;
  std::vector<Thread> threads;
  std::uint64_t steps = 0;
  bool trapped = false;
};

std::int64_t wrap_add(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) + static_cast<std::uint64_t>(b));
}
std::int64_t wrap_sub(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) - static_cast<std::uint64_t>(b));
}
std::int64_t wrap_mul(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(b));
}

std::int64_t truncate(std::int64_t v, Prim p) {
  switch (p) {
  case Prim::I8: return static_cast<std::int8_t>(v);
  case Prim::I16: return static_cast<std::int16_t>(v);
  case Prim::I32: return static_cast<std::int32_t>(v);
  default: return v;
  }
}

class Interp {
public:
  Interp(const Program &p, const OracleOptions &opt, OracleResult &res) : p_(p), opt_(opt), res_(res) {}

  void run_input(const std::vector<std::int64_t> &input) {
    input_ = input;
    State s;
    init_globals(s);
    Thread t;
    Frame f = make_frame(p_.entry);
    const Function &main = p_.functions[p_.entry];
    for (std::size_t k = 0; k < main.params.size(); ++k) f.vals[main.params[k].value].i = input[k];
    t.stack.push_back(std::move(f));
    s.threads.push_back(std::move(t));
    interleavings_ = 0;
    explore(std::move(s));
  }

private:
  const Program &p_;
  const OracleOptions &opt_;
  OracleResult &res_;
  std::vector<std::int64_t> input_;
  std::uint64_t interleavings_ = 0;
  std::set<std::tuple<int, int, int, int>> seen_;
  std::vector<int> global_obj_;

  void report(FindingKind k, int site, int fn, int line, std::string detail) {
    if (!seen_.insert({static_cast<int>(k), site, fn, line}).second) return;
    res_.findings.push_back({k, site, fn, line, input_, std::move(detail)});
  }

  Frame make_frame(int fn) {
    Frame f;
    f.fn = fn;
    f.vals.resize(p_.functions[fn].values.size());
    return f;
  }

  int new_obj(State &s, int site, bool heap, std::int64_t size) {
    Obj o;
    o.site = site;
    o.heap = heap;
    o.size = size;
    o.bytes.resize(static_cast<std::size_t>(size));
    s.objs.push_back(std::move(o));
    return static_cast<int>(s.objs.size() - 1);
  }

  void write_bytes(Obj &o, std::int64_t off, std::int64_t v, Prim prim) {
    std::int64_t w = static_cast<std::int64_t>(prim_size(prim));
    for (auto it = o.refs.lower_bound(off - 7); it != o.refs.end() && it->first < off + w;)
      it = it->first + 8 > off ? o.refs.erase(it) : std::next(it);
    for (std::int64_t i = 0; i < w; ++i) {
      Byte &b = o.bytes[off + i];
      b.v = static_cast<std::uint8_t>(static_cast<std::uint64_t>(v) >> (8 * i));
      b.tag = static_cast<std::uint8_t>(prim) + 1;
      b.pos = static_cast<std::uint8_t>(i);
    }
  }

  void init_value(State &s, int obj, std::uint64_t off, const TypePtr &t, const GlobalInit &gi) {
    switch (gi.kind) {
    case GlobalInit::None: return;
    case GlobalInit::Int: write_bytes(s.objs[obj], off, truncate(gi.value, t->flat()[0].prim), t->flat()[0].prim); return;
    case GlobalInit::Alloc: {
      const AllocationSite &site = p_.sites[gi.site];
      int h = new_obj(s, site.id, true, site.size);
      write_bytes(s.objs[obj], off, 0, Prim::Ref);
      s.objs[obj].refs[off] = {h, 0};
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

  void init_globals(State &s) {
    global_obj_.clear();
    for (const auto &g : p_.globals) {
      int o = new_obj(s, -1, false, static_cast<std::int64_t>(g.type->total_size));
      global_obj_.push_back(o);
    }
    for (std::size_t g = 0; g < p_.globals.size(); ++g)
      init_value(s, global_obj_[g], 0, p_.globals[g].type, p_.globals[g].init);
  }

  static bool visible(Op op) {
    return op == Op::Load || op == Op::Store || op == Op::Alloc || op == Op::Free ||
           op == Op::Realloc || op == Op::Spawn;
  }

  const Instr &current(const State &s, std::size_t t) const {
    const Frame &f = s.threads[t].stack.back();
    return p_.functions[f.fn].blocks[f.block].instrs[f.idx];
  }

  void explore(State s) {
    for (;;) {
      if (s.trapped) {
        finish(s, true);
        return;
      }
      std::vector<std::size_t> runnable;
      for (std::size_t t = 0; t < s.threads.size(); ++t) {
        if (s.threads[t].done) continue;
        run_invisible(s, t);
        if (s.trapped) break;
        if (!s.threads[t].done) runnable.push_back(t);
      }
      if (s.trapped) continue;
      if (runnable.empty()) {
        finish(s, false);
        return;
      }
      if (s.steps > opt_.max_steps) {
        res_.partial = true;
        finish(s, false);
        return;
      }
      for (std::size_t k = 0; k + 1 < runnable.size(); ++k) {
        if (interleavings_ + 1 >= opt_.max_interleavings || res_.executions >= opt_.cap) {
          res_.partial = true;
          break;
        }
        State copy = s;
        step(copy, runnable[k]);
        ++interleavings_;
        explore(std::move(copy));
      }
      step(s, runnable.back());
    }
  }

  void finish(const State &, bool trapped) {
    ++res_.executions;
    if (trapped) ++res_.traps;
  }

  void run_invisible(State &s, std::size_t t) {
    while (!s.threads[t].done && !s.trapped) {
      if (visible(current(s, t).op)) return;
      step(s, t);
      if (s.steps > opt_.max_steps) return;
    }
  }

  std::int64_t ival(const Frame &f, const Operand &o) const {
    return o.is_const ? o.constant : f.vals[o.value].i;
  }
  Ptr pval(const Frame &f, const Operand &o) const {
    return o.is_const ? Ptr{} : f.vals[o.value].p;
  }

  void enter(Frame &f, BlockId to) {
    const Function &fn = p_.functions[f.fn];
    f.prev = f.block;
    f.block = to;
    f.idx = 0;
    // Phis read their inputs simultaneously.
    std::vector<std::pair<ValueId, Val>> updates;
    const auto &instrs = fn.blocks[to].instrs;
    for (; f.idx < instrs.size() && instrs[f.idx].op == Op::Phi; ++f.idx) {
      const Instr &phi = instrs[f.idx];
      for (const auto &in : phi.incoming)
        if (in.block == f.prev) {
          Val v;
          if (in.value.is_const) v.i = in.value.constant;
          else v = f.vals[in.value.value];
          updates.push_back({phi.result, v});
        }
    }
    for (auto &[r, v] : updates) f.vals[r] = v;
  }

  Obj *deref(State &s, const Ptr &ptr, std::int64_t width, const Frame &f, const Instr &in, bool write) {
    if (ptr.obj < 0) {
      s.trapped = true;
      return nullptr;
    }
    Obj &o = s.objs[ptr.obj];
    if (!o.alive) report(FindingKind::UseAfterFree, o.site, f.fn, in.line, write ? "write" : "read");
    if (ptr.off < 0 || ptr.off > o.size - width) {
      report(FindingKind::OutOfBounds, o.site, f.fn, in.line,
             "offset " + std::to_string(ptr.off) + " width " + std::to_string(width) + " size " +
                 std::to_string(o.size));
      return nullptr;
    }
    return &o;
  }

  void step(State &s, std::size_t t) {
    ++s.steps;
    Thread &th = s.threads[t];
    Frame &f = th.stack.back();
    const Function &fn = p_.functions[f.fn];
    const Instr &in = fn.blocks[f.block].instrs[f.idx];
    auto set_i = [&](std::int64_t v) { f.vals[in.result].i = v; };
    auto set_p = [&](Ptr v) { f.vals[in.result].p = v; };
    bool advance = true;
    switch (in.op) {
    case Op::Alloc: {
      std::int64_t size = in.type ? static_cast<std::int64_t>(in.type->total_size) : ival(f, in.args[0]);
      if (size < 0 || size > kMaxAlloc) {
        s.trapped = true;
        return;
      }
      set_p({new_obj(s, in.site, true, size), 0});
      break;
    }
    case Op::Free: {
      Ptr ptr = pval(f, in.args[0]);
      if (ptr.obj < 0) break;
      Obj &o = s.objs[ptr.obj];
      if (!o.heap || ptr.off != 0) report(FindingKind::InvalidFree, o.site, f.fn, in.line, "offset " + std::to_string(ptr.off));
      else if (!o.alive) report(FindingKind::DoubleFree, o.site, f.fn, in.line, "");
      else o.alive = false;
      break;
    }
    case Op::Realloc: {
      Ptr ptr = pval(f, in.args[0]);
      std::int64_t size = in.type ? static_cast<std::int64_t>(in.type->total_size) : ival(f, in.args[1]);
      if (ptr.obj < 0 || size < 0 || size > kMaxAlloc) {
        s.trapped = true;
        return;
      }
      Obj &o = s.objs[ptr.obj];
      if (!o.heap || ptr.off != 0) {
        report(FindingKind::InvalidFree, o.site, f.fn, in.line, "realloc of interior pointer");
        s.trapped = true;
        return;
      }
      if (!o.alive) {
        report(FindingKind::DoubleFree, o.site, f.fn, in.line, "realloc of freed object");
        s.trapped = true;
        return;
      }
      int site = o.site;
      int n = new_obj(s, site, true, size);
      Obj &old = s.objs[ptr.obj];
      Obj &nw = s.objs[n];
      std::int64_t keep = std::min(old.size, size);
      std::copy(old.bytes.begin(), old.bytes.begin() + keep, nw.bytes.begin());
      for (const auto &[off, r] : old.refs)
        if (off + 8 <= keep) nw.refs[off] = r;
      old.alive = false;
      set_p({n, 0});
      break;
    }
    case Op::Gep: {
      Ptr b = pval(f, in.args[0]);
      b.off = wrap_add(b.off, ival(f, in.args[1]));
      set_p(b);
      break;
    }
    case Op::Cast:
      if (fn.values[in.result].type.is_ref) set_p(pval(f, in.args[0]));
      else set_i(truncate(ival(f, in.args[0]), in.prim));
      break;
    case Op::Load: {
      std::int64_t w = static_cast<std::int64_t>(prim_size(in.prim));
      Ptr ptr = pval(f, in.args[0]);
      Obj *o = deref(s, ptr, w, f, in, false);
      if (s.trapped) return;
      Val v;
      if (o) {
        bool ubi = false, confused = false;
        std::uint64_t raw = 0;
        bool ref_ok = true;
        for (std::int64_t i = 0; i < w; ++i) {
          const Byte &b = o->bytes[ptr.off + i];
          raw |= static_cast<std::uint64_t>(b.v) << (8 * i);
          if (b.tag == 0) {
            ubi = o->heap;
            ref_ok = false;
          } else if (b.tag != static_cast<std::uint8_t>(in.prim) + 1 || b.pos != i) {
            confused = true;
            ref_ok = false;
          }
        }
        if (ubi) report(FindingKind::UninitRead, o->site, f.fn, in.line, "");
        if (confused)
          report(FindingKind::TypeConfusion, o->site, f.fn, in.line,
                 std::string("read ") + std::string(prim_name(in.prim)) + " at " + std::to_string(ptr.off));
        if (in.prim == Prim::Ref) {
          auto it = o->refs.find(ptr.off);
          if (ref_ok && it != o->refs.end()) v.p = it->second;
        } else {
          v.i = truncate(static_cast<std::int64_t>(raw), in.prim);
        }
      }
      f.vals[in.result] = v;
      break;
    }
    case Op::Store: {
      std::int64_t w = static_cast<std::int64_t>(prim_size(in.prim));
      Ptr ptr = pval(f, in.args[0]);
      Obj *o = deref(s, ptr, w, f, in, true);
      if (s.trapped) return;
      if (o) {
        if (in.prim == Prim::Ref) {
          write_bytes(*o, ptr.off, 0, Prim::Ref);
          o->refs[ptr.off] = pval(f, in.args[1]);
        } else {
          write_bytes(*o, ptr.off, ival(f, in.args[1]), in.prim);
        }
      }
      break;
    }
    case Op::Assign:
      if (in.args[0].is_const) set_i(in.args[0].constant);
      else f.vals[in.result] = f.vals[in.args[0].value];
      break;
    case Op::Arith: {
      std::int64_t a = ival(f, in.args[0]), b = ival(f, in.args[1]);
      switch (in.arith) {
      case ArithOp::Add: set_i(wrap_add(a, b)); break;
      case ArithOp::Sub: set_i(wrap_sub(a, b)); break;
      case ArithOp::Mul: set_i(wrap_mul(a, b)); break;
      case ArithOp::And: set_i(a & b); break;
      case ArithOp::Or: set_i(a | b); break;
      case ArithOp::Xor: set_i(a ^ b); break;
      }
      break;
    }
    case Op::Cmp: {
      bool r = false;
      bool refs = !in.args[0].is_const && fn.values[in.args[0].value].type.is_ref;
      if (refs) {
        Ptr a = pval(f, in.args[0]), b = pval(f, in.args[1]);
        r = in.cmp == CmpOp::Eq ? a == b : in.cmp == CmpOp::Ne ? !(a == b) : false;
      } else {
        std::int64_t a = ival(f, in.args[0]), b = ival(f, in.args[1]);
        switch (in.cmp) {
        case CmpOp::Eq: r = a == b; break;
        case CmpOp::Ne: r = a != b; break;
        case CmpOp::Lt: r = a < b; break;
        case CmpOp::Le: r = a <= b; break;
        case CmpOp::Gt: r = a > b; break;
        case CmpOp::Ge: r = a >= b; break;
        }
      }
      set_i(r ? 1 : 0);
      break;
    }
    case Op::Phi: break;  // handled on block entry
    case Op::Br:
      enter(f, ival(f, in.args[0]) != 0 ? in.targets[0] : in.targets[1]);
      advance = false;
      break;
    case Op::Jmp:
      enter(f, in.targets[0]);
      advance = false;
      break;
    case Op::Call:
    case Op::Spawn: {
      Frame nf = make_frame(in.callee);
      const Function &cal = p_.functions[in.callee];
      for (std::size_t k = 0; k < in.args.size(); ++k) {
        Val v;
        if (in.args[k].is_const) v.i = in.args[k].constant;
        else v = f.vals[in.args[k].value];
        nf.vals[cal.params[k].value] = v;
      }
      ++f.idx;
      if (in.op == Op::Spawn) {
        Thread nt;
        nt.stack.push_back(std::move(nf));
        s.threads.push_back(std::move(nt));  // invalidates th / f
        return;
      }
      nf.ret_to = in.result;
      enter_first(nf);
      th.stack.push_back(std::move(nf));
      return;
    }
    case Op::Ret: {
      Val v;
      if (!in.args.empty()) {
        if (in.args[0].is_const) v.i = in.args[0].constant;
        else v = f.vals[in.args[0].value];
      }
      ValueId to = f.ret_to;
      th.stack.pop_back();
      if (th.stack.empty()) {
        th.done = true;
        return;
      }
      if (to != kNoValue) th.stack.back().vals[to] = v;
      return;
    }
    case Op::GlobalAddr: set_p({global_obj_[in.global], 0}); break;
    }
    if (advance) ++f.idx;
  }

  void enter_first(Frame &f) {
    f.block = 0;
    f.idx = 0;
  }
};

} // namespace

OracleResult run_oracle(const Program &p, const OracleOptions &opt) {
  OracleResult res;
  const Function &main = p.functions[p.entry];
  std::vector<std::int64_t> lo, hi;
  unsigned __int128 space = 1;
  for (const auto &prm : main.params) {
    lo.push_back(prm.lo);
    hi.push_back(prm.hi);
    space *= static_cast<unsigned __int128>(static_cast<__int128>(prm.hi) - prm.lo + 1);
    if (space > (static_cast<unsigned __int128>(1) << 64)) space = static_cast<unsigned __int128>(1) << 64;
  }
  if (space > opt.cap) res.partial = true;
  Interp interp(p, opt, res);
  std::vector<std::int64_t> cur = lo;
  for (;;) {
    if (res.executions >= opt.cap) {
      res.partial = true;
      break;
    }
    ++res.inputs;
    interp.run_input(cur);
    std::size_t k = 0;
    for (; k < cur.size(); ++k) {
      if (cur[k] < hi[k]) {
        ++cur[k];
        break;
      }
      cur[k] = lo[k];
    }
    if (k == cur.size()) break;
  }
  return res;
}

} // namespace uriah
