#include "uriah/symexec.hpp"

#include "uriah/ranges.hpp"

#include <map>
#include <optional>

namespace uriah {

using namespace hir;

int PathCondition::new_var(std::string name) {
  names.push_back(std::move(name));
  return static_cast<int>(names.size() - 1);
}

int PathCondition::var(std::string name) {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  return new_var(std::move(name));
}

void PathCondition::unknown(int v, Prim width) {
  PathDef d;
  d.kind = PathDef::Unknown;
  d.var = v;
  d.prim = width;
  defs.push_back(d);
}

void PathCondition::constant(int v, std::int64_t k) {
  PathDef d;
  d.kind = PathDef::Copy;
  d.var = v;
  d.a = Term::c(k);
  defs.push_back(d);
}

std::string PathCondition::str() const {
  auto term = [&](const Term &t) { return t.is_const ? std::to_string(t.constant) : names[t.var]; };
  std::string s = "{";
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (i) s += ", ";
    s += term(atoms[i].lhs) + " " + std::string(cmp_name(atoms[i].op)) + " " + term(atoms[i].rhs);
  }
  return s + "}";
}

namespace {

constexpr int kMaxRounds = 32;

struct Env {
  std::vector<AbsInt> v;
  bool changed = false;
  bool empty = false;

  AbsInt get(const Term &t) const { return t.is_const ? AbsInt::of(t.constant) : v[t.var]; }
  void narrow(const Term &t, const AbsInt &x) {
    if (t.is_const) {
      if (!x.contains(t.constant)) empty = true;
      return;
    }
    AbsInt n = v[t.var].meet(x);
    if (!(n == v[t.var])) {
      v[t.var] = n;
      changed = true;
    }
    if (n.is_empty()) empty = true;
  }
};

} // namespace

bool is_feasible(const PathCondition &pc) {
  Env env;
  env.v.assign(pc.names.size(), AbsInt::top());
  for (int round = 0; round < kMaxRounds; ++round) {
    env.changed = false;
    for (const auto &d : pc.defs) {
      switch (d.kind) {
      case PathDef::Unknown: env.narrow(Term::v(d.var), AbsInt::from(full_range(d.prim))); break;
      case PathDef::Copy: env.narrow(Term::v(d.var), env.get(d.a)); break;
      case PathDef::Arith: env.narrow(Term::v(d.var), abs_arith(d.arith, env.get(d.a), env.get(d.b))); break;
      case PathDef::Truncate: env.narrow(Term::v(d.var), abs_truncate(env.get(d.a), d.prim)); break;
      }
      if (env.empty) return false;
    }
    for (const auto &a : pc.atoms) {
      AbsInt l = env.get(a.lhs), r = env.get(a.rhs);
      env.narrow(a.lhs, refine(l, a.op, r));
      env.narrow(a.rhs, refine(r, swap_sides(a.op), l));
      if (env.empty) return false;
    }
    // Push narrowed results back to the operands they were computed from.
    for (auto it = pc.defs.rbegin(); it != pc.defs.rend(); ++it) {
      const PathDef &d = *it;
      AbsInt x = env.v[d.var];
      if (d.kind == PathDef::Copy) {
        env.narrow(d.a, x);
      } else if (d.kind == PathDef::Arith && (d.arith == ArithOp::Add || d.arith == ArithOp::Sub)) {
        if (d.b.is_const) {
          auto inv = d.arith == ArithOp::Add ? ArithOp::Sub : ArithOp::Add;
          env.narrow(d.a, abs_arith(inv, x, AbsInt::of(d.b.constant)));
        } else if (d.a.is_const && d.arith == ArithOp::Add) {
          env.narrow(d.b, abs_arith(ArithOp::Sub, x, AbsInt::of(d.a.constant)));
        } else if (d.a.is_const) {
          env.narrow(d.b, abs_arith(ArithOp::Sub, AbsInt::of(d.a.constant), x));
        }
      }
      if (env.empty) return false;
    }
    if (!env.changed) break;
  }
  return true;
}

namespace {

struct WFrame {
  int fn;
  BlockId block = 0;
  BlockId prev = 0;
  std::size_t idx = 0;
  std::map<ValueId, Term> vars;
  std::map<BlockId, int> visits;
  ValueId ret_to = kNoValue;
};

struct Cmp {
  CmpOp op;
  Term a, b;
};

struct WState {
  std::vector<WFrame> stack;
  PathCondition pc;
  std::map<int, Cmp> cmps;  // var -> comparison that produced it
  std::map<std::string, int> counts;
  bool done = false;
};

class Walker {
public:
  Walker(const Program &p, int fn, BlockId to, const ExplorationBudget &b) : p_(p), start_(fn), to_(to), b_(b) {}

  PathSet run(BlockId from) {
    WState s;
    WFrame f;
    f.fn = start_;
    const Function &fn = p_.functions[start_];
    for (const auto &prm : fn.params)
      if (!fn.values[prm.value].type.is_ref) {
        int v = fresh(s, start_, prm.value);
        s.pc.unknown(v, fn.values[prm.value].type.width);
        f.vars[prm.value] = Term::v(v);
      }
    s.stack.push_back(std::move(f));
    enter(s, from, kNoBlock);
    std::vector<WState> work;
    if (!s.done) work.push_back(std::move(s));
    std::uint64_t started = 1;
    while (!work.empty() && !out_.exhausted) {
      WState st = std::move(work.back());
      work.pop_back();
      while (!st.done && !out_.exhausted) {
        if (auto fork = step(st)) {
          if (++started > b_.paths) exhaust("more than " + std::to_string(b_.paths) + " paths");
          work.push_back(std::move(*fork));
        }
      }
    }
    if (out_.exhausted) out_.paths.clear();
    return std::move(out_);
  }

private:
  static constexpr BlockId kNoBlock = ~0u;
  const Program &p_;
  int start_;
  BlockId to_;
  const ExplorationBudget &b_;
  PathSet out_;

  int fresh(WState &s, int fn, ValueId v) {
    std::string base = p_.functions[fn].name + "." + p_.functions[fn].values[v].name;
    int n = s.counts[base]++;
    return s.pc.new_var(n ? base + "#" + std::to_string(n) : base);
  }

  void exhaust(std::string why) {
    if (out_.exhausted) return;
    out_.exhausted = true;
    out_.why = std::move(why);
  }

  static Term term(const WFrame &f, const Operand &o) {
    if (o.is_const) return Term::c(o.constant);
    auto it = f.vars.find(o.value);
    return it == f.vars.end() ? Term{} : it->second;
  }

  static bool known(const Term &t) { return t.is_const || t.var >= 0; }

  void define(WState &s, WFrame &f, ValueId r, PathDef d) {
    d.var = fresh(s, f.fn, r);
    if (d.kind == PathDef::Copy && !known(d.a)) d.kind = PathDef::Unknown;
    s.pc.defs.push_back(d);
    f.vars[r] = Term::v(d.var);
  }

  void enter(WState &s, BlockId to, BlockId prev) {
    WFrame &f = s.stack.back();
    if (s.stack.size() == 1) {
      s.pc.blocks.push_back(to);
      if (to == to_) {
        out_.paths.push_back(std::move(s.pc));
        s.done = true;
        return;
      }
    }
    if (++f.visits[to] > b_.unroll + 1) {
      exhaust("loop unrolled more than " + std::to_string(b_.unroll) + " times");
      s.done = true;
      return;
    }
    const Function &fn = p_.functions[f.fn];
    f.prev = prev;
    f.block = to;
    f.idx = 0;
    const auto &instrs = fn.blocks[to].instrs;
    std::vector<std::pair<ValueId, Term>> phis;
    for (; f.idx < instrs.size() && instrs[f.idx].op == Op::Phi; ++f.idx) {
      const Instr &in = instrs[f.idx];
      if (fn.values[in.result].type.is_ref) continue;
      for (const auto &inc : in.incoming)
        if (inc.block == prev) phis.push_back({in.result, term(f, inc.value)});
    }
    for (auto &[r, t] : phis) define(s, f, r, {PathDef::Copy, -1, ArithOp::Add, t, {}, Prim::I64});
  }

  void add_branch(WState &s, Term c, bool taken) {
    auto it = s.cmps.find(c.var);
    if (it != s.cmps.end()) {
      const Cmp &cm = it->second;
      if (known(cm.a) && known(cm.b)) s.pc.atoms.push_back({cm.a, taken ? cm.op : negate(cm.op), cm.b});
      return;
    }
    s.pc.atoms.push_back({c, taken ? CmpOp::Ne : CmpOp::Eq, Term::c(0)});
  }

  // Runs one instruction; returns the other side of a fork, if any.
  std::optional<WState> step(WState &s) {
    WFrame &f = s.stack.back();
    const Function &fn = p_.functions[f.fn];
    const Instr &in = fn.blocks[f.block].instrs[f.idx];
    bool int_result = in.result != kNoValue && !fn.values[in.result].type.is_ref;
    switch (in.op) {
    case Op::Assign:
      if (int_result) define(s, f, in.result, {PathDef::Copy, -1, ArithOp::Add, term(f, in.args[0]), {}, Prim::I64});
      break;
    case Op::Arith: {
      PathDef d{PathDef::Arith, -1, in.arith, term(f, in.args[0]), term(f, in.args[1]), Prim::I64};
      if (!known(d.a) || !known(d.b)) d.kind = PathDef::Unknown;
      define(s, f, in.result, d);
      break;
    }
    case Op::Cast:
      if (int_result) {
        PathDef d{PathDef::Truncate, -1, ArithOp::Add, term(f, in.args[0]), {}, in.prim};
        if (!known(d.a)) d.kind = PathDef::Unknown;
        define(s, f, in.result, d);
      }
      break;
    case Op::Load:
      if (int_result) define(s, f, in.result, {PathDef::Unknown, -1, ArithOp::Add, {}, {}, in.prim});
      break;
    case Op::Cmp: {
      define(s, f, in.result, {PathDef::Unknown, -1, ArithOp::Add, {}, {}, Prim::I8});
      int v = f.vars[in.result].var;
      s.pc.atoms.push_back({Term::v(v), CmpOp::Ge, Term::c(0)});
      s.pc.atoms.push_back({Term::v(v), CmpOp::Le, Term::c(1)});
      bool refs = !in.args[0].is_const && fn.values[in.args[0].value].type.is_ref;
      if (!refs) s.cmps[v] = {in.cmp, term(f, in.args[0]), term(f, in.args[1])};
      break;
    }
    case Op::Call: {
      if (static_cast<int>(s.stack.size()) > b_.depth) {
        exhaust("call depth above " + std::to_string(b_.depth));
        s.done = true;
        return std::nullopt;
      }
      const Function &cal = p_.functions[in.callee];
      WFrame nf;
      nf.fn = in.callee;
      nf.ret_to = in.result;
      std::vector<std::pair<ValueId, Term>> args;
      for (std::size_t k = 0; k < in.args.size(); ++k)
        if (!cal.values[cal.params[k].value].type.is_ref) args.push_back({cal.params[k].value, term(f, in.args[k])});
      ++f.idx;
      s.stack.push_back(std::move(nf));
      for (auto &[pv, t] : args) define(s, s.stack.back(), pv, {PathDef::Copy, -1, ArithOp::Add, t, {}, Prim::I64});
      enter(s, 0, kNoBlock);
      return std::nullopt;
    }
    case Op::Ret: {
      WFrame done = std::move(s.stack.back());
      s.stack.pop_back();
      if (s.stack.empty()) {
        s.done = true;  // left the starting function without reaching the target
        return std::nullopt;
      }
      WFrame &caller = s.stack.back();
      if (done.ret_to != kNoValue && !p_.functions[caller.fn].values[done.ret_to].type.is_ref)
        define(s, caller, done.ret_to,
               {PathDef::Copy, -1, ArithOp::Add, in.args.empty() ? Term::c(0) : term(done, in.args[0]), {}, Prim::I64});
      return std::nullopt;
    }
    case Op::Jmp:
      enter(s, in.targets[0], f.block);
      return std::nullopt;
    case Op::Br: {
      Term c = term(f, in.args[0]);
      BlockId here = f.block;
      if (c.is_const) {
        enter(s, c.constant ? in.targets[0] : in.targets[1], here);
        return std::nullopt;
      }
      WState other = s;
      add_branch(s, c, true);
      add_branch(other, c, false);
      enter(other, in.targets[1], here);
      enter(s, in.targets[0], here);
      if (other.done) return std::nullopt;
      return other;
    }
    default: break;
    }
    ++f.idx;
    return std::nullopt;
  }
};

} // namespace

PathSet enumerate_paths(const Program &p, int fn, BlockId from, BlockId to, const ExplorationBudget &budget) {
  return Walker(p, fn, to, budget).run(from);
}

} // namespace uriah
