#include "support.hpp"

#include "uriah/classifier.hpp"
#include "uriah/symexec.hpp"

#include <doctest.h>

#include <random>

using namespace uriah;
using namespace uriah::hir;

namespace {

const char *kDiamond = R"(fn main(x: i64 in 0..9) {
entry:
  c = cmp lt x, 3
  br c, a, b
a:
  jmp j
b:
  jmp j
j:
  ret
}
)";

PathSet paths_between(const Program &p, const char *from, const char *to, ExplorationBudget b = {}) {
  const Function &f = p.functions[p.entry];
  return enumerate_paths(p, p.entry, f.find_block(from), f.find_block(to), b);
}

// Does the path admit x = v?
bool admits(PathCondition pc, const std::string &var, std::int64_t v) {
  pc.add_atom(Term::v(pc.var(var)), CmpOp::Eq, Term::c(v));
  return is_feasible(pc);
}

std::int64_t wrap(ArithOp op, std::int64_t a, std::int64_t b) {
  auto ua = static_cast<std::uint64_t>(a), ub = static_cast<std::uint64_t>(b);
  switch (op) {
  case ArithOp::Add: return static_cast<std::int64_t>(ua + ub);
  case ArithOp::Sub: return static_cast<std::int64_t>(ua - ub);
  case ArithOp::Mul: return static_cast<std::int64_t>(ua * ub);
  case ArithOp::And: return a & b;
  case ArithOp::Or: return a | b;
  case ArithOp::Xor: return a ^ b;
  }
  return 0;
}

bool holds(CmpOp op, std::int64_t a, std::int64_t b) {
  switch (op) {
  case CmpOp::Eq: return a == b;
  case CmpOp::Ne: return a != b;
  case CmpOp::Lt: return a < b;
  case CmpOp::Le: return a <= b;
  case CmpOp::Gt: return a > b;
  case CmpOp::Ge: return a >= b;
  }
  return false;
}

} // namespace

TEST_CASE("path enumeration") {
  Program p = test::parse(kDiamond);
  SUBCASE("straight line") {
    auto s = paths_between(p, "a", "j");
    REQUIRE_FALSE(s.exhausted);
    REQUIRE(s.paths.size() == 1);
    CHECK(s.paths[0].atoms.empty());
  }
  SUBCASE("diamond") {
    auto s = paths_between(p, "entry", "j");
    REQUIRE_FALSE(s.exhausted);
    REQUIRE(s.paths.size() == 2);
    // One arm is x < 3, the other x >= 3.
    CHECK(admits(s.paths[0], "main.x", 2));
    CHECK_FALSE(admits(s.paths[0], "main.x", 3));
    CHECK(admits(s.paths[1], "main.x", 3));
    CHECK_FALSE(admits(s.paths[1], "main.x", 2));
    CHECK(paths_between(p, "entry", "j").paths[0].str() == s.paths[0].str());  // deterministic
  }
  SUBCASE("recursion past the depth budget") {
    Program r = test::parse(R"(fn down(k: i64) {
entry:
  c = cmp gt k, 0
  br c, more, done
more:
  k1 = sub k, 1
  call down(k1)
  jmp done
done:
  ret
}
fn main() {
entry:
  call down(10)
  jmp out
out:
  ret
}
)");
    auto s = paths_between(r, "entry", "out");
    CHECK(s.exhausted);
    CHECK(s.paths.empty());
  }
  SUBCASE("call chain against the depth budget") {
    std::string text;
    for (int i = 1; i <= 6; ++i) {
      text += "fn f" + std::to_string(i) + "() {\nentry:\n";
      if (i < 6) text += "  call f" + std::to_string(i + 1) + "()\n";
      text += "  ret\n}\n";
    }
    text += "fn main() {\nentry:\n  call f1()\n  jmp out\nout:\n  ret\n}\n";
    Program r = test::parse(text);
    CHECK(paths_between(r, "entry", "out").exhausted);
    ExplorationBudget deep;
    deep.depth = 6;
    auto s = paths_between(r, "entry", "out", deep);
    CHECK_FALSE(s.exhausted);
    CHECK(s.paths.size() == 1);
  }
}

TEST_CASE("feasibility examples") {
  PathCondition pc;
  int x = pc.new_var("x");
  pc.unknown(x);
  SUBCASE("contradiction") {
    pc.add_atom(Term::v(x), CmpOp::Eq, Term::c(5));
    pc.add_atom(Term::v(x), CmpOp::Lt, Term::c(3));
    CHECK_FALSE(is_feasible(pc));
  }
  SUBCASE("open interval") {
    pc.add_atom(Term::v(x), CmpOp::Lt, Term::c(3));
    pc.add_atom(Term::v(x), CmpOp::Gt, Term::c(0));
    CHECK(is_feasible(pc));
  }
  SUBCASE("two distinct tags") {
    const std::int64_t core = 0x45524f43, event = 0x544e5645;
    pc.add_atom(Term::v(x), CmpOp::Eq, Term::c(core));
    pc.add_atom(Term::v(x), CmpOp::Eq, Term::c(event));
    // Independent check over a window around both tags.
    bool any = false;
    for (std::int64_t v = core - 2; v <= event + 2 && !any; v += (v == core + 2 ? event - core - 4 : 1))
      any = v == core && v == event;
    CHECK_FALSE(any);
    CHECK_FALSE(is_feasible(pc));
  }
}

// A satisfiable condition is never reported infeasible.  Free variables
// range over [-3, 3] and everything else is computed from them.
TEST_CASE("feasibility is sound against enumeration") {
  std::mt19937_64 rng(7);
  auto pick = [&](int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); };
  int checked = 0, sat = 0;
  for (int iter = 0; iter < 3000; ++iter) {
    PathCondition pc;
    int free_vars = 1 + pick(3);
    for (int i = 0; i < free_vars; ++i) {
      int v = pc.new_var("v" + std::to_string(i));
      pc.unknown(v);
      pc.add_atom(Term::v(v), CmpOp::Ge, Term::c(-3));
      pc.add_atom(Term::v(v), CmpOp::Le, Term::c(3));
    }
    auto term = [&]() { return pick(3) == 0 ? Term::c(pick(9) - 4) : Term::v(pick(static_cast<int>(pc.names.size()))); };
    int derived = pick(3);
    for (int i = 0; i < derived; ++i) {
      PathDef d;
      d.a = term();
      d.b = term();
      d.var = pc.new_var("d" + std::to_string(i));
      int k = pick(5);
      if (k == 0) d.kind = PathDef::Copy;
      else if (k == 1) { d.kind = PathDef::Truncate; d.prim = Prim::I8; }
      else { d.kind = PathDef::Arith; d.arith = static_cast<ArithOp>(pick(6)); }
      pc.defs.push_back(d);
    }
    int atoms = 1 + pick(4);
    for (int i = 0; i < atoms; ++i) pc.add_atom(term(), static_cast<CmpOp>(pick(6)), term());

    // Brute force over the free variables.
    std::vector<std::int64_t> val(pc.names.size(), 0);
    bool satisfiable = false;
    int combos = 1;
    for (int i = 0; i < free_vars; ++i) combos *= 7;
    for (int c = 0; c < combos && !satisfiable; ++c) {
      int r = c;
      for (int i = 0; i < free_vars; ++i, r /= 7) val[i] = r % 7 - 3;
      auto get = [&](const Term &t) { return t.is_const ? t.constant : val[t.var]; };
      for (const PathDef &d : pc.defs) {
        if (d.kind == PathDef::Copy) val[d.var] = get(d.a);
        else if (d.kind == PathDef::Truncate) val[d.var] = static_cast<std::int8_t>(get(d.a));
        else if (d.kind == PathDef::Arith) val[d.var] = wrap(d.arith, get(d.a), get(d.b));
      }
      bool ok = true;
      for (const PathAtom &a : pc.atoms) ok = ok && holds(a.op, get(a.lhs), get(a.rhs));
      satisfiable = ok;
    }
    ++checked;
    if (satisfiable) {
      ++sat;
      CHECK_MESSAGE(is_feasible(pc), pc.str());
    }
  }
  CHECK(checked == 3000);
  CHECK(sat > 300);
}

TEST_CASE("refinement of static verdicts") {
  auto both = [](const std::string &name) {
    Program p = test::parse(test::read_text(test::corpus_dir() / (name + ".hir")));
    ClassifierConfig stat;
    stat.symexec = false;
    return std::pair{classify_all(p, stat), classify_all(p)};
  };
  SUBCASE("guarded downcast flips") {
    auto [s, f] = both("guarded_downcast");
    CHECK(s.site(1).verdict == Verdict::Unsafe);
    CHECK(f.site(1).verdict == Verdict::Safe);
    CHECK(f.site(1).stage == "symexec");
  }
  SUBCASE("reachable overflow stays") {
    auto [s, f] = both("off_by_one_loop");
    CHECK(f.site(0).verdict == Verdict::Unsafe);
  }
  SUBCASE("exhausted budget stays") {
    Program p = test::parse(test::read_text(test::corpus_dir() / "guarded_downcast.hir"));
    ClassifierConfig tiny;
    tiny.budget.paths = 1;
    CHECK(classify_all(p, tiny).site(1).verdict == Verdict::Unsafe);
  }
}
