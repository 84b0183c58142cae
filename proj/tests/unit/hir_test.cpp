#include "support.hpp"

#include "uriah/cfg.hpp"
#include "uriah/hir.hpp"

#include <doctest.h>

#include <queue>
#include <set>

using namespace uriah;
using namespace uriah::hir;

TEST_CASE("minimal program") {
  auto p = test::parse("type P = { x:i32, y:i32 }\nfn main(){\nb0:\n  p = alloc P\n  free p\n  ret\n}\n");
  CHECK(p.types.size() == 1);
  CHECK(p.sites.size() == 1);
  CHECK(p.sites[0].declared->total_size == 8);
}

TEST_CASE("undefined name is reported at its token") {
  const char *text = "type P = { x:i32, y:i32 }\nfn main(){\nb0:\n  p = alloc P\n  free q\n  ret\n}\n";
  try {
    test::parse(text);
    FAIL("expected a parse error");
  } catch (const ParseError &e) {
    REQUIRE(!e.diagnostics().empty());
    CHECK(e.diagnostics()[0].line == 5);
    CHECK(e.diagnostics()[0].col == 8);
    CHECK(e.diagnostics()[0].message.find("q") != std::string::npos);
  }
}

TEST_CASE("other diagnostics") {
  auto fails = [](const char *t) {
    try {
      test::parse(t);
      return false;
    } catch (const ParseError &) {
      return true;
    }
  };
  CHECK(fails("fn main() {\nentry:\n  x = add 1, 2\n  x = add 1, 2\n  ret\n}\n"));        // redefinition
  CHECK(fails("fn main() {\nentry:\n  jmp nowhere\n}\n"));                              // unknown label
  CHECK(fails("fn main() {\nentry:\n  p = alloc Missing\n  ret\n}\n"));                 // unknown type
  CHECK(fails("fn main() {\nentry:\n  p = alloc 4\n  c = cmp eq p, p\n  ret\n}\n"));   // compare of refs
  CHECK(fails("fn f() {\nentry:\n  ret\n}\n"));                                         // no main
}

namespace {

const char *kEveryOpcode = R"(type P = { a: i32, b: i32 }
global G: ref
fn helper(p: ref) -> ref {
entry:
  ret p
}
fn worker(p: ref) {
entry:
  ret
}
fn main(n: i64 in 0..3) {
entry:
  p = alloc P
  q = realloc p, 16
  g = gep q, 4
  c = cast g, P
  v = load i32 g
  store i32 g, v
  w = assign v
  x = add w, 1
  t = cmp lt x, n
  br t, left, right
left:
  a = gaddr G
  store ref a, q
  jmp join
right:
  r = call helper(q)
  spawn worker(r)
  jmp join
join:
  m = phi [left: 1], [right: 2]
  free q
  ret
}
)";

} // namespace

TEST_CASE("every opcode parses and round-trips through the printer") {
  auto p = test::parse(kEveryOpcode);
  std::set<Op> seen;
  for (const auto &fn : p.functions)
    for (const auto &b : fn.blocks)
      for (const auto &in : b.instrs) seen.insert(in.op);
  CHECK(seen.size() == 17);
  std::string printed = print_program(p);
  auto again = test::parse(printed);
  CHECK(print_program(again) == printed);
  CHECK(again.sites.size() == p.sites.size());
  CHECK(again.instr_count == p.instr_count);
}

TEST_CASE("corpus programs round-trip through the printer") {
  for (const auto &c : test::load_corpus()) {
    CAPTURE(c.name);
    auto p = test::parse(c.text);
    std::string printed = print_program(p);
    CHECK(print_program(test::parse(printed)) == printed);
  }
}

TEST_CASE("cfg of straight line and diamond") {
  auto line = test::parse("fn main() {\nentry:\n  x = add 1, 2\n  ret\n}\n");
  auto c1 = build_cfg(line.functions[0]);
  CHECK(c1.succs.size() == 1);
  CHECK(c1.succs[0].empty());

  auto d = test::parse(
      "fn main(n: i64 in 0..1) {\nb0:\n  v = add n, 1\n  c = cmp eq n, 0\n  br c, b1, b2\nb1:\n  jmp b3\n"
      "b2:\n  jmp b3\nb3:\n  u = add v, 2\n  ret\n}\n");
  const Function &fn = d.functions[0];
  auto cfg = build_cfg(fn);
  std::size_t edges = 0;
  for (const auto &s : cfg.succs) edges += s.size();
  CHECK(cfg.succs.size() == 4);
  CHECK(edges == 4);
  auto dom = build_dominators(cfg);
  CHECK(dom.dominates(0, 3));
  CHECK_FALSE(dom.dominates(1, 3));
  CHECK_FALSE(dom.dominates(2, 3));

  // The use of v in b3 reaches back to its single definition in b0.
  const Instr &use = fn.blocks[3].instrs[0];
  REQUIRE_FALSE(use.args[0].is_const);
  const ValueInfo &vi = fn.values[use.args[0].value];
  CHECK(vi.def_block == 0);
  CHECK(fn.blocks[0].instrs[vi.def_index].result == use.args[0].value);
}

namespace {

// a dominates b iff b is unreachable from the entry once a is removed.
bool dominates_oracle(const CfgInfo &cfg, BlockId a, BlockId b) {
  if (!cfg.reachable[a] || !cfg.reachable[b]) return false;
  if (a == b) return true;
  if (a == 0) return true;
  std::vector<bool> seen(cfg.succs.size(), false);
  std::queue<BlockId> q;
  q.push(0);
  seen[0] = true;
  while (!q.empty()) {
    BlockId x = q.front();
    q.pop();
    for (BlockId y : cfg.succs[x])
      if (y != a && !seen[y]) {
        seen[y] = true;
        q.push(y);
      }
  }
  return !seen[b];
}

std::string random_cfg(std::mt19937_64 &rng, int blocks) {
  std::string s = "fn main(n: i64 in 0..1) {\n";
  std::uniform_int_distribution<int> pick(0, blocks - 1);
  for (int b = 0; b < blocks; ++b) {
    s += "b" + std::to_string(b) + ":\n";
    int k = static_cast<int>(rng() % 4);
    if (k == 0) {
      s += "  ret\n";
    } else if (k == 1) {
      s += "  jmp b" + std::to_string(pick(rng)) + "\n";
    } else {
      s += "  c" + std::to_string(b) + " = cmp eq n, " + std::to_string(b) + "\n";
      s += "  br c" + std::to_string(b) + ", b" + std::to_string(pick(rng)) + ", b" + std::to_string(pick(rng)) + "\n";
    }
  }
  return s + "}\n";
}

} // namespace

TEST_CASE("dominators agree with removal-reachability on random graphs") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 300; ++i) {
    auto p = test::parse(random_cfg(rng, 2 + static_cast<int>(rng() % 9)));
    auto cfg = build_cfg(p.functions[0]);
    auto dom = build_dominators(cfg);
    for (BlockId a = 0; a < cfg.succs.size(); ++a)
      for (BlockId b = 0; b < cfg.succs.size(); ++b) {
        CAPTURE(a);
        CAPTURE(b);
        CHECK(dom.dominates(a, b) == dominates_oracle(cfg, a, b));
      }
  }
}

TEST_CASE("counted loops and execution counts") {
  auto p = test::parse(R"(fn work() {
entry:
  ret
}
fn main(n: i64 in 0..3) {
entry:
  jmp head
head:
  i = phi [entry: 0], [body: i2]
  c = cmp lt i, 3
  br c, body, exit
body:
  call work()
  i2 = add i, 1
  jmp head
exit:
  jmp h2
h2:
  j = phi [exit: 0], [b2: j2]
  d = cmp lt j, n
  br d, b2, out
b2:
  spawn work()
  j2 = add j, 1
  jmp h2
out:
  ret
}
)");
  auto ix = build_index(p);
  int main = p.find_function("main"), work = p.find_function("work");
  const auto &loops = ix.loops[main].loops;
  REQUIRE(loops.size() == 2);
  int counted = 0;
  for (const auto &L : loops)
    if (L.trip) {
      ++counted;
      CHECK(*L.trip == 3);
    }
  CHECK(counted == 1);
  CHECK(ix.exec_count[work] == kInfinite);  // spawned an unknown number of times
}
