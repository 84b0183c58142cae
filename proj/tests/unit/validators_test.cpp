#include "support.hpp"

#include "uriah/classifier.hpp"
#include "uriah/shared.hpp"
#include "uriah/spatial.hpp"
#include "uriah/typecheck.hpp"

#include <doctest.h>

using namespace uriah;
using namespace uriah::hir;

namespace {

struct Classified {
  Program p;
  Report r;
  explicit Classified(std::string_view text, ClassifierConfig cfg = {}) : p(test::parse(text)) {
    cfg.symexec = false;
    r = classify_all(p, cfg);
  }
  bool safe(int site) const { return r.site(site).verdict == Verdict::Safe; }
  bool reason(int site, const std::string &code) const { return test::has_reason(p, r, site, code); }
};

} // namespace

// ---- spatial ---------------------------------------------------------------

TEST_CASE("constant indices inside a 10-byte buffer") {
  Classified c("fn main() {\nentry:\n  b = alloc 10\n  store i8 b, 1\n  e = gep b, 9\n  store i8 e, 2\n  ret\n}\n");
  CHECK(c.safe(0));
}

TEST_CASE("runtime allocation size") {
  Classified c("fn main(n: i64 in 1..4) {\nentry:\n  b = alloc n\n  ret\n}\n");
  CHECK_FALSE(c.safe(0));
  CHECK(c.reason(0, "non-constant-size"));
}

TEST_CASE("negative offset") {
  Classified c("fn main() {\nentry:\n  b = alloc 8\n  m = gep b, -4\n  store i8 m, 1\n  ret\n}\n");
  CHECK(c.reason(0, "negative-offset"));
}

TEST_CASE("loop with an input trip count over a 4-byte buffer") {
  const char *text = R"(fn main(n: i64 in 0..7) {
entry:
  b = alloc 4
  jmp head
head:
  i = phi [entry: 0], [body: i2]
  c = cmp lt i, n
  br c, body, exit
body:
  p = gep b, i
  store i8 p, 1
  i2 = add i, 1
  jmp head
exit:
  ret
}
)";
  Classified c(text);
  CHECK(c.reason(0, "non-constant-offset"));
  auto o = run_oracle(c.p);
  CHECK(o.violates(0));  // some input walks past byte 3
}

TEST_CASE("realloc rules") {
  SUBCASE("grow then use the new tail") {
    Classified c("fn main() {\nentry:\n  b = alloc 10\n  r = realloc b, 16\n  e = gep r, 12\n  store i8 e, 1\n  ret\n}\n");
    CHECK(c.safe(0));
    CHECK(run_oracle(c.p).findings.empty());
  }
  SUBCASE("shrink") {
    Classified c("fn main() {\nentry:\n  b = alloc 16\n  r = realloc b, 10\n  ret\n}\n");
    CHECK(c.reason(0, "realloc-shrink"));
  }
  SUBCASE("same size") {
    Classified c("fn main() {\nentry:\n  b = alloc 10\n  r = realloc b, 10\n  e = gep r, 9\n  store i8 e, 1\n  ret\n}\n");
    CHECK(c.safe(0));
  }
  SUBCASE("the state machine") {
    SpatialState st;
    st.size[-1] = Interval::of(10);
    ReallocEvent grow{{}, -1, 5, Interval::of(0), Interval::of(16), nullptr};
    CHECK_FALSE(apply_realloc_rule(st, grow).has_value());
    CHECK(st.size[5] == Interval::of(16));
    ReallocEvent same{{}, 5, 6, Interval::of(0), Interval::of(16), nullptr};
    CHECK_FALSE(apply_realloc_rule(st, same).has_value());
    ReallocEvent shrink{{}, 6, 7, Interval::of(0), Interval::of(10), nullptr};
    CHECK(apply_realloc_rule(st, shrink) == std::optional<std::string>("realloc-shrink"));
    ReallocEvent var{{}, 6, 8, Interval::of(0), Interval::range(1, 40), nullptr};
    CHECK(apply_realloc_rule(st, var) == std::optional<std::string>("realloc-variable"));
  }
}

TEST_CASE("index ranges") {
  CHECK(eval_index_range(Interval::of(4), Interval::of(3)) == Interval::of(7));
  // A guarded input stays unbounded without path exploration.
  auto p = test::parse(R"(fn main(n: i64 in 0..15) {
entry:
  c = cmp lt n, 4
  br c, ok, done
ok:
  x = assign n
  jmp done
done:
  ret
}
)");
  auto ix = build_index(p);
  auto ints = compute_int_ranges(p, ix);
  const Function &fn = p.functions[p.entry];
  for (ValueId v = 0; v < fn.values.size(); ++v)
    if (fn.values[v].name == "x") CHECK(ints.val[p.entry][v] == Interval::top());
}

TEST_CASE("test-only mutations of the spatial checks") {
  SUBCASE("lower bound") {
    const char *text = "fn main() {\nentry:\n  b = alloc 8\n  m = gep b, -1\n  store i8 m, 1\n  ret\n}\n";
    ClassifierConfig mutated;
    mutated.spatial.skip_lower_bound = true;
    Classified plain(text), mut(text, mutated);
    CHECK(plain.reason(0, "negative-offset"));
    CHECK_FALSE(mut.reason(0, "negative-offset"));
    CHECK_FALSE(mut.reason(0, "index-out-of-bounds"));
    CHECK(mut.reason(0, "access-type-mismatch"));  // still caught by the layout check
  }
  SUBCASE("interior free") {
    const char *text = "fn main() {\nentry:\n  b = alloc 8\n  m = gep b, 4\n  free m\n  ret\n}\n";
    ClassifierConfig mutated;
    mutated.spatial.skip_free_check = true;
    CHECK(Classified(text).reason(0, "invalid-free"));
    CHECK(Classified(text, mutated).safe(0));
  }
}

// ---- typecheck -------------------------------------------------------------

TEST_CASE("integer casts") {
  CHECK(validate_int_cast(Interval::range(0, 100), Prim::I64, Prim::I8));
  CHECK_FALSE(validate_int_cast(Interval::range(0, 300), Prim::I64, Prim::I8));
  CHECK_FALSE(validate_int_cast(Interval::top(), Prim::I64, Prim::I32));
  CHECK(validate_int_cast(Interval::range(-128, 127), Prim::I16, Prim::I8));
}

TEST_CASE("delayed typing") {
  SUBCASE("one view") {
    Classified c(R"(type W = { a: i32, b: i64 }
fn main() {
entry:
  raw = alloc 12
  call nop()
  w = cast raw, W
  b = gep w, 4
  store i64 b, 1
  ret
}
fn nop() {
entry:
  ret
}
)");
    CHECK(c.safe(0));
    REQUIRE(c.r.site(0).type);
    CHECK(c.r.site(0).type->tag == "W");
    CHECK(run_oracle(c.p).findings.empty());
  }
  SUBCASE("two incompatible views on different paths") {
    Classified c(R"(type W = { a: i32, b: i64 }
type V = { a: i64, b: i32 }
fn main(n: i64 in 0..1) {
entry:
  raw = alloc 12
  t = cmp eq n, 0
  br t, l, r
l:
  w = cast raw, W
  jmp d
r:
  v = cast raw, V
  jmp d
d:
  ret
}
)");
    CHECK(c.reason(0, "delayed-type"));
  }
  SUBCASE("cast right after the allocation is folded into it") {
    auto p = test::parse("type W = { a: i32, b: i64 }\nfn main() {\nentry:\n  raw = alloc 12\n  w = cast raw, W\n  ret\n}\n");
    CHECK(p.sites[0].declared);
    CHECK(p.functions[0].blocks[0].instrs[1].elided);
  }
}

TEST_CASE("cast validation over a site") {
  const char *base = R"(type Small = { x: i32 }
type Big = { x: i32, y: i64 }
fn main() {
entry:
  b = alloc Big
  s = cast b, Small
  %s
  ret
}
)";
  auto with = [&](const char *extra) {
    char buf[512];
    std::snprintf(buf, sizeof buf, base, extra);
    return std::string(buf);
  };
  CHECK(Classified(with("")).safe(0));                      // upcast only
  CHECK(Classified(with("t = cast b, Big")).safe(0));       // plus an identical cast
  Classified down(with("u = cast s, Big"));                 // back down through the narrow view
  CHECK(down.reason(0, "incompatible-cast"));
}

// ---- shared ----------------------------------------------------------------

namespace {

struct SharedInfo {
  Program p;
  ProgramIndex ix;
  AliasResult a;
  RegionInfo regions;
  explicit SharedInfo(std::string_view text)
      : p(test::parse(text)), ix(build_index(p)), a(compute_points_to(p, ix)), regions(compute_regions(p, ix, a)) {}
  std::map<int, SharedFlag> flags() const { return find_shared_objects(p, ix, a, regions); }
};

std::string accum_program(int size) {
  return R"(type Holder = { cur: ref }
fn bump3(h: ref) {
entry:
  c = load ref h
  d = gep c, 3
  store ref h, d
  store i8 d, 3
  ret
}
fn bump5(h: ref) {
entry:
  c = load ref h
  d = gep c, 5
  store ref h, d
  store i8 d, 5
  ret
}
fn main() {
entry:
  buf = alloc )" + std::to_string(size) + R"(
  h = alloc Holder
  store ref h, buf
  spawn bump3(h)
  spawn bump5(h)
  ret
}
)";
}

} // namespace

TEST_CASE("sharing evidence") {
  SUBCASE("spawn argument") {
    SharedInfo s("fn w(p: ref) {\nentry:\n  ret\n}\nfn main() {\nentry:\n  b = alloc 4\n  spawn w(b)\n  ret\n}\n");
    auto f = s.flags();
    CHECK(f[0].shared);
    CHECK(f[0].evidence == "spawn-argument");
  }
  SUBCASE("thread-local") {
    SharedInfo s("fn main() {\nentry:\n  b = alloc 4\n  c = assign b\n  ret\n}\n");
    CHECK_FALSE(s.flags()[0].shared);
  }
  SUBCASE("through a global read in the spawned function") {
    const char *text = R"(global g: ref
fn w() {
entry:
  a = gaddr g
  p = load ref a
  store i8 p, 1
  ret
}
fn main() {
entry:
  b = alloc 4
  a = gaddr g
  store ref a, b
  spawn w()
  store i8 b, 2
  ret
}
)";
    SharedInfo s(text);
    auto f = s.flags();
    CHECK(f[0].shared);
    CHECK(f[0].evidence == "global-alias");
    // Two threads really do touch it: interleavings that run the worker
    // first read the global before main stores to it and trap on null, the
    // rest write the object from both threads.
    auto o = run_oracle(s.p);
    CHECK(o.executions > 1);
  }
}

TEST_CASE("thread counts") {
  auto count = [](const char *text) {
    SharedInfo s(text);
    return thread_count(s.p, s.ix, s.a, 0).count;
  };
  const char *two = "fn w(p: ref) {\nentry:\n  store i8 p, 1\n  ret\n}\nfn main() {\nentry:\n  b = alloc 4\n"
                    "  spawn w(b)\n  spawn w(b)\n  ret\n}\n";
  CHECK(count(two) == std::optional<Count>(2));
  const char *loop3 = R"(fn w(p: ref) {
entry:
  store i8 p, 1
  ret
}
fn main() {
entry:
  b = alloc 4
  jmp h
h:
  i = phi [entry: 0], [body: i2]
  c = cmp lt i, 3
  br c, body, out
body:
  spawn w(b)
  i2 = add i, 1
  jmp h
out:
  ret
}
)";
  CHECK(count(loop3) == std::optional<Count>(3));
  std::string runtime = loop3;
  runtime.replace(runtime.find("fn main()"), 9, "fn main(k: i64 in 0..3)");
  runtime.replace(runtime.find("cmp lt i, 3"), 11, "cmp lt i, k");
  CHECK_FALSE(count(runtime.c_str()).has_value());
}

TEST_CASE("accumulated index across two threads") {
  for (int size : {8, 9}) {
    SharedInfo s(accum_program(size));
    auto ints = compute_int_ranges(s.p, s.ix);
    auto idx = compute_index_ranges(s.p, s.ix, s.a, ints);
    auto events = collect_static_events(s.p, s.ix, s.a, ints, idx);
    auto flags = s.flags();
    auto v = validate_shared(s.p, events.sites[0], flags[0], thread_count(s.p, s.ix, s.a, 0), s.a, idx);
    REQUIRE(v.accumulated.has_value());
    CHECK(*v.accumulated == 8);
    bool oob = std::any_of(v.reasons.begin(), v.reasons.end(),
                           [](const Reason &r) { return r.code == "accumulated-index-out-of-bounds"; });
    CHECK(oob == (size == 8));
  }
}
