#include "support.hpp"

#include "uriah/layout.hpp"

#include <doctest.h>

using namespace uriah;
using test::compound_field;
using test::prim_field;

namespace {

std::vector<std::pair<std::uint64_t, Prim>> flat_pairs(const AllocatedType &t) {
  std::vector<std::pair<std::uint64_t, Prim>> r;
  for (const auto &e : t.flat()) r.push_back({e.offset, e.prim});
  return r;
}

// Prefix rule written out directly over the independent flattening.
bool prefix_oracle(const AllocatedType &tn, const AllocatedType &t) {
  auto a = test::flat_of(tn), b = test::flat_of(t);
  return b.size() <= a.size() && std::equal(b.begin(), b.end(), a.begin());
}

} // namespace

TEST_CASE("packed layouts") {
  auto xy = make_type("xy", {prim_field("x", Prim::I32), prim_field("y", Prim::I64)});
  CHECK(xy->total_size == 12);
  CHECK(flat_pairs(*xy) == std::vector<std::pair<std::uint64_t, Prim>>{{0, Prim::I32}, {4, Prim::I64}});

  auto inner = make_type("in", {prim_field("x", Prim::I32)});
  auto outer = make_type("out", {compound_field("a", inner), prim_field("b", Prim::I8)});
  CHECK(outer->total_size == 5);
  CHECK(flat_pairs(*outer) == std::vector<std::pair<std::uint64_t, Prim>>{{0, Prim::I32}, {4, Prim::I8}});

  auto r = make_type("r", {prim_field("p", Prim::Ref)});
  CHECK(r->total_size == 8);
  CHECK(flat_pairs(*r) == std::vector<std::pair<std::uint64_t, Prim>>{{0, Prim::Ref}});
}

TEST_CASE("flattening agrees with an independent walk") {
  test::TypeGen g(7);
  for (int i = 0; i < 2000; ++i) {
    auto t = g.type(3);
    REQUIRE(flat_pairs(*t) == test::flat_of(*t));
    auto f = test::flat_of(*t);
    std::uint64_t end = f.empty() ? 0 : f.back().first + prim_size(f.back().second);
    CHECK(end == t->total_size);
  }
}

TEST_CASE("cast compatibility examples") {
  auto i32 = make_type("a", {prim_field("x", Prim::I32)});
  auto i32i64 = make_type("b", {prim_field("x", Prim::I32), prim_field("y", Prim::I64)});
  CHECK(is_compatible_cast(*i32, *i32));
  CHECK(is_compatible_cast(*i32i64, *i32));   // upcast to a prefix
  CHECK_FALSE(is_compatible_cast(*i32, *i32i64));  // downcast

  // T's fields appear in TN without T being a member of TN.
  auto t = make_type("tiny", {prim_field("x", Prim::I32), prim_field("y", Prim::I32)});
  auto tn = make_type("huge", {prim_field("x", Prim::I32), prim_field("y", Prim::I32), prim_field("p", Prim::Ref)});
  CHECK(is_compatible_cast(*tn, *t));
}

TEST_CASE("cast compatibility matches the prefix rule on random pairs") {
  test::TypeGen g(11);
  for (int i = 0; i < 3000; ++i) {
    auto a = g.type();
    auto b = g.roll(2) ? g.extend(a) : g.type();
    CHECK(is_compatible_cast(*b, *a) == prefix_oracle(*b, *a));
    CHECK(is_compatible_cast(*a, *b) == prefix_oracle(*a, *b));
  }
}

TEST_CASE("view at an interior offset") {
  auto pt = make_type("pt", {prim_field("x", Prim::I32), prim_field("y", Prim::I32)});
  auto box = make_type("box", {prim_field("id", Prim::I64), compound_field("lo", pt), compound_field("hi", pt)});
  CHECK(is_compatible_at(*box, *pt, 8));
  CHECK(is_compatible_at(*box, *pt, 16));
  CHECK_FALSE(is_compatible_at(*box, *pt, 4));
  CHECK_FALSE(is_compatible_at(*box, *pt, 20));
}

TEST_CASE("realloc type transitions") {
  auto small = make_type("v", {prim_field("n", Prim::I32), prim_field("d", Prim::I8, 8, true)});
  auto grown = make_type("v", {prim_field("n", Prim::I32), prim_field("d", Prim::I8, 16, true)});
  CHECK(realloc_type_transition(small, grown).has_value());

  auto appended = make_type("v2", {prim_field("n", Prim::I32), prim_field("d", Prim::I8, 8, true),
                                   prim_field("e", Prim::I64)});
  CHECK(realloc_type_transition(small, appended).has_value());

  auto inserted = make_type("v3", {prim_field("z", Prim::I64), prim_field("n", Prim::I32),
                                   prim_field("d", Prim::I8, 8, true)});
  CHECK_FALSE(realloc_type_transition(small, inserted).has_value());

  // Byte-size transitions: whole trailing elements only.
  auto by_size = realloc_type_transition(small, std::uint64_t{20});
  REQUIRE(by_size.has_value());
  CHECK((*by_size)->total_size == 20);
  CHECK(realloc_type_transition(small, std::uint64_t{12}).has_value());
  CHECK_FALSE(realloc_type_transition(small, std::uint64_t{8}).has_value());

  auto ints = make_prim_type(Prim::I32, 2, true);
  CHECK(realloc_type_transition(ints, std::uint64_t{16}).has_value());
  CHECK_FALSE(realloc_type_transition(ints, std::uint64_t{14}).has_value());
}

TEST_CASE("pool hash is FNV-1a of the canonical form") {
  auto a = make_type("P", {prim_field("a", Prim::I32), prim_field("b", Prim::I32)});
  auto same = make_type("P", {prim_field("a", Prim::I32), prim_field("b", Prim::I32)});
  auto c = make_type("P", {prim_field("a", Prim::I64)});
  CHECK(a->canonical() == "8|P|a:0:4:i32;b:4:4:i32;");
  CHECK(a->hash() == same->hash());
  CHECK(a->hash() != c->hash());
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
}
