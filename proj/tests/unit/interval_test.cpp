#include "uriah/interval.hpp"
#include "uriah/symexec.hpp"

#include <doctest.h>

#include <random>
#include <set>

using namespace uriah;
using hir::ArithOp;
using hir::CmpOp;

namespace {

std::set<std::int64_t> values(const Interval &iv) {
  std::set<std::int64_t> s;
  if (iv.is_empty()) return s;
  for (std::int64_t v = iv.lo;; v += iv.stride) {
    s.insert(v);
    if (v >= iv.hi) break;
  }
  return s;
}

Interval random_interval(std::mt19937_64 &rng) {
  std::uniform_int_distribution<int> d(-20, 20), st(1, 4);
  int a = d(rng), b = d(rng);
  if (a > b) std::swap(a, b);
  return Interval::strided(a, b, st(rng));
}

bool holds(const Interval &iv, const std::set<std::int64_t> &s) {
  for (auto v : s)
    if (!iv.contains(v)) return false;
  return true;
}

} // namespace

TEST_CASE("interval examples") {
  CHECK(Interval::of(4).add(Interval::of(3)) == Interval::of(7));
  auto m = Interval::of(2).join(Interval::of(5));
  CHECK(m.lo == 2);
  CHECK(m.hi == 5);
  CHECK(Interval::range(0, 10).meet(Interval::range(5, 20)) == Interval::range(5, 10));
  CHECK(Interval::range(1, 0).is_empty());
  CHECK(Interval::of(Interval::kMax).add(Interval::of(1)).is_top());
  CHECK(Interval::strided(0, 28, 4).width() == 8);
  CHECK(Interval::strided(0, 30, 4).hi == 28);
}

TEST_CASE("strided interval operations cover the concrete results") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 4000; ++i) {
    Interval a = random_interval(rng), b = random_interval(rng);
    auto va = values(a), vb = values(b);
    std::set<std::int64_t> sum, diff, prod, uni, both;
    for (auto x : va)
      for (auto y : vb) {
        sum.insert(x + y);
        diff.insert(x - y);
        prod.insert(x * y);
      }
    for (auto x : va) uni.insert(x);
    for (auto y : vb) uni.insert(y);
    for (auto x : va)
      if (vb.count(x)) both.insert(x);
    CAPTURE(a.str());
    CAPTURE(b.str());
    CHECK(holds(a.add(b), sum));
    CHECK(holds(a.sub(b), diff));
    CHECK(holds(a.mul(b), prod));
    CHECK(holds(a.join(b), uni));
    CHECK(holds(a.meet(b), both));
    // Joins of exact sets stay within their hull.
    CHECK(a.join(b).lo == *uni.begin());
    CHECK(a.join(b).hi == *uni.rbegin());
  }
}

namespace {

AbsInt random_abs(std::mt19937_64 &rng) {
  if (rng() % 3 == 0) return AbsInt::from(random_interval(rng)).join(AbsInt::of(static_cast<std::int64_t>(rng() % 50)));
  std::vector<std::int64_t> v;
  int n = 1 + static_cast<int>(rng() % 5);
  for (int i = 0; i < n; ++i) v.push_back(static_cast<std::int64_t>(rng() % 41) - 20);
  return AbsInt::set(v);
}

std::vector<std::int64_t> members(const AbsInt &a) {
  std::vector<std::int64_t> r;
  if (a.values()) return *a.values();
  Interval h = a.hull();
  for (std::int64_t v = h.lo; v <= h.hi; ++v)
    if (a.contains(v)) r.push_back(v);
  return r;
}

std::int64_t wrap_apply(ArithOp op, std::int64_t x, std::int64_t y) {
  auto ux = static_cast<std::uint64_t>(x), uy = static_cast<std::uint64_t>(y);
  switch (op) {
  case ArithOp::Add: return static_cast<std::int64_t>(ux + uy);
  case ArithOp::Sub: return static_cast<std::int64_t>(ux - uy);
  case ArithOp::Mul: return static_cast<std::int64_t>(ux * uy);
  case ArithOp::And: return x & y;
  case ArithOp::Or: return x | y;
  case ArithOp::Xor: return x ^ y;
  }
  return 0;
}

bool cmp_apply(CmpOp op, std::int64_t x, std::int64_t y) {
  switch (op) {
  case CmpOp::Eq: return x == y;
  case CmpOp::Ne: return x != y;
  case CmpOp::Lt: return x < y;
  case CmpOp::Le: return x <= y;
  case CmpOp::Gt: return x > y;
  case CmpOp::Ge: return x >= y;
  }
  return false;
}

} // namespace

TEST_CASE("abstract integers are sound for arithmetic, comparison and refinement") {
  std::mt19937_64 rng(9);
  const ArithOp ops[] = {ArithOp::Add, ArithOp::Sub, ArithOp::Mul, ArithOp::And, ArithOp::Or, ArithOp::Xor};
  const CmpOp cmps[] = {CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge};
  for (int i = 0; i < 1500; ++i) {
    AbsInt a = random_abs(rng), b = random_abs(rng);
    auto ma = members(a), mb = members(b);
    for (ArithOp op : ops) {
      AbsInt r = abs_arith(op, a, b);
      for (auto x : ma)
        for (auto y : mb) REQUIRE(r.contains(wrap_apply(op, x, y)));
    }
    for (CmpOp op : cmps) {
      AbsInt c = abs_cmp(op, a, b);
      AbsInt ra = refine(a, op, b);
      for (auto x : ma)
        for (auto y : mb) {
          bool t = cmp_apply(op, x, y);
          REQUIRE(c.contains(t ? 1 : 0));
          if (t) REQUIRE(ra.contains(x));
        }
      CHECK(negate(negate(op)) == op);
      for (auto x : ma)
        for (auto y : mb) CHECK(cmp_apply(swap_sides(op), y, x) == cmp_apply(op, x, y));
    }
    for (Prim p : {Prim::I8, Prim::I16, Prim::I32}) {
      AbsInt t = abs_truncate(a, p);
      for (auto x : ma) {
        std::int64_t w = p == Prim::I8 ? static_cast<std::int8_t>(x)
                         : p == Prim::I16 ? static_cast<std::int16_t>(x)
                                          : static_cast<std::int32_t>(x);
        REQUIRE(t.contains(w));
      }
    }
  }
}

TEST_CASE("abstract integer representation") {
  CHECK(AbsInt::from(Interval::range(0, 15)).values() != nullptr);
  CHECK(AbsInt::from(Interval::range(0, 16)).values() == nullptr);
  CHECK(AbsInt::from(Interval::strided(0, 60, 4)).values()->size() == 16);
  AbsInt s = AbsInt::set({3, 1, 3, 2});
  CHECK(*s.values() == std::vector<std::int64_t>{1, 2, 3});
  CHECK(s.without(2) == AbsInt::set({1, 3}));
  CHECK(AbsInt::top().contains(Interval::kMin));
}
