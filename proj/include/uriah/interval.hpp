//===- interval.hpp - Strided int64 intervals -------------------*- C++ -*-===//
//
// The values lo, lo + stride, ..., hi.  Arithmetic saturates to top (the
// full int64 range, stride 1) whenever an endpoint would overflow; concrete
// execution wraps, so a wrapped result is always inside top.
//
//===----------------------------------------------------------------------===//
#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <string>

namespace uriah {

struct Interval {
  static constexpr std::int64_t kMin = std::numeric_limits<std::int64_t>::min();
  static constexpr std::int64_t kMax = std::numeric_limits<std::int64_t>::max();

  std::int64_t lo = 1;
  std::int64_t hi = 0;       // lo > hi: empty
  std::int64_t stride = 1;   // >= 1; hi - lo is a multiple of it

  static Interval empty() { return {}; }
  static Interval top() { return {kMin, kMax}; }
  static Interval of(std::int64_t v) { return {v, v}; }
  static Interval range(std::int64_t a, std::int64_t b) { return {a, b}; }
  /// Values of [a, b] congruent to a modulo s (s <= 0 means 1).
  static Interval strided(std::int64_t a, std::int64_t b, __int128 s) {
    if (a > b) return empty();
    if (s <= 1 || s > kMax || a == b) return {a, b};
    auto st = static_cast<std::int64_t>(s);
    __int128 span = static_cast<__int128>(b) - a;
    return {a, static_cast<std::int64_t>(a + span / st * st), st};
  }

  /// 0 for singletons, else the stride: the gcd identity for combining.
  std::int64_t step() const { return lo == hi ? 0 : stride; }

  bool is_empty() const { return lo > hi; }
  bool is_top() const { return lo == kMin && hi == kMax; }
  bool is_singleton() const { return lo == hi; }
  bool contains(std::int64_t v) const {
    return lo <= v && v <= hi && (static_cast<__int128>(v) - lo) % stride == 0;
  }
  bool within(std::int64_t a, std::int64_t b) const {
    return is_empty() || (a <= lo && hi <= b);
  }
  /// Number of values, saturating at uint64 max.
  std::uint64_t width() const {
    if (is_empty()) return 0;
    unsigned __int128 w = static_cast<unsigned __int128>(static_cast<__int128>(hi) - lo) / stride + 1;
    return w > std::numeric_limits<std::uint64_t>::max()
               ? std::numeric_limits<std::uint64_t>::max()
               : static_cast<std::uint64_t>(w);
  }

  bool operator==(const Interval &o) const {
    if (is_empty() || o.is_empty()) return is_empty() && o.is_empty();
    return lo == o.lo && hi == o.hi && step() == o.step();
  }

  static unsigned __int128 gcd128(unsigned __int128 a, unsigned __int128 b) {
    while (b) {
      unsigned __int128 t = a % b;
      a = b;
      b = t;
    }
    return a;
  }
  static unsigned __int128 mag(__int128 v) { return static_cast<unsigned __int128>(v < 0 ? -v : v); }

  Interval join(const Interval &o) const {
    if (is_empty()) return o;
    if (o.is_empty()) return *this;
    auto g = gcd128(gcd128(static_cast<unsigned __int128>(step()), static_cast<unsigned __int128>(o.step())),
                    mag(static_cast<__int128>(lo) - o.lo));
    return strided(std::min(lo, o.lo), std::max(hi, o.hi), static_cast<__int128>(g));
  }
  /// Over-approximates the intersection, keeping the larger stride.
  Interval meet(const Interval &o) const {
    if (is_empty() || o.is_empty()) return empty();
    const Interval &s = step() >= o.step() ? *this : o;
    __int128 a = std::max(lo, o.lo), b = std::min(hi, o.hi);
    if (a > b) return empty();
    if (s.step() > 1) {
      __int128 r = (static_cast<__int128>(s.lo) - a) % s.stride;
      if (r < 0) r += s.stride;
      a += r;
      if (a > b) return empty();
    }
    return strided(static_cast<std::int64_t>(a), static_cast<std::int64_t>(b), s.step());
  }

  static Interval from128(__int128 a, __int128 b, unsigned __int128 s = 1) {
    if (a < kMin || b > kMax) return top();
    return strided(static_cast<std::int64_t>(a), static_cast<std::int64_t>(b),
                   s > static_cast<unsigned __int128>(kMax) ? 1 : static_cast<__int128>(s));
  }

  Interval add(const Interval &o) const {
    if (is_empty() || o.is_empty()) return empty();
    return from128(static_cast<__int128>(lo) + o.lo, static_cast<__int128>(hi) + o.hi,
                   gcd128(static_cast<unsigned __int128>(step()), static_cast<unsigned __int128>(o.step())));
  }
  Interval sub(const Interval &o) const {
    if (is_empty() || o.is_empty()) return empty();
    return from128(static_cast<__int128>(lo) - o.hi, static_cast<__int128>(hi) - o.lo,
                   gcd128(static_cast<unsigned __int128>(step()), static_cast<unsigned __int128>(o.step())));
  }
  Interval mul(const Interval &o) const {
    if (is_empty() || o.is_empty()) return empty();
    __int128 c[4] = {static_cast<__int128>(lo) * o.lo, static_cast<__int128>(lo) * o.hi,
                     static_cast<__int128>(hi) * o.lo, static_cast<__int128>(hi) * o.hi};
    // (lo + i*s)(o.lo + j*t) - lo*o.lo is a multiple of gcd(lo*t, o.lo*s, s*t).
    unsigned __int128 s = static_cast<unsigned __int128>(step()), t = static_cast<unsigned __int128>(o.step());
    unsigned __int128 g = gcd128(gcd128(mag(lo) * t, mag(o.lo) * s), s * t);
    return from128(*std::min_element(c, c + 4), *std::max_element(c, c + 4), g);
  }

  std::string str() const {
    if (is_empty()) return "[]";
    auto f = [](std::int64_t v) {
      if (v == kMin) return std::string("-inf");
      if (v == kMax) return std::string("+inf");
      return std::to_string(v);
    };
    std::string r = "[" + f(lo) + "," + f(hi) + "]";
    if (step() > 1) r += "/" + std::to_string(stride);
    return r;
  }
};

} // namespace uriah
