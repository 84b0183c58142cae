#include "uriah/symexec.hpp"

#include "uriah/ranges.hpp"

#include <algorithm>

namespace uriah {

using namespace hir;

namespace {

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

// Smallest 2^k - 1 covering v (v >= 0).
std::int64_t ones_above(std::int64_t v) {
  std::int64_t m = 0;
  while (m < v) m = (m << 1) | 1;
  return m;
}

// Smallest strided interval holding sorted `vals`.
Interval set_hull(const std::vector<std::int64_t> &vals) {
  Interval r = Interval::empty();
  for (auto v : vals) r = r.join(Interval::of(v));
  return r;
}

} // namespace

AbsInt AbsInt::from(const Interval &iv) {
  AbsInt r;
  if (!iv.is_empty() && iv.width() <= kMaxSet) {
    for (std::int64_t v = iv.lo;; v += iv.stride) {
      r.vals_.push_back(v);
      if (v == iv.hi) break;
    }
    return r;
  }
  if (iv.is_empty()) return r;
  r.is_set_ = false;
  r.iv_ = iv;
  return r;
}

AbsInt AbsInt::set(std::vector<std::int64_t> vals) {
  std::sort(vals.begin(), vals.end());
  vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
  if (vals.size() <= kMaxSet) {
    AbsInt r;
    r.vals_ = std::move(vals);
    return r;
  }
  AbsInt r;
  r.is_set_ = false;
  r.iv_ = set_hull(vals);
  return r;
}

bool AbsInt::is_singleton() const { return is_set_ ? vals_.size() == 1 : iv_.is_singleton(); }

bool AbsInt::contains(std::int64_t v) const {
  return is_set_ ? std::binary_search(vals_.begin(), vals_.end(), v) : iv_.contains(v);
}

Interval AbsInt::hull() const {
  if (!is_set_) return iv_;
  return set_hull(vals_);
}

AbsInt AbsInt::join(const AbsInt &o) const {
  if (is_set_ && o.is_set_) {
    std::vector<std::int64_t> v = vals_;
    v.insert(v.end(), o.vals_.begin(), o.vals_.end());
    return set(std::move(v));
  }
  return from(hull().join(o.hull()));
}

AbsInt AbsInt::meet(const Interval &iv) const {
  if (!is_set_) return from(iv_.meet(iv));
  std::vector<std::int64_t> v;
  for (auto x : vals_)
    if (iv.contains(x)) v.push_back(x);
  return set(std::move(v));
}

AbsInt AbsInt::meet(const AbsInt &o) const {
  if (!o.is_set_) return meet(o.iv_);
  std::vector<std::int64_t> v;
  for (auto x : o.vals_)
    if (contains(x)) v.push_back(x);
  return set(std::move(v));
}

AbsInt AbsInt::without(std::int64_t v) const {
  if (is_set_) {
    std::vector<std::int64_t> r;
    for (auto x : vals_)
      if (x != v) r.push_back(x);
    return set(std::move(r));
  }
  Interval iv = iv_;
  if (iv.lo == v) iv = Interval::strided(iv.lo + iv.stride, iv.hi, iv.stride);
  else if (iv.hi == v) iv = Interval::strided(iv.lo, iv.hi - iv.stride, iv.stride);
  return from(iv);
}

bool AbsInt::operator==(const AbsInt &o) const {
  if (is_set_ != o.is_set_) return false;
  return is_set_ ? vals_ == o.vals_ : iv_ == o.iv_;
}

std::string AbsInt::str() const {
  if (!is_set_) return iv_.str();
  std::string s = "{";
  for (std::size_t i = 0; i < vals_.size(); ++i) s += (i ? "," : "") + std::to_string(vals_[i]);
  return s + "}";
}

AbsInt abs_arith(ArithOp op, const AbsInt &a, const AbsInt &b) {
  if (a.is_empty() || b.is_empty()) return {};
  if (a.values() && b.values() && a.values()->size() * b.values()->size() <= 256) {
    std::vector<std::int64_t> out;
    for (auto x : *a.values())
      for (auto y : *b.values()) out.push_back(wrap(op, x, y));
    return AbsInt::set(std::move(out));
  }
  Interval x = a.hull(), y = b.hull();
  switch (op) {
  case ArithOp::Add: return AbsInt::from(x.add(y));
  case ArithOp::Sub: return AbsInt::from(x.sub(y));
  case ArithOp::Mul: return AbsInt::from(x.mul(y));
  case ArithOp::And:
    if (x.lo >= 0 && y.lo >= 0) return AbsInt::from(Interval::range(0, std::min(x.hi, y.hi)));
    if (x.lo >= 0) return AbsInt::from(Interval::range(0, x.hi));
    if (y.lo >= 0) return AbsInt::from(Interval::range(0, y.hi));
    return AbsInt::top();
  case ArithOp::Or:
  case ArithOp::Xor:
    if (x.lo >= 0 && y.lo >= 0) return AbsInt::from(Interval::range(0, ones_above(std::max(x.hi, y.hi))));
    return AbsInt::top();
  }
  return AbsInt::top();
}

AbsInt abs_cmp(CmpOp op, const AbsInt &a, const AbsInt &b) {
  if (a.is_empty() || b.is_empty()) return {};
  bool can_true = !refine(a, op, b).is_empty();
  bool can_false = !refine(a, negate(op), b).is_empty();
  std::vector<std::int64_t> r;
  if (can_false) r.push_back(0);
  if (can_true) r.push_back(1);
  return AbsInt::set(r);
}

AbsInt abs_truncate(const AbsInt &a, Prim to) {
  Interval full = full_range(to);
  if (const auto *vals = a.values()) {
    std::vector<std::int64_t> out;
    for (auto v : *vals) {
      switch (to) {
      case Prim::I8: out.push_back(static_cast<std::int8_t>(v)); break;
      case Prim::I16: out.push_back(static_cast<std::int16_t>(v)); break;
      case Prim::I32: out.push_back(static_cast<std::int32_t>(v)); break;
      default: out.push_back(v);
      }
    }
    return AbsInt::set(std::move(out));
  }
  if (a.hull().within(full.lo, full.hi)) return a;
  return AbsInt::from(full);
}

CmpOp negate(CmpOp op) {
  switch (op) {
  case CmpOp::Eq: return CmpOp::Ne;
  case CmpOp::Ne: return CmpOp::Eq;
  case CmpOp::Lt: return CmpOp::Ge;
  case CmpOp::Le: return CmpOp::Gt;
  case CmpOp::Gt: return CmpOp::Le;
  case CmpOp::Ge: return CmpOp::Lt;
  }
  return op;
}

CmpOp swap_sides(CmpOp op) {
  switch (op) {
  case CmpOp::Lt: return CmpOp::Gt;
  case CmpOp::Le: return CmpOp::Ge;
  case CmpOp::Gt: return CmpOp::Lt;
  case CmpOp::Ge: return CmpOp::Le;
  default: return op;
  }
}

AbsInt refine(const AbsInt &a, CmpOp op, const AbsInt &b) {
  if (a.is_empty() || b.is_empty()) return {};
  if (a.values() && b.values()) {
    std::vector<std::int64_t> keep;
    for (auto x : *a.values())
      for (auto y : *b.values())
        if (holds(op, x, y)) {
          keep.push_back(x);
          break;
        }
    return AbsInt::set(std::move(keep));
  }
  Interval h = b.hull();
  switch (op) {
  case CmpOp::Eq: return a.meet(b);
  case CmpOp::Ne: return b.is_singleton() ? a.without(h.lo) : a;
  case CmpOp::Lt:
    if (h.hi == Interval::kMin) return {};
    return a.meet(Interval::range(Interval::kMin, h.hi - 1));
  case CmpOp::Le: return a.meet(Interval::range(Interval::kMin, h.hi));
  case CmpOp::Gt:
    if (h.lo == Interval::kMax) return {};
    return a.meet(Interval::range(h.lo + 1, Interval::kMax));
  case CmpOp::Ge: return a.meet(Interval::range(h.lo, Interval::kMax));
  }
  return a;
}

} // namespace uriah
