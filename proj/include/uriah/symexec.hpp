//===- symexec.hpp - Bounded path exploration -------------------*- C++ -*-===//
//
// Integers are tracked as a small finite set (up to 16 values) or an
// interval.  Branches fork the path and narrow the compared values; a path
// whose values become empty is dropped.  Loops are unrolled and calls
// inlined up to a budget; running out of budget gives up rather than
// approximating.
//
//===----------------------------------------------------------------------===//
#pragma once

#include "uriah/events.hpp"

#include <string>
#include <vector>

namespace uriah {

struct ExplorationBudget {
  int depth = 4;              // nested calls below the starting function
  int unroll = 2;             // loop iterations per activation
  std::uint64_t paths = 4096;
};

/// Set of possible int64 values: explicit when small, else an interval.
class AbsInt {
public:
  static constexpr std::size_t kMaxSet = 16;

  AbsInt() = default;  // empty
  static AbsInt top() { return from(Interval::top()); }
  static AbsInt of(std::int64_t v) { return from(Interval::of(v)); }
  static AbsInt from(const Interval &iv);
  static AbsInt set(std::vector<std::int64_t> vals);

  bool is_empty() const { return is_set_ ? vals_.empty() : iv_.is_empty(); }
  bool is_singleton() const;
  bool contains(std::int64_t v) const;
  Interval hull() const;
  /// Explicit values, when the set is small.
  const std::vector<std::int64_t> *values() const { return is_set_ ? &vals_ : nullptr; }

  AbsInt join(const AbsInt &o) const;
  AbsInt meet(const AbsInt &o) const;
  AbsInt meet(const Interval &iv) const;
  AbsInt without(std::int64_t v) const;
  bool operator==(const AbsInt &o) const;
  std::string str() const;

private:
  bool is_set_ = true;
  std::vector<std::int64_t> vals_;
  Interval iv_;
};

/// Wrapping two's-complement arithmetic.
AbsInt abs_arith(hir::ArithOp op, const AbsInt &a, const AbsInt &b);
/// {0}, {1} or {0,1}.
AbsInt abs_cmp(hir::CmpOp op, const AbsInt &a, const AbsInt &b);
AbsInt abs_truncate(const AbsInt &a, Prim to);
/// Values of `a` for which `a op x` holds for some x in `b`.
AbsInt refine(const AbsInt &a, hir::CmpOp op, const AbsInt &b);
hir::CmpOp negate(hir::CmpOp op);
hir::CmpOp swap_sides(hir::CmpOp op);

struct Term {
  bool is_const = false;
  int var = -1;
  std::int64_t constant = 0;
  static Term v(int id) { return {false, id, 0}; }
  static Term c(std::int64_t k) { return {true, -1, k}; }
};

/// One definition along a path.  Every dynamic definition gets its own
/// variable, so a loop iteration never overwrites an earlier one.
struct PathDef {
  enum Kind { Copy, Arith, Truncate, Unknown } kind = Unknown;
  int var = -1;
  hir::ArithOp arith = hir::ArithOp::Add;
  Term a, b;
  Prim prim = Prim::I64;  // Truncate target; Unknown width
};

struct PathAtom {
  Term lhs;
  hir::CmpOp op;
  Term rhs;
};

/// Conjunction of comparisons over the path's variables, plus the
/// arithmetic that relates them.
struct PathCondition {
  std::vector<hir::BlockId> blocks;  // in the starting function
  std::vector<std::string> names;    // per variable
  std::vector<PathDef> defs;
  std::vector<PathAtom> atoms;

  int new_var(std::string name);
  int var(std::string name);  // existing or new
  void unknown(int v, Prim width = Prim::I64);
  void constant(int v, std::int64_t k);
  void add_atom(Term l, hir::CmpOp op, Term r) { atoms.push_back({l, op, r}); }
  std::string str() const;
};

/// False iff interval propagation empties some variable.
bool is_feasible(const PathCondition &pc);

struct PathSet {
  bool exhausted = false;
  std::string why;
  std::vector<PathCondition> paths;
};

/// Every path inside `fn` from the entry of block `from` to the entry of
/// block `to`, with calls inlined.  Integer parameters are unconstrained.
PathSet enumerate_paths(const hir::Program &p, int fn, hir::BlockId from, hir::BlockId to,
                        const ExplorationBudget &budget = {});

struct Exploration {
  bool complete = false;  // every feasible path ran to its end within budget
  std::string why;        // reason for giving up
  std::uint64_t paths = 0;
  EventSet events;        // observed along feasible paths only
};

/// Runs `main` over all feasible paths with precise per-path memory and
/// records what happens to each allocation site.
Exploration explore_program(const hir::Program &p, const ExplorationBudget &budget = {});

} // namespace uriah
