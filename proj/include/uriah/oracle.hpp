//===- oracle.hpp - Exhaustive concrete interpreter -------------*- C++ -*-===//
//
// Runs a program on every input in the entry function's declared domain and,
// for programs that spawn threads, on every interleaving of heap operations
// (up to a cap).  Memory is byte-precise: each byte remembers the primitive
// and position of the last write, so reads that reinterpret bytes are
// reported.  Out-of-bounds writes are dropped and out-of-bounds reads yield
// zero, so a run continues past its first error.
//
//===----------------------------------------------------------------------===//
#pragma once

#include "uriah/hir.hpp"

#include <string>
#include <vector>

namespace uriah {

enum class FindingKind : std::uint8_t {
  OutOfBounds, InvalidFree, TypeConfusion, UseAfterFree, DoubleFree, UninitRead
};
std::string_view finding_name(FindingKind k);

struct Finding {
  FindingKind kind;
  int site = -1;  // -1: global storage
  int fn = -1;
  int line = 0;
  std::vector<std::int64_t> input;  // witness
  std::string detail;
};

struct OracleOptions {
  /// Upper bound on concrete executions (inputs x interleavings).
  std::uint64_t cap = 1u << 16;
  /// Interleavings explored per input.
  std::uint64_t max_interleavings = 512;
  /// Instructions per execution before it is cut off.
  std::uint64_t max_steps = 200000;
};

struct OracleResult {
  std::vector<Finding> findings;  // one per (kind, site, fn, line)
  bool partial = false;           // some input or interleaving was not explored
  std::uint64_t inputs = 0;
  std::uint64_t executions = 0;
  std::uint64_t traps = 0;        // executions ended by a fatal error

  /// The site showed a spatial or type violation (out-of-bounds access,
  /// invalid free, or a type-confused read).
  bool violates(int site) const;
  std::string to_json(const hir::Program &p) const;
};

OracleResult run_oracle(const hir::Program &p, const OracleOptions &opt = {});

} // namespace uriah
