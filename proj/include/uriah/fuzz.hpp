//===- fuzz.hpp - Random programs checked against the oracle ----*- C++ -*-===//
//
// Generated programs stay inside what the oracle can decide exhaustively:
// loops have constant trip counts, at most two spawned threads, and the
// entry inputs span at most 8 bits.
//
//===----------------------------------------------------------------------===//
#pragma once

#include "uriah/config.hpp"
#include "uriah/oracle.hpp"

#include <string>
#include <vector>

namespace uriah {

/// HIR text of one random program.
std::string generate_program(std::uint64_t seed);

/// Seed of case `index` in a run started from `seed`.
std::uint64_t case_seed(std::uint64_t seed, std::uint64_t index);

struct FuzzFailure {
  std::uint64_t seed;
  std::string program;
  int site;
  std::string detail;
  std::string reproducer;  // file written, if any
};

struct FuzzResult {
  std::uint64_t cases = 0;
  std::uint64_t sites = 0;
  std::uint64_t safe = 0;
  std::uint64_t unsafe = 0;
  std::uint64_t unsafe_clean = 0;  // Unsafe but the oracle saw no violation
  std::uint64_t partial = 0;       // oracle runs that hit their cap
  std::uint64_t flips = 0;
  std::vector<FuzzFailure> failures;

  double precision_gap() const { return unsafe ? static_cast<double>(unsafe_clean) / static_cast<double>(unsafe) : 0.0; }
};

/// Classifies and runs the oracle on `cfg.count` programs from `cfg.seed`.
/// Writes a reproducer for every Safe site the oracle shows violating when
/// `write_reproducers` is set.
FuzzResult run_fuzz(const KitConfig &cfg, bool write_reproducers = true);

} // namespace uriah
