//===- cfg.hpp - Control flow, dominators, loops, execution counts -*- C++ -*-===//
#pragma once

#include "uriah/hir.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace uriah::hir {

struct CfgInfo {
  std::vector<std::vector<BlockId>> succs;
  std::vector<std::vector<BlockId>> preds;
  std::vector<bool> reachable;  // from block 0
  std::vector<BlockId> rpo;     // reachable blocks, reverse post-order
};

CfgInfo build_cfg(const Function &fn);

struct DomTree {
  std::vector<int> idom;       // -1 for entry and unreachable blocks
  std::vector<int> rpo_index;  // -1 if unreachable
  /// a dominates b (reflexive).  False if either is unreachable.
  bool dominates(BlockId a, BlockId b) const;
};

DomTree build_dominators(const CfgInfo &cfg);

/// Saturating execution count; kInfinite means "unbounded".
using Count = std::uint64_t;
inline constexpr Count kInfinite = std::numeric_limits<Count>::max();
Count sat_add(Count a, Count b);
Count sat_mul(Count a, Count b);

struct NaturalLoop {
  BlockId header;
  std::vector<BlockId> latches;
  std::vector<bool> body;          // indexed by block
  std::optional<Count> trip;       // header entries per loop entry, if counted
};

/// Loop structure of one function and, per block, how many times the block
/// can run in one activation (kInfinite if any enclosing cycle is not a
/// recognized counted loop).
struct LoopInfo {
  std::vector<NaturalLoop> loops;
  std::vector<Count> block_mult;
  bool irreducible = false;
};

LoopInfo analyze_loops(const Function &fn, const CfgInfo &cfg, const DomTree &dom);

struct CallSite {
  int caller;
  BlockId block;
  std::uint32_t index;
  int callee;
  bool spawn;
};

/// Program-wide indexes shared by the analyses.
struct ProgramIndex {
  std::vector<CfgInfo> cfg;
  std::vector<DomTree> dom;
  std::vector<LoopInfo> loops;
  std::vector<CallSite> calls;
  std::vector<std::vector<int>> callees;  // function -> distinct callees
  std::vector<bool> reachable;            // from entry via call/spawn
  std::vector<bool> in_call_cycle;
  /// Activations of each function over a whole run; 0 if unreachable.
  std::vector<Count> exec_count;
};

ProgramIndex build_index(const Program &p);

/// Strongly connected components of a directed graph given as adjacency
/// lists.  Components come out in reverse topological order (sinks first).
std::vector<std::vector<int>> strongly_connected(const std::vector<std::vector<int>> &succ);

/// Functions reachable (via call or spawn) from any function in `roots`.
std::vector<bool> reachable_from(const ProgramIndex &ix, const std::vector<int> &roots);

} // namespace uriah::hir
