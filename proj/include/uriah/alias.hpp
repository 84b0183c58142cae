//===- alias.hpp - Inclusion-based points-to over HIR -----------*- C++ -*-===//
//
// Context-insensitive Andersen analysis.  Abstract objects are allocation
// sites, split by realloc version and (optionally) by the call site of a
// non-escaping allocation wrapper.  Memory is modelled with one cell per
// abstract object: every ref stored anywhere in the object lands in the same
// cell.
//
//===----------------------------------------------------------------------===//
#pragma once

#include "uriah/cfg.hpp"
#include "uriah/hir.hpp"

#include <string>
#include <vector>

namespace uriah {

using ObjId = std::uint32_t;
using ObjSet = std::vector<ObjId>;  // sorted, unique

struct AbsObject {
  enum Kind : std::uint8_t { Heap, Global } kind = Heap;
  int site = -1;     // Heap
  int global = -1;   // Global
  int version = -1;  // id of the realloc that produced it; -1 = as allocated
  int clone = -1;    // id of the wrapper call site under heap cloning
  std::string label(const hir::Program &p) const;
};

enum class NodeKind : std::uint8_t { Value, Ret, Cell };

struct GraphNode {
  NodeKind kind;
  int function = -1;                 // Value, Ret
  hir::ValueId value = hir::kNoValue;  // Value
  ObjId obj = 0;                     // Cell
};

/// dst ⊇ src, with the pointer moved by `offset` bytes (gep) or not at all.
struct FlowEdge {
  int src;
  int dst;
  bool has_offset = false;
  int function = -1;  // where `offset` is defined
  hir::Operand offset;
};

/// `node` may hold a pointer to the start of `obj`.
struct FlowSource {
  int node;
  ObjId obj;
};

struct AliasOptions {
  bool heap_clone = false;
};

struct AliasResult {
  std::vector<AbsObject> objects;
  std::vector<GraphNode> nodes;
  std::vector<std::vector<int>> value_node;  // [fn][value] -> node, -1 for ints
  std::vector<int> ret_node;                 // per function, -1 if no ref return
  std::vector<int> cell_node;                // per object
  std::vector<ObjSet> pts;                   // per node
  std::vector<FlowEdge> edges;
  std::vector<FlowSource> sources;
  std::vector<bool> wrapper;  // functions treated as allocation wrappers

  const ObjSet &pts_of(int fn, hir::ValueId v) const;
  std::vector<ObjId> objects_of_site(int site) const;
  int global_object(int global) const;
  /// {"objects": [...], "functions": {fn: {value: [labels]}}, "cells": {...}}
  std::string to_json(const hir::Program &p) const;
};

AliasResult compute_points_to(const hir::Program &p, const hir::ProgramIndex &ix,
                              const AliasOptions &opt = {});

/// Where a ref value was obtained from: bit 1 = read out of a heap object,
/// bit 2 = read out of global storage; 0 = stack-local (alloc result, param
/// chain from locals).  Propagates through copies, geps, phis and calls.
enum RegionBits : unsigned { kRegionStack = 0, kRegionHeap = 1, kRegionGlobal = 2 };
enum class Region : std::uint8_t { Stack, Heap, Global };

struct RegionInfo {
  std::vector<std::vector<unsigned>> bits;  // [fn][value]
};
RegionInfo compute_regions(const hir::Program &p, const hir::ProgramIndex &ix,
                           const AliasResult &a);
Region classify_alias_region(const RegionInfo &r, int fn, hir::ValueId v);

struct GlobalAliasViolation {
  int site;
  int global;
  std::string reason;  // "compound-global" | "uninitialized-global"
};
/// Sites whose pointers are stored into a global that the pool allocator
/// cannot keep type-stable: compound globals with nested aggregates, and
/// globals with a ref slot not initialized at its definition.
std::vector<GlobalAliasViolation> validate_global_aliases(const hir::Program &p,
                                                          const AliasResult &a);

} // namespace uriah
