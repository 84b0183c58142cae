//===- hir.hpp - Heap IR: program representation and parser ----*- C++ -*-===//
//
// HIR is a small SSA language for heap-manipulating programs.  Grammar
// (one instruction per line, `;` starts a comment):
//
//   type NAME = { field:TYPE, ... }        packed compound
//   union NAME = { member:TYPE, ... }      stored as its largest member
//   global NAME: TYPE [= INIT]             INIT: INT | alloc TYPE | alloc INT
//                                          | { field: INIT, ... }
//   fn NAME(arg:TYPE, ...) [-> TYPE] { blocks }
//                                          entry fn is `main`; its int args
//                                          declare an input domain: `n:i64 in 0..15`
//
//   TYPE      := i8 | i16 | i32 | i64 | ref | ref<NAME> | NAME | TYPE[N]
//   x = alloc TYPE | alloc VAL           typed site / opaque byte site
//   x = realloc VAL, TYPE | realloc VAL, VAL
//   free VAL
//   x = gep VAL, VAL                     byte offset
//   x = cast VAL, TYPE                   ref view change or integer cast
//   x = load PRIM VAL        store PRIM VAL, VAL
//   x = assign VAL
//   x = add|sub|mul|and|or|xor VAL, VAL
//   x = cmp eq|ne|lt|le|gt|ge VAL, VAL
//   x = phi [BLOCK: VAL], ...
//   br VAL, BLOCK, BLOCK     jmp BLOCK     ret [VAL]
//   [x =] call FN(VAL, ...)  spawn FN(VAL, ...)
//   x = gaddr GLOBAL
//
//===----------------------------------------------------------------------===//
#pragma once

#include "uriah/layout.hpp"

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace uriah::hir {

using ValueId = std::uint32_t;
using BlockId = std::uint32_t;
inline constexpr ValueId kNoValue = ~0u;

struct Diagnostic {
  int line = 0;
  int col = 0;
  std::string message;
  std::string str() const;
};

class ParseError : public std::runtime_error {
public:
  explicit ParseError(std::vector<Diagnostic> d);
  const std::vector<Diagnostic> &diagnostics() const { return diags_; }

private:
  std::vector<Diagnostic> diags_;
};

/// Static kind of an SSA value.  Refs are opaque unless produced by a typed
/// alloc, a cast, a typed realloc, or declared `ref<T>`.
struct ValueType {
  bool is_ref = false;
  Prim width = Prim::I64;  // ints only
  TypePtr pointee;         // refs only; null = opaque
};

struct ValueInfo {
  std::string name;
  ValueType type;
  int def_block = -1;  // -1 for parameters
  int def_index = -1;
};

enum class Op : std::uint8_t {
  Alloc, Free, Realloc, Gep, Cast, Load, Store, Assign, Arith, Cmp,
  Br, Jmp, Call, Ret, Spawn, GlobalAddr, Phi
};
std::string_view op_name(Op op);

enum class ArithOp : std::uint8_t { Add, Sub, Mul, And, Or, Xor };
enum class CmpOp : std::uint8_t { Eq, Ne, Lt, Le, Gt, Ge };
std::string_view arith_name(ArithOp);
std::string_view cmp_name(CmpOp);

struct Operand {
  bool is_const = false;
  ValueId value = kNoValue;
  std::int64_t constant = 0;

  static Operand val(ValueId v) { return {false, v, 0}; }
  static Operand imm(std::int64_t c) { return {true, kNoValue, c}; }
};

struct PhiIn {
  BlockId block;
  Operand value;
};

struct Instr {
  Op op;
  std::uint32_t id = 0;  // program-unique
  int line = 0;
  int col = 0;
  ValueId result = kNoValue;
  std::vector<Operand> args;
  ArithOp arith = ArithOp::Add;
  CmpOp cmp = CmpOp::Eq;
  Prim prim = Prim::I64;     // load/store width, integer-cast target
  TypePtr type;              // alloc/realloc/cast target type, if typed
  std::string type_text;     // as written, for printing
  std::vector<BlockId> targets;
  std::vector<PhiIn> incoming;
  int callee = -1;           // function index for call/spawn
  int global = -1;           // gaddr
  int site = -1;             // alloc site index
  bool elided = false;       // compiler-style cast folded into its alloc
};

struct Block {
  std::string label;
  std::vector<Instr> instrs;
};

struct Param {
  ValueId value;
  // Entry-function input domain (inclusive); ignored elsewhere.
  bool has_domain = false;
  std::int64_t lo = 0;
  std::int64_t hi = 0;
};

struct Function {
  std::string name;
  int line = 0;
  std::vector<Param> params;
  std::vector<ValueInfo> values;
  std::vector<Block> blocks;
  bool returns_value = false;
  ValueType ret_type;

  const Instr &instr(BlockId b, std::size_t i) const { return blocks[b].instrs[i]; }
  ValueId find_value(std::string_view n) const;
  int find_block(std::string_view n) const;
};

struct GlobalInit {
  enum Kind { None, Int, Alloc, Compound } kind = None;
  std::int64_t value = 0;
  int site = -1;                           // Alloc
  std::map<std::string, GlobalInit> fields;  // Compound, keyed by field name
};

struct Global {
  std::string name;
  int line = 0;
  TypePtr type;            // storage layout
  std::string type_text;
  bool declared_ref = false;
  GlobalInit init;
};

/// Alias classes of global storage holding references.
enum class GlobalClass : std::uint8_t { NoRefs, Singleton, SingletonFields, Compound };
GlobalClass classify_global(const Global &g);

struct AllocationSite {
  int id = 0;
  int function = -1;      // -1: global initializer
  BlockId block = 0;
  std::uint32_t index = 0;
  std::uint32_t instr_id = 0;
  int line = 0;
  TypePtr declared;       // alloc TYPE (or elided cast)
  bool constant_size = false;
  std::int64_t size = 0;  // when constant_size
  std::string size_text;
  int global = -1;        // owning global for initializer sites
};

struct Program {
  std::map<std::string, TypePtr> types;
  std::vector<std::string> type_order;
  std::vector<bool> type_is_union;
  std::vector<Global> globals;
  std::vector<Function> functions;
  std::vector<AllocationSite> sites;
  int entry = -1;
  std::uint32_t instr_count = 0;

  int find_function(std::string_view n) const;
  int find_global(std::string_view n) const;
  /// Locates an instruction by its program-unique id.
  struct Loc { int function; BlockId block; std::uint32_t index; };
  std::vector<Loc> instr_locs;
  const Instr &instr_by_id(std::uint32_t id) const;
};

/// Parses and validates (name resolution, SSA, dominance).  Throws ParseError.
Program parse_program(std::string_view text);
/// Canonical textual form; parse_program(print_program(p)) reproduces p.
std::string print_program(const Program &p);

} // namespace uriah::hir
