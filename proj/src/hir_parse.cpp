//===- hir_parse.cpp - HIR lexer, parser and validator -------------------===//

#include "uriah/cfg.hpp"
#include "uriah/hir.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>
#include <sstream>

namespace uriah::hir {

std::string Diagnostic::str() const {
  return std::to_string(line) + ":" + std::to_string(col) + ": " + message;
}

static std::string join_diags(const std::vector<Diagnostic> &d) {
  std::string s;
  for (const auto &x : d) {
    if (!s.empty()) s += "\n";
    s += x.str();
  }
  return s;
}

ParseError::ParseError(std::vector<Diagnostic> d)
    : std::runtime_error(join_diags(d)), diags_(std::move(d)) {}

std::string_view op_name(Op op) {
  static constexpr std::string_view names[] = {
      "alloc", "free", "realloc", "gep",  "cast", "load",  "store", "assign", "arith",
      "cmp",   "br",   "jmp",     "call", "ret",  "spawn", "gaddr", "phi"};
  return names[static_cast<int>(op)];
}

std::string_view arith_name(ArithOp a) {
  static constexpr std::string_view names[] = {"add", "sub", "mul", "and", "or", "xor"};
  return names[static_cast<int>(a)];
}

std::string_view cmp_name(CmpOp c) {
  static constexpr std::string_view names[] = {"eq", "ne", "lt", "le", "gt", "ge"};
  return names[static_cast<int>(c)];
}

ValueId Function::find_value(std::string_view n) const {
  for (ValueId i = 0; i < values.size(); ++i)
    if (values[i].name == n) return i;
  return kNoValue;
}

int Function::find_block(std::string_view n) const {
  for (std::size_t i = 0; i < blocks.size(); ++i)
    if (blocks[i].label == n) return static_cast<int>(i);
  return -1;
}

int Program::find_function(std::string_view n) const {
  for (std::size_t i = 0; i < functions.size(); ++i)
    if (functions[i].name == n) return static_cast<int>(i);
  return -1;
}

int Program::find_global(std::string_view n) const {
  for (std::size_t i = 0; i < globals.size(); ++i)
    if (globals[i].name == n) return static_cast<int>(i);
  return -1;
}

const Instr &Program::instr_by_id(std::uint32_t id) const {
  const Loc &l = instr_locs.at(id);
  return functions[l.function].blocks[l.block].instrs[l.index];
}

GlobalClass classify_global(const Global &g) {
  bool has_ref = false;
  for (const auto &e : g.type->flat())
    if (e.prim == Prim::Ref) has_ref = true;
  if (!has_ref) return GlobalClass::NoRefs;
  if (g.declared_ref) return GlobalClass::Singleton;
  for (const auto &f : g.type->fields)
    if (f.compound || f.is_array) return GlobalClass::Compound;
  return GlobalClass::SingletonFields;
}

namespace {

//===----------------------------------------------------------------------===//
// Lexer
//===----------------------------------------------------------------------===//

enum class Tok { Ident, Int, Punct, Newline, End };

struct Token {
  Tok kind;
  std::string text;
  std::int64_t value = 0;
  int line = 0;
  int col = 0;
};

std::vector<Token> lex(std::string_view src, std::vector<Diagnostic> &diags) {
  std::vector<Token> out;
  int line = 1, col = 1;
  std::size_t i = 0;
  auto push = [&](Tok k, std::string t, int l, int c, std::int64_t v = 0) {
    out.push_back({k, std::move(t), v, l, c});
  };
  while (i < src.size()) {
    char ch = src[i];
    if (ch == '\n') {
      push(Tok::Newline, "\\n", line, col);
      ++line;
      col = 1;
      ++i;
      continue;
    }
    if (ch == ';') {
      while (i < src.size() && src[i] != '\n') ++i;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      ++i;
      ++col;
      continue;
    }
    int sl = line, sc = col;
    if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') {
      std::size_t j = i;
      while (j < src.size() &&
             (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_'))
        ++j;
      push(Tok::Ident, std::string(src.substr(i, j - i)), sl, sc);
      col += static_cast<int>(j - i);
      i = j;
      continue;
    }
    bool neg = ch == '-' && i + 1 < src.size() &&
               std::isdigit(static_cast<unsigned char>(src[i + 1]));
    if (std::isdigit(static_cast<unsigned char>(ch)) || neg) {
      std::size_t j = i + (neg ? 1 : 0);
      int base = 10;
      if (j + 1 < src.size() && src[j] == '0' && (src[j + 1] == 'x' || src[j + 1] == 'X')) {
        base = 16;
        j += 2;
      }
      std::size_t k = j;
      while (k < src.size() && std::isxdigit(static_cast<unsigned char>(src[k])) &&
             (base == 16 || std::isdigit(static_cast<unsigned char>(src[k]))))
        ++k;
      std::uint64_t mag = 0;
      auto [p, ec] = std::from_chars(src.data() + j, src.data() + k, mag, base);
      if (ec != std::errc() || k == j || mag > (1ULL << 63) ||
          (!neg && mag == (1ULL << 63))) {
        diags.push_back({sl, sc, "invalid integer literal"});
      }
      std::int64_t v = neg ? static_cast<std::int64_t>(0 - mag) : static_cast<std::int64_t>(mag);
      push(Tok::Int, std::string(src.substr(i, k - i)), sl, sc, v);
      col += static_cast<int>(k - i);
      i = k;
      continue;
    }
    if (ch == '.' && i + 1 < src.size() && src[i + 1] == '.') {
      push(Tok::Punct, "..", sl, sc);
      i += 2;
      col += 2;
      continue;
    }
    if (ch == '-' && i + 1 < src.size() && src[i + 1] == '>') {
      push(Tok::Punct, "->", sl, sc);
      i += 2;
      col += 2;
      continue;
    }
    if (std::string_view("{}()[],:=<>").find(ch) != std::string_view::npos) {
      push(Tok::Punct, std::string(1, ch), sl, sc);
      ++i;
      ++col;
      continue;
    }
    diags.push_back({sl, sc, std::string("unexpected character '") + ch + "'"});
    ++i;
    ++col;
  }
  push(Tok::End, "<eof>", line, col);
  return out;
}

//===----------------------------------------------------------------------===//
// Parser
//===----------------------------------------------------------------------===//

struct Fatal {};

struct TypeSyntax {
  std::string name;
  std::string ref_target;
  bool is_array = false;
  std::uint64_t count = 1;
  int line = 0, col = 0;
  std::string text() const {
    std::string s = name;
    if (!ref_target.empty()) s += "<" + ref_target + ">";
    if (is_array) s += "[" + std::to_string(count) + "]";
    return s;
  }
};

// An operand before name resolution.
struct RawOperand {
  bool is_const = false;
  std::int64_t constant = 0;
  std::string name;
  int line = 0, col = 0;
};

struct RawInstr {
  Instr in;
  std::string result_name;
  std::vector<RawOperand> args;
  std::vector<std::pair<std::string, RawOperand>> phi;  // block label, value
  std::vector<std::string> target_labels;
  std::string callee_name;
  std::string global_name;
  TypeSyntax type;  // alloc/realloc/cast when typed
  bool has_type = false;
  bool typed_size_operand = false;
};

struct RawBlock {
  std::string label;
  int line = 0, col = 0;
  std::vector<RawInstr> instrs;
};

struct RawParam {
  std::string name;
  TypeSyntax type;
  bool has_domain = false;
  std::int64_t lo = 0, hi = 0;
  int line = 0, col = 0;
};

struct RawFunction {
  std::string name;
  int line = 0, col = 0;
  std::vector<RawParam> params;
  bool has_ret = false;
  TypeSyntax ret;
  std::vector<RawBlock> blocks;
};

ValueType value_type_of(const TypeSyntax &ts, const std::map<std::string, TypePtr> &types) {
  ValueType vt;
  auto p = prim_from_name(ts.name);
  if (p == Prim::Ref) {
    vt.is_ref = true;
    if (!ts.ref_target.empty()) {
      auto it = types.find(ts.ref_target);
      if (it != types.end()) vt.pointee = it->second;
    }
  } else if (p) {
    vt.width = *p;
  }
  return vt;
}

class Parser {
public:
  Parser(std::vector<Token> toks, std::vector<Diagnostic> &diags)
      : toks_(std::move(toks)), diags_(diags) {}

  Program run();

private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::vector<Diagnostic> &diags_;
  Program prog_;
  std::vector<RawFunction> raw_fns_;
  std::vector<std::pair<TypeSyntax, int>> pending_global_allocs_;

  const Token &peek(std::size_t k = 0) const {
    return toks_[std::min(pos_ + k, toks_.size() - 1)];
  }
  const Token &next() {
    const Token &t = toks_[pos_];
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }
  bool is_punct(const char *p, std::size_t k = 0) const {
    return peek(k).kind == Tok::Punct && peek(k).text == p;
  }
  bool is_ident(const char *p, std::size_t k = 0) const {
    return peek(k).kind == Tok::Ident && peek(k).text == p;
  }
  [[noreturn]] void fail(const Token &t, const std::string &msg) {
    diags_.push_back({t.line, t.col, msg});
    throw Fatal{};
  }
  void error(int line, int col, const std::string &msg) {
    diags_.push_back({line, col, msg});
  }
  void expect_punct(const char *p) {
    if (!is_punct(p)) fail(peek(), std::string("expected '") + p + "', found '" + peek().text + "'");
    next();
  }
  std::string expect_ident(const char *what) {
    if (peek().kind != Tok::Ident) fail(peek(), std::string("expected ") + what + ", found '" + peek().text + "'");
    return next().text;
  }
  std::int64_t expect_int() {
    if (peek().kind != Tok::Int) fail(peek(), "expected integer, found '" + peek().text + "'");
    return next().value;
  }
  void skip_newlines() {
    while (peek().kind == Tok::Newline) next();
  }
  void end_of_statement() {
    if (peek().kind == Tok::Newline) {
      next();
      return;
    }
    if (is_punct("}") || peek().kind == Tok::End) return;
    fail(peek(), "expected end of line, found '" + peek().text + "'");
  }

  TypeSyntax parse_type_syntax();
  TypePtr resolve_type(const TypeSyntax &ts, const std::string &self = "");
  void parse_typedef(bool is_union);
  void parse_global();
  GlobalInit parse_global_init(const TypePtr &t, const TypeSyntax &ts, int gidx);
  void parse_function();
  RawInstr parse_instr();
  RawOperand parse_operand();

  void build_function(const RawFunction &rf, int index);
};

TypeSyntax Parser::parse_type_syntax() {
  TypeSyntax ts;
  ts.line = peek().line;
  ts.col = peek().col;
  ts.name = expect_ident("type");
  if (ts.name == "ref" && is_punct("<")) {
    next();
    ts.ref_target = expect_ident("type name");
    expect_punct(">");
  }
  if (is_punct("[")) {
    next();
    std::int64_t n = expect_int();
    if (n <= 0) fail(peek(), "array length must be positive");
    ts.is_array = true;
    ts.count = static_cast<std::uint64_t>(n);
    expect_punct("]");
  }
  return ts;
}

TypePtr Parser::resolve_type(const TypeSyntax &ts, const std::string &self) {
  if (auto p = prim_from_name(ts.name)) {
    if (!ts.ref_target.empty() && !prog_.types.count(ts.ref_target) &&
        ts.ref_target != self)
      error(ts.line, ts.col, "unresolved type '" + ts.ref_target + "'");
    return make_prim_type(*p, ts.count, ts.is_array);
  }
  if (ts.name == self) {
    error(ts.line, ts.col, "recursive type '" + self + "'");
    throw Fatal{};
  }
  auto it = prog_.types.find(ts.name);
  if (it == prog_.types.end()) {
    error(ts.line, ts.col, "unresolved type '" + ts.name + "'");
    throw Fatal{};
  }
  if (ts.is_array) return make_array_type(it->second, ts.count);
  return it->second;
}

void Parser::parse_typedef(bool is_union) {
  next();  // type / union
  const Token &nt = peek();
  std::string name = expect_ident("type name");
  if (prim_from_name(name)) fail(nt, "cannot redefine primitive '" + name + "'");
  if (prog_.types.count(name)) fail(nt, "duplicate definition of type '" + name + "'");
  expect_punct("=");
  expect_punct("{");
  skip_newlines();
  std::vector<FieldDesc> fields;
  std::set<std::string> names;
  while (!is_punct("}")) {
    const Token &ft = peek();
    FieldDesc f;
    f.name = expect_ident("field name");
    if (!names.insert(f.name).second) fail(ft, "duplicate field '" + f.name + "'");
    expect_punct(":");
    TypeSyntax ts = parse_type_syntax();
    if (auto p = prim_from_name(ts.name)) {
      f.prim = *p;
      if (!ts.ref_target.empty() && ts.ref_target != name && !prog_.types.count(ts.ref_target))
        error(ts.line, ts.col, "unresolved type '" + ts.ref_target + "'");
    } else {
      if (ts.name == name) fail(ft, "recursive type '" + name + "'");
      auto it = prog_.types.find(ts.name);
      if (it == prog_.types.end()) fail(ft, "unresolved type '" + ts.name + "'");
      f.compound = it->second;
    }
    f.is_array = ts.is_array;
    f.count = ts.count;
    fields.push_back(std::move(f));
    skip_newlines();
    if (is_punct(",")) {
      next();
      skip_newlines();
    } else if (!is_punct("}")) {
      fail(peek(), "expected ',' or '}' in type body");
    }
  }
  next();
  if (fields.empty()) fail(nt, "type '" + name + "' has no fields");
  if (is_union) {
    // Stored as the first largest member.
    std::size_t best = 0;
    for (std::size_t i = 0; i < fields.size(); ++i)
      if (fields[i].element_size() * fields[i].count >
          fields[best].element_size() * fields[best].count)
        best = i;
    fields = {fields[best]};
  }
  prog_.types[name] = make_type(name, std::move(fields));
  prog_.type_order.push_back(name);
  prog_.type_is_union.push_back(is_union);
  end_of_statement();
}

GlobalInit Parser::parse_global_init(const TypePtr &t, const TypeSyntax &ts, int gidx) {
  GlobalInit gi;
  if (peek().kind == Tok::Int) {
    gi.kind = GlobalInit::Int;
    gi.value = next().value;
    if (t->flat().size() != 1 || t->flat()[0].prim == Prim::Ref)
      error(ts.line, ts.col, "integer initializer for non-integer global");
    return gi;
  }
  if (is_ident("alloc")) {
    const Token &at = next();
    bool ok = t->flat().size() == 1 && t->flat()[0].prim == Prim::Ref;
    if (!ok) error(at.line, at.col, "alloc initializer requires a ref-typed slot");
    AllocationSite s;
    s.id = static_cast<int>(prog_.sites.size());
    s.function = -1;
    s.line = at.line;
    s.global = gidx;
    if (peek().kind == Tok::Int) {
      s.constant_size = true;
      s.size = next().value;
      s.size_text = std::to_string(s.size);
      if (s.size <= 0) error(at.line, at.col, "allocation size must be positive");
    } else {
      TypeSyntax ats = parse_type_syntax();
      s.declared = resolve_type(ats);
      s.constant_size = true;
      s.size = static_cast<std::int64_t>(s.declared->total_size);
      s.size_text = ats.text();
    }
    gi.kind = GlobalInit::Alloc;
    gi.site = s.id;
    prog_.sites.push_back(std::move(s));
    return gi;
  }
  if (is_punct("{")) {
    next();
    skip_newlines();
    gi.kind = GlobalInit::Compound;
    while (!is_punct("}")) {
      const Token &ft = peek();
      std::string fname = expect_ident("field name");
      const FieldDesc *fd = nullptr;
      for (const auto &f : t->fields)
        if (f.name == fname) fd = &f;
      if (!fd) fail(ft, "unresolved field '" + fname + "'");
      if (gi.fields.count(fname)) fail(ft, "duplicate initializer for '" + fname + "'");
      expect_punct(":");
      TypePtr ft_type = fd->prim ? make_prim_type(*fd->prim, fd->count, fd->is_array)
                                 : (fd->is_array ? make_array_type(fd->compound, fd->count)
                                                 : fd->compound);
      gi.fields[fname] = parse_global_init(ft_type, ts, gidx);
      skip_newlines();
      if (is_punct(",")) {
        next();
        skip_newlines();
      } else if (!is_punct("}")) {
        fail(peek(), "expected ',' or '}' in initializer");
      }
    }
    next();
    return gi;
  }
  fail(peek(), "expected global initializer");
}

void Parser::parse_global() {
  next();
  const Token &nt = peek();
  Global g;
  g.line = nt.line;
  g.name = expect_ident("global name");
  if (prog_.find_global(g.name) >= 0) fail(nt, "duplicate definition of global '" + g.name + "'");
  expect_punct(":");
  TypeSyntax ts = parse_type_syntax();
  g.type = resolve_type(ts);
  g.type_text = ts.text();
  g.declared_ref = ts.name == "ref" && !ts.is_array;
  int gidx = static_cast<int>(prog_.globals.size());
  prog_.globals.push_back(g);
  if (is_punct("=")) {
    next();
    GlobalInit gi = parse_global_init(g.type, ts, gidx);
    prog_.globals[gidx].init = std::move(gi);
  }
  end_of_statement();
}

RawOperand Parser::parse_operand() {
  RawOperand o;
  o.line = peek().line;
  o.col = peek().col;
  if (peek().kind == Tok::Int) {
    o.is_const = true;
    o.constant = next().value;
  } else {
    o.name = expect_ident("operand");
  }
  return o;
}

RawInstr Parser::parse_instr() {
  RawInstr r;
  const Token &first = peek();
  r.in.line = first.line;
  r.in.col = first.col;
  if (peek().kind == Tok::Ident && is_punct("=", 1)) {
    r.result_name = next().text;
    next();
  }
  const Token &opt = peek();
  std::string op = expect_ident("opcode");
  auto need_result = [&](bool want) {
    if (want && r.result_name.empty()) fail(opt, "'" + op + "' requires a result");
    if (!want && !r.result_name.empty()) fail(opt, "'" + op + "' has no result");
  };
  auto comma = [&] { expect_punct(","); };
  auto parse_args_list = [&] {
    expect_punct("(");
    while (!is_punct(")")) {
      r.args.push_back(parse_operand());
      if (is_punct(",")) next();
      else if (!is_punct(")")) fail(peek(), "expected ',' or ')'");
    }
    next();
  };
  auto type_or_operand = [&] {
    if (peek().kind == Tok::Int) {
      r.args.push_back(parse_operand());
      return;
    }
    if (peek().kind == Tok::Ident) {
      std::string n = peek().text;
      if (prim_from_name(n) || prog_.types.count(n)) {
        r.type = parse_type_syntax();
        r.has_type = true;
        return;
      }
    }
    r.args.push_back(parse_operand());
  };

  if (op == "alloc") {
    need_result(true);
    r.in.op = Op::Alloc;
    type_or_operand();
  } else if (op == "free") {
    need_result(false);
    r.in.op = Op::Free;
    r.args.push_back(parse_operand());
  } else if (op == "realloc") {
    need_result(true);
    r.in.op = Op::Realloc;
    r.args.push_back(parse_operand());
    comma();
    type_or_operand();
  } else if (op == "gep") {
    need_result(true);
    r.in.op = Op::Gep;
    r.args.push_back(parse_operand());
    comma();
    r.args.push_back(parse_operand());
  } else if (op == "cast") {
    need_result(true);
    r.in.op = Op::Cast;
    r.args.push_back(parse_operand());
    comma();
    r.type = parse_type_syntax();
    r.has_type = true;
  } else if (op == "load") {
    need_result(true);
    r.in.op = Op::Load;
    const Token &pt = peek();
    auto p = prim_from_name(expect_ident("primitive type"));
    if (!p) fail(pt, "load requires a primitive type");
    r.in.prim = *p;
    r.args.push_back(parse_operand());
  } else if (op == "store") {
    need_result(false);
    r.in.op = Op::Store;
    const Token &pt = peek();
    auto p = prim_from_name(expect_ident("primitive type"));
    if (!p) fail(pt, "store requires a primitive type");
    r.in.prim = *p;
    r.args.push_back(parse_operand());
    comma();
    r.args.push_back(parse_operand());
  } else if (op == "assign") {
    need_result(true);
    r.in.op = Op::Assign;
    r.args.push_back(parse_operand());
  } else if (op == "add" || op == "sub" || op == "mul" || op == "and" || op == "or" ||
             op == "xor") {
    need_result(true);
    r.in.op = Op::Arith;
    static const std::map<std::string, ArithOp> m = {
        {"add", ArithOp::Add}, {"sub", ArithOp::Sub}, {"mul", ArithOp::Mul},
        {"and", ArithOp::And}, {"or", ArithOp::Or},   {"xor", ArithOp::Xor}};
    r.in.arith = m.at(op);
    r.args.push_back(parse_operand());
    comma();
    r.args.push_back(parse_operand());
  } else if (op == "cmp") {
    need_result(true);
    r.in.op = Op::Cmp;
    static const std::map<std::string, CmpOp> m = {{"eq", CmpOp::Eq}, {"ne", CmpOp::Ne},
                                                   {"lt", CmpOp::Lt}, {"le", CmpOp::Le},
                                                   {"gt", CmpOp::Gt}, {"ge", CmpOp::Ge}};
    const Token &ct = peek();
    auto it = m.find(expect_ident("comparison"));
    if (it == m.end()) fail(ct, "unknown comparison '" + ct.text + "'");
    r.in.cmp = it->second;
    r.args.push_back(parse_operand());
    comma();
    r.args.push_back(parse_operand());
  } else if (op == "phi") {
    need_result(true);
    r.in.op = Op::Phi;
    for (;;) {
      expect_punct("[");
      std::string lbl = expect_ident("block label");
      expect_punct(":");
      RawOperand v = parse_operand();
      expect_punct("]");
      r.phi.emplace_back(lbl, v);
      if (!is_punct(",")) break;
      next();
    }
  } else if (op == "br") {
    need_result(false);
    r.in.op = Op::Br;
    r.args.push_back(parse_operand());
    comma();
    r.target_labels.push_back(expect_ident("block label"));
    comma();
    r.target_labels.push_back(expect_ident("block label"));
  } else if (op == "jmp") {
    need_result(false);
    r.in.op = Op::Jmp;
    r.target_labels.push_back(expect_ident("block label"));
  } else if (op == "ret") {
    need_result(false);
    r.in.op = Op::Ret;
    if (peek().kind != Tok::Newline && !is_punct("}") && peek().kind != Tok::End)
      r.args.push_back(parse_operand());
  } else if (op == "call") {
    r.in.op = Op::Call;
    r.callee_name = expect_ident("function name");
    parse_args_list();
  } else if (op == "spawn") {
    need_result(false);
    r.in.op = Op::Spawn;
    r.callee_name = expect_ident("function name");
    parse_args_list();
  } else if (op == "gaddr") {
    need_result(true);
    r.in.op = Op::GlobalAddr;
    r.global_name = expect_ident("global name");
  } else {
    fail(opt, "unknown opcode '" + op + "'");
  }
  end_of_statement();
  return r;
}

void Parser::parse_function() {
  next();
  RawFunction f;
  const Token &nt = peek();
  f.line = nt.line;
  f.col = nt.col;
  f.name = expect_ident("function name");
  for (const auto &o : raw_fns_)
    if (o.name == f.name) fail(nt, "duplicate definition of function '" + f.name + "'");
  expect_punct("(");
  while (!is_punct(")")) {
    RawParam p;
    p.line = peek().line;
    p.col = peek().col;
    p.name = expect_ident("parameter name");
    expect_punct(":");
    p.type = parse_type_syntax();
    if (is_ident("in")) {
      next();
      p.has_domain = true;
      p.lo = expect_int();
      expect_punct("..");
      p.hi = expect_int();
      if (p.lo > p.hi) fail(peek(), "empty input domain");
    }
    f.params.push_back(std::move(p));
    if (is_punct(",")) next();
    else if (!is_punct(")")) fail(peek(), "expected ',' or ')'");
  }
  next();
  if (is_punct("->")) {
    next();
    f.has_ret = true;
    f.ret = parse_type_syntax();
  }
  skip_newlines();
  expect_punct("{");
  skip_newlines();
  while (!is_punct("}")) {
    if (peek().kind == Tok::End) fail(peek(), "unterminated function body");
    if (peek().kind == Tok::Ident && is_punct(":", 1)) {
      RawBlock b;
      b.line = peek().line;
      b.col = peek().col;
      b.label = next().text;
      next();
      for (const auto &o : f.blocks)
        if (o.label == b.label) fail(peek(), "duplicate definition of block '" + b.label + "'");
      f.blocks.push_back(std::move(b));
      skip_newlines();
      continue;
    }
    if (f.blocks.empty()) fail(peek(), "instruction outside of a block");
    f.blocks.back().instrs.push_back(parse_instr());
    skip_newlines();
  }
  next();
  end_of_statement();
  raw_fns_.push_back(std::move(f));
}

Program Parser::run() {
  try {
    skip_newlines();
    while (peek().kind != Tok::End) {
      if (is_ident("type")) parse_typedef(false);
      else if (is_ident("union")) parse_typedef(true);
      else if (is_ident("global")) parse_global();
      else if (is_ident("fn")) parse_function();
      else fail(peek(), "expected 'type', 'union', 'global' or 'fn', found '" + peek().text + "'");
      skip_newlines();
    }
  } catch (const Fatal &) {
    return std::move(prog_);
  }
  // Register all function signatures before bodies so calls resolve.
  for (const auto &rf : raw_fns_) {
    Function fn;
    fn.name = rf.name;
    fn.line = rf.line;
    fn.returns_value = rf.has_ret;
    if (rf.has_ret) fn.ret_type = value_type_of(rf.ret, prog_.types);
    prog_.functions.push_back(std::move(fn));
  }
  for (std::size_t i = 0; i < raw_fns_.size(); ++i) {
    try {
      build_function(raw_fns_[i], static_cast<int>(i));
    } catch (const Fatal &) {
    }
  }
  prog_.entry = prog_.find_function("main");
  if (prog_.entry < 0 && diags_.empty()) diags_.push_back({1, 1, "missing entry function 'main'"});
  return std::move(prog_);
}

void Parser::build_function(const RawFunction &rf, int index) {
  Function &fn = prog_.functions[index];
  std::map<std::string, ValueId> names;
  auto define = [&](const std::string &n, int line, int col) -> ValueId {
    if (names.count(n)) {
      error(line, col, "SSA violation: value '" + n + "' defined more than once");
      throw Fatal{};
    }
    ValueId id = static_cast<ValueId>(fn.values.size());
    names[n] = id;
    fn.values.push_back({n, {}, -1, -1});
    return id;
  };
  for (const auto &p : rf.params) {
    if (p.type.is_array || (!prim_from_name(p.type.name)))
      fail(Token{Tok::Ident, p.name, 0, p.line, p.col}, "parameter '" + p.name + "' must be a primitive or ref");
    ValueId v = define(p.name, p.line, p.col);
    fn.values[v].type = value_type_of(p.type, prog_.types);
    if (!p.type.ref_target.empty() && !prog_.types.count(p.type.ref_target))
      error(p.line, p.col, "unresolved type '" + p.type.ref_target + "'");
    fn.params.push_back({v, p.has_domain, p.lo, p.hi});
  }
  if (rf.blocks.empty()) fail(Token{Tok::Ident, "", 0, rf.line, rf.col}, "function '" + rf.name + "' has no blocks");
  std::map<std::string, BlockId> labels;
  for (std::size_t b = 0; b < rf.blocks.size(); ++b) labels[rf.blocks[b].label] = static_cast<BlockId>(b);
  fn.blocks.resize(rf.blocks.size());
  for (std::size_t b = 0; b < rf.blocks.size(); ++b) {
    fn.blocks[b].label = rf.blocks[b].label;
    for (std::size_t i = 0; i < rf.blocks[b].instrs.size(); ++i) {
      const RawInstr &ri = rf.blocks[b].instrs[i];
      if (!ri.result_name.empty()) {
        ValueId v = define(ri.result_name, ri.in.line, ri.in.col);
        fn.values[v].def_block = static_cast<int>(b);
        fn.values[v].def_index = static_cast<int>(i);
      }
    }
  }
  auto resolve = [&](const RawOperand &o) -> Operand {
    if (o.is_const) return Operand::imm(o.constant);
    auto it = names.find(o.name);
    if (it == names.end()) {
      error(o.line, o.col, "unresolved name '" + o.name + "'");
      throw Fatal{};
    }
    return Operand::val(it->second);
  };
  auto block_of = [&](const std::string &l, int line, int col) -> BlockId {
    auto it = labels.find(l);
    if (it == labels.end()) {
      error(line, col, "unresolved block '" + l + "'");
      throw Fatal{};
    }
    return it->second;
  };
  for (std::size_t b = 0; b < rf.blocks.size(); ++b) {
    const auto &rb = rf.blocks[b];
    if (rb.instrs.empty()) {
      error(rb.line, rb.col, "block '" + rb.label + "' is empty");
      throw Fatal{};
    }
    for (std::size_t i = 0; i < rb.instrs.size(); ++i) {
      const RawInstr &ri = rb.instrs[i];
      Instr in = ri.in;
      in.id = prog_.instr_count++;
      prog_.instr_locs.push_back({index, static_cast<BlockId>(b), static_cast<std::uint32_t>(i)});
      if (!ri.result_name.empty()) in.result = names.at(ri.result_name);
      for (const auto &a : ri.args) in.args.push_back(resolve(a));
      for (const auto &[l, v] : ri.phi) in.incoming.push_back({block_of(l, v.line, v.col), resolve(v)});
      for (const auto &l : ri.target_labels) in.targets.push_back(block_of(l, in.line, in.col));
      if (ri.has_type) {
        in.type_text = ri.type.text();
        auto p = prim_from_name(ri.type.name);
        if (in.op == Op::Cast && p && p != Prim::Ref && !ri.type.is_array) {
          in.prim = *p;  // integer cast, or view as a single primitive
        }
        if (in.op == Op::Cast && p == Prim::Ref && !ri.type.is_array) {
          error(in.line, in.col, "cast target must be a value type, not 'ref'");
          throw Fatal{};
        }
        in.type = resolve_type(ri.type);
      }
      if (in.op == Op::Call || in.op == Op::Spawn) {
        in.callee = prog_.find_function(ri.callee_name);
        if (in.callee < 0) {
          error(in.line, in.col, "unresolved function '" + ri.callee_name + "'");
          throw Fatal{};
        }
      }
      if (in.op == Op::GlobalAddr) {
        in.global = prog_.find_global(ri.global_name);
        if (in.global < 0) {
          error(in.line, in.col, "unresolved global '" + ri.global_name + "'");
          throw Fatal{};
        }
      }
      bool term = in.op == Op::Br || in.op == Op::Jmp || in.op == Op::Ret;
      if (term != (i + 1 == rb.instrs.size())) {
        error(in.line, in.col, term ? "terminator must end its block"
                                    : "block '" + rb.label + "' does not end with a terminator");
        throw Fatal{};
      }
      if (in.op == Op::Phi) {
        for (std::size_t k = 0; k < i; ++k)
          if (rb.instrs[k].in.op != Op::Phi) {
            error(in.line, in.col, "phi must appear at the start of its block");
            throw Fatal{};
          }
      }
      if (in.op == Op::Alloc) {
        AllocationSite s;
        s.id = static_cast<int>(prog_.sites.size());
        s.function = index;
        s.block = static_cast<BlockId>(b);
        s.index = static_cast<std::uint32_t>(i);
        s.instr_id = in.id;
        s.line = in.line;
        if (in.type) {
          s.declared = in.type;
          s.constant_size = true;
          s.size = static_cast<std::int64_t>(in.type->total_size);
          s.size_text = in.type_text;
        } else {
          s.constant_size = in.args[0].is_const;
          s.size = in.args[0].constant;
          s.size_text = in.args[0].is_const ? std::to_string(s.size) : rb.instrs[i].args[0].name;
          if (s.constant_size && s.size <= 0) {
            error(in.line, in.col, "allocation size must be positive");
            throw Fatal{};
          }
        }
        in.site = s.id;
        prog_.sites.push_back(std::move(s));
      }
      fn.blocks[b].instrs.push_back(std::move(in));
    }
  }

  // Result types; phi/assign may depend on later definitions, so iterate.
  std::vector<bool> known(fn.values.size(), false);
  for (const auto &p : fn.params) known[p.value] = true;
  auto operand_type = [&](const Operand &o, ValueType &out) -> bool {
    if (o.is_const) {
      out = ValueType{};
      return true;
    }
    if (!known[o.value]) return false;
    out = fn.values[o.value].type;
    return true;
  };
  for (bool changed = true; changed;) {
    changed = false;
    for (auto &blk : fn.blocks)
      for (auto &in : blk.instrs) {
        if (in.result == kNoValue || known[in.result]) continue;
        ValueType vt;
        bool ok = true;
        switch (in.op) {
        case Op::Alloc:
        case Op::Realloc:
          vt.is_ref = true;
          vt.pointee = in.type;
          break;
        case Op::Gep: vt.is_ref = true; break;
        case Op::GlobalAddr:
          vt.is_ref = true;
          vt.pointee = prog_.globals[in.global].type;
          break;
        case Op::Load:
          vt.is_ref = in.prim == Prim::Ref;
          vt.width = in.prim == Prim::Ref ? Prim::I64 : in.prim;
          break;
        case Op::Arith:
        case Op::Cmp: break;
        case Op::Cast: {
          ValueType src;
          ok = operand_type(in.args[0], src);
          if (ok) {
            if (src.is_ref) {
              vt.is_ref = true;
              vt.pointee = in.type;
            } else {
              vt.width = in.prim;
            }
          }
          break;
        }
        case Op::Assign: ok = operand_type(in.args[0], vt); break;
        case Op::Phi: {
          ok = false;
          bool all_const = true;
          for (const auto &inc : in.incoming) {
            if (!inc.value.is_const) all_const = false;
            ValueType t;
            if (!inc.value.is_const && operand_type(inc.value, t)) {
              vt = t;
              ok = true;
              break;
            }
          }
          if (all_const) ok = true;
          break;
        }
        case Op::Call: {
          const auto &rfn = raw_fns_[in.callee];
          if (!rfn.has_ret) {
            error(in.line, in.col, "function '" + rfn.name + "' returns no value");
            throw Fatal{};
          }
          vt = value_type_of(rfn.ret, prog_.types);
          break;
        }
        default: break;
        }
        if (ok) {
          fn.values[in.result].type = vt;
          known[in.result] = true;
          changed = true;
        }
      }
  }
  for (ValueId v = 0; v < fn.values.size(); ++v)
    if (!known[v]) {
      // A cycle of phis/assigns with no grounded operand.
      fn.values[v].type = ValueType{};
    }
}

//===----------------------------------------------------------------------===//
// Semantic validation
//===----------------------------------------------------------------------===//

void validate_function(const Program &p, int fidx, std::vector<Diagnostic> &diags) {
  const Function &fn = p.functions[fidx];
  CfgInfo cfg = build_cfg(fn);
  DomTree dom = build_dominators(cfg);
  auto err = [&](const Instr &in, const std::string &m) { diags.push_back({in.line, in.col, m}); };
  auto is_ref = [&](const Operand &o) { return !o.is_const && fn.values[o.value].type.is_ref; };
  auto is_int = [&](const Operand &o) { return o.is_const || !fn.values[o.value].type.is_ref; };
  // Position of a definition for dominance: (block, index); params dominate all.
  auto dominated = [&](ValueId v, BlockId ub, std::size_t ui) {
    const ValueInfo &vi = fn.values[v];
    if (vi.def_block < 0) return true;
    BlockId db = static_cast<BlockId>(vi.def_block);
    if (db == ub) return static_cast<std::size_t>(vi.def_index) < ui;
    return dom.dominates(db, ub);
  };
  for (BlockId b = 0; b < fn.blocks.size(); ++b) {
    if (!cfg.reachable[b]) continue;
    for (std::size_t i = 0; i < fn.blocks[b].instrs.size(); ++i) {
      const Instr &in = fn.blocks[b].instrs[i];
      if (in.op == Op::Phi) {
        std::set<BlockId> preds(cfg.preds[b].begin(), cfg.preds[b].end());
        std::set<BlockId> seen;
        for (const auto &inc : in.incoming) {
          if (!preds.count(inc.block)) err(in, "phi names non-predecessor block '" + fn.blocks[inc.block].label + "'");
          if (!seen.insert(inc.block).second) err(in, "phi lists block '" + fn.blocks[inc.block].label + "' twice");
          if (!inc.value.is_const &&
              !dominated(inc.value.value, inc.block, fn.blocks[inc.block].instrs.size()))
            err(in, "SSA violation: '" + fn.values[inc.value.value].name + "' does not dominate its use");
          if (!inc.value.is_const && fn.values[inc.value.value].type.is_ref != fn.values[in.result].type.is_ref)
            err(in, "phi operands mix ref and integer values");
        }
        for (BlockId pb : preds)
          if (cfg.reachable[pb] && !seen.count(pb)) err(in, "phi misses predecessor '" + fn.blocks[pb].label + "'");
        continue;
      }
      for (const auto &a : in.args)
        if (!a.is_const && !dominated(a.value, b, i))
          err(in, "SSA violation: '" + fn.values[a.value].name + "' does not dominate its use");
      switch (in.op) {
      case Op::Alloc:
        if (!in.type && !is_int(in.args[0])) err(in, "allocation size must be an integer");
        break;
      case Op::Free:
        if (!is_ref(in.args[0])) err(in, "free operand must be a ref");
        break;
      case Op::Realloc:
        if (!is_ref(in.args[0])) err(in, "realloc operand must be a ref");
        if (!in.type && !is_int(in.args[1])) err(in, "realloc size must be an integer");
        if (!in.type && in.args[1].is_const && in.args[1].constant <= 0) err(in, "realloc size must be positive");
        break;
      case Op::Gep:
        if (!is_ref(in.args[0])) err(in, "gep base must be a ref");
        if (!is_int(in.args[1])) err(in, "gep offset must be an integer");
        break;
      case Op::Cast:
        if (in.args[0].is_const) err(in, "cast operand must be a value");
        else if (!is_ref(in.args[0]) && in.type->flat().size() != 1)
          err(in, "integer cast target must be a primitive");
        else if (!is_ref(in.args[0]) && in.prim == Prim::Ref)
          err(in, "cannot cast an integer to a ref");
        break;
      case Op::Load:
        if (!is_ref(in.args[0])) err(in, "load address must be a ref");
        break;
      case Op::Store:
        if (!is_ref(in.args[0])) err(in, "store address must be a ref");
        if ((in.prim == Prim::Ref) != is_ref(in.args[1]) || (in.prim == Prim::Ref && in.args[1].is_const))
          err(in, "stored value does not match store type");
        break;
      case Op::Arith:
      case Op::Cmp:
        if (!is_int(in.args[0]) || !is_int(in.args[1])) err(in, "arithmetic on a ref");
        break;
      case Op::Br:
        if (!is_int(in.args[0])) err(in, "branch condition must be an integer");
        break;
      case Op::Call:
      case Op::Spawn: {
        const Function &callee = p.functions[in.callee];
        if (callee.params.size() != in.args.size()) {
          err(in, "call to '" + callee.name + "' with wrong argument count");
          break;
        }
        for (std::size_t k = 0; k < in.args.size(); ++k) {
          bool pref = callee.values[callee.params[k].value].type.is_ref;
          if (pref != is_ref(in.args[k]) || (pref && in.args[k].is_const))
            err(in, "argument " + std::to_string(k) + " of '" + callee.name + "' has the wrong kind");
        }
        if (in.op == Op::Call && in.result != kNoValue && !callee.returns_value)
          err(in, "function '" + callee.name + "' returns no value");
        break;
      }
      case Op::Ret:
        if (fn.returns_value != !in.args.empty())
          err(in, fn.returns_value ? "missing return value" : "function returns no value");
        break;
      default: break;
      }
    }
  }
}

void mark_elided_casts(Program &p) {
  for (auto &fn : p.functions)
    for (auto &blk : fn.blocks)
      for (std::size_t i = 0; i + 1 < blk.instrs.size(); ++i) {
        Instr &a = blk.instrs[i];
        Instr &c = blk.instrs[i + 1];
        if (a.op != Op::Alloc || c.op != Op::Cast || c.args[0].is_const ||
            c.args[0].value != a.result || !fn.values[c.result].type.is_ref)
          continue;
        AllocationSite &s = p.sites[a.site];
        if (!a.type && s.constant_size && static_cast<std::uint64_t>(s.size) == c.type->total_size) {
          s.declared = c.type;
          c.elided = true;
        } else if (a.type && same_layout(*a.type, *c.type) && a.type->tag == c.type->tag) {
          c.elided = true;
        }
      }
}

} // namespace

Program parse_program(std::string_view text) {
  std::vector<Diagnostic> diags;
  auto toks = lex(text, diags);
  if (!diags.empty()) throw ParseError(diags);
  Parser parser(std::move(toks), diags);
  Program p = parser.run();
  if (!diags.empty()) throw ParseError(diags);
  const Function &entry = p.functions[p.entry];
  for (const auto &prm : entry.params) {
    const ValueInfo &vi = entry.values[prm.value];
    if (vi.type.is_ref) diags.push_back({entry.line, 1, "entry parameter '" + vi.name + "' must be an integer"});
    else if (!prm.has_domain) diags.push_back({entry.line, 1, "entry parameter '" + vi.name + "' needs an input domain 'in LO..HI'"});
  }
  for (std::size_t f = 0; f < p.functions.size(); ++f) validate_function(p, static_cast<int>(f), diags);
  if (!diags.empty()) throw ParseError(diags);
  mark_elided_casts(p);
  return p;
}

//===----------------------------------------------------------------------===//
// Printer
//===----------------------------------------------------------------------===//

namespace {

std::string field_type_text(const FieldDesc &f) {
  std::string s = f.element_name();
  if (f.is_array) s += "[" + std::to_string(f.count) + "]";
  return s;
}

void print_init(std::ostringstream &os, const Program &p, const GlobalInit &gi) {
  switch (gi.kind) {
  case GlobalInit::None: break;
  case GlobalInit::Int: os << gi.value; break;
  case GlobalInit::Alloc: {
    const auto &s = p.sites[gi.site];
    os << "alloc " << s.size_text;
    break;
  }
  case GlobalInit::Compound: {
    os << "{ ";
    bool first = true;
    for (const auto &[k, v] : gi.fields) {
      if (!first) os << ", ";
      first = false;
      os << k << ": ";
      print_init(os, p, v);
    }
    os << " }";
    break;
  }
  }
}

std::string param_type_text(const ValueType &vt) {
  if (!vt.is_ref) return std::string(prim_name(vt.width));
  if (vt.pointee) return "ref<" + vt.pointee->tag + ">";
  return "ref";
}

} // namespace

std::string print_program(const Program &p) {
  std::ostringstream os;
  for (std::size_t i = 0; i < p.type_order.size(); ++i) {
    const auto &t = p.types.at(p.type_order[i]);
    os << (p.type_is_union[i] ? "union " : "type ") << t->tag << " = { ";
    for (std::size_t k = 0; k < t->fields.size(); ++k) {
      if (k) os << ", ";
      os << t->fields[k].name << ":" << field_type_text(t->fields[k]);
    }
    os << " }\n";
  }
  for (const auto &g : p.globals) {
    os << "global " << g.name << ": " << g.type_text;
    if (g.init.kind != GlobalInit::None) {
      os << " = ";
      print_init(os, p, g.init);
    }
    os << "\n";
  }
  for (const auto &fn : p.functions) {
    os << "fn " << fn.name << "(";
    for (std::size_t k = 0; k < fn.params.size(); ++k) {
      if (k) os << ", ";
      const auto &prm = fn.params[k];
      os << fn.values[prm.value].name << ":" << param_type_text(fn.values[prm.value].type);
      if (prm.has_domain) os << " in " << prm.lo << ".." << prm.hi;
    }
    os << ")";
    if (fn.returns_value) os << " -> " << param_type_text(fn.ret_type);
    os << " {\n";
    auto opnd = [&](const Operand &o) {
      return o.is_const ? std::to_string(o.constant) : fn.values[o.value].name;
    };
    for (const auto &blk : fn.blocks) {
      os << blk.label << ":\n";
      for (const auto &in : blk.instrs) {
        os << "  ";
        if (in.result != kNoValue) os << fn.values[in.result].name << " = ";
        switch (in.op) {
        case Op::Alloc:
          os << "alloc " << (in.type ? in.type_text : opnd(in.args[0]));
          break;
        case Op::Free: os << "free " << opnd(in.args[0]); break;
        case Op::Realloc:
          os << "realloc " << opnd(in.args[0]) << ", " << (in.type ? in.type_text : opnd(in.args[1]));
          break;
        case Op::Gep: os << "gep " << opnd(in.args[0]) << ", " << opnd(in.args[1]); break;
        case Op::Cast: os << "cast " << opnd(in.args[0]) << ", " << in.type_text; break;
        case Op::Load: os << "load " << prim_name(in.prim) << " " << opnd(in.args[0]); break;
        case Op::Store:
          os << "store " << prim_name(in.prim) << " " << opnd(in.args[0]) << ", " << opnd(in.args[1]);
          break;
        case Op::Assign: os << "assign " << opnd(in.args[0]); break;
        case Op::Arith:
          os << arith_name(in.arith) << " " << opnd(in.args[0]) << ", " << opnd(in.args[1]);
          break;
        case Op::Cmp:
          os << "cmp " << cmp_name(in.cmp) << " " << opnd(in.args[0]) << ", " << opnd(in.args[1]);
          break;
        case Op::Phi:
          os << "phi ";
          for (std::size_t k = 0; k < in.incoming.size(); ++k) {
            if (k) os << ", ";
            os << "[" << fn.blocks[in.incoming[k].block].label << ": " << opnd(in.incoming[k].value) << "]";
          }
          break;
        case Op::Br:
          os << "br " << opnd(in.args[0]) << ", " << fn.blocks[in.targets[0]].label << ", "
             << fn.blocks[in.targets[1]].label;
          break;
        case Op::Jmp: os << "jmp " << fn.blocks[in.targets[0]].label; break;
        case Op::Ret:
          os << "ret";
          if (!in.args.empty()) os << " " << opnd(in.args[0]);
          break;
        case Op::Call:
        case Op::Spawn:
          os << (in.op == Op::Call ? "call " : "spawn ") << p.functions[in.callee].name << "(";
          for (std::size_t k = 0; k < in.args.size(); ++k) {
            if (k) os << ", ";
            os << opnd(in.args[k]);
          }
          os << ")";
          break;
        case Op::GlobalAddr: os << "gaddr " << p.globals[in.global].name; break;
        }
        os << "\n";
      }
    }
    os << "}\n";
  }
  return os.str();
}

} // namespace uriah::hir
