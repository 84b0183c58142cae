#include "uriah/fuzz.hpp"

#include <random>
#include <sstream>

namespace uriah {

std::uint64_t case_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 over (seed, index)
  std::uint64_t z = seed * 0x9E3779B97F4A7C15ull + index + 1;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

namespace {

struct TypeInfo {
  const char *name;
  int size;
  std::vector<std::pair<int, const char *>> fields;  // offset, prim
};

const std::vector<TypeInfo> &types() {
  static const std::vector<TypeInfo> t = {
      {"P", 8, {{0, "i32"}, {4, "i32"}}},
      {"Q", 16, {{0, "i32"}, {4, "i32"}, {8, "i64"}}},
      {"T", 16, {{0, "i32"}, {4, "i32"}, {8, "i64"}}},
      {"S", 16, {{0, "i32"}, {4, "i32"}, {8, "i32"}, {12, "i32"}}},
      {"Arr", 16, {{0, "i64"}, {8, "i8"}, {9, "i8"}, {10, "i8"}, {15, "i8"}}},
      {"i32[4]", 16, {{0, "i32"}, {4, "i32"}, {8, "i32"}, {12, "i32"}}},
  };
  return t;
}

const char *kPreamble = R"(type P = { a: i32, b: i32 }
type Q = { a: i32, b: i32, c: i64 }
type T = { tag: i32, pad: i32, v: i64 }
type S = { tag: i32, pad: i32, v: i32, w: i32 }
type Arr = { n: i64, d: i8[8] }
)";

struct Ref {
  std::string name;
  int size;         // -1: not constant
  int type = -1;    // index into types(), if typed
};

class Gen {
public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  std::string run() {
    std::ostringstream out;
    out << kPreamble;
    bool global_init = roll(3) == 0;
    out << "global G: ref\n";
    if (global_init) out << "global H: ref = alloc 16\n";
    worker_off_ = roll(12);
    out << "\nfn put(p: ref, k: i64) {\nentry:\n  q = gep p, k\n  store i8 q, 7\n  ret\n}\n";
    out << "\nfn worker(p: ref) {\nentry:\n  q = gep p, " << worker_off_ << "\n  store i8 q, 5\n  ret\n}\n";
    out << "\nfn mk() -> ref {\nentry:\n  r = alloc 12\n  ret r\n}\n";

    two_inputs_ = roll(2) == 0;
    lo_ = roll(4) == 0 ? -4 : 0;
    out << "\nfn main(n: i64 in " << lo_ << ".." << lo_ + 15;
    if (two_inputs_) out << ", m: i64 in 0..15";
    out << ") {\nentry:\n";
    refs_.emplace_back();
    ints_.push_back({"n"});
    if (two_inputs_) ints_.back().push_back("m");
    if (global_init) {
      std::string g = fresh();
      emit(g + " = gaddr H");
      std::string h = fresh();
      emit(h + " = load ref " + g);
      refs_.back().push_back({h, 16});
    }
    int stmts = 3 + roll(8);
    for (int i = 0; i < stmts; ++i) {
      int r = roll(100);
      if (r < 15) if_stmt();
      else if (r < 25) loop_stmt();
      else if (r < 30 && spawns_ < 2) spawn_stmt();
      else if (r < 35) tag_stmt();
      else simple();
    }
    emit("ret");
    out << body_.str() << "}\n";
    return out.str();
  }

private:
  std::mt19937_64 rng_;
  std::ostringstream body_;
  std::vector<std::vector<Ref>> refs_;
  std::vector<std::vector<std::string>> ints_;
  int tmp_ = 0, label_ = 0, spawns_ = 0, worker_off_ = 0, lo_ = 0;
  bool two_inputs_ = false;
  std::string cur_ = "entry";

  int roll(int k) { return std::uniform_int_distribution<int>(0, k - 1)(rng_); }
  int between(int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng_); }
  std::string fresh() { return "v" + std::to_string(tmp_++); }
  std::string label() { return "b" + std::to_string(label_++); }
  void emit(const std::string &s) { body_ << "  " << s << "\n"; }
  void start(const std::string &l) {
    body_ << l << ":\n";
    cur_ = l;
  }

  std::vector<Ref> all_refs() const {
    std::vector<Ref> r;
    for (const auto &s : refs_) r.insert(r.end(), s.begin(), s.end());
    return r;
  }
  std::string any_int() {
    std::vector<std::string> all;
    for (const auto &s : ints_) all.insert(all.end(), s.begin(), s.end());
    return all[static_cast<std::size_t>(roll(static_cast<int>(all.size())))];
  }
  Ref pick_ref() {
    auto r = all_refs();
    if (r.empty()) return alloc_stmt();
    return r[static_cast<std::size_t>(roll(static_cast<int>(r.size())))];
  }
  const char *any_prim() {
    static const char *p[] = {"i8", "i8", "i16", "i32", "i32", "i64"};
    return p[roll(6)];
  }
  static int width(const std::string &p) { return p == "i8" ? 1 : p == "i16" ? 2 : p == "i32" ? 4 : 8; }

  Ref alloc_stmt() {
    Ref r{fresh(), 0};
    int k = roll(10);
    if (k < 4) {
      r.size = between(1, 24);
      emit(r.name + " = alloc " + std::to_string(r.size));
    } else if (k < 5) {
      std::string s = fresh();
      emit(s + " = add " + any_int() + ", " + std::to_string(between(1, 8)));
      emit(r.name + " = alloc " + s);
      r.size = -1;
    } else if (k < 6) {
      emit(r.name + " = call mk()");
      r.size = 12;
    } else {
      r.type = roll(static_cast<int>(types().size()));
      r.size = types()[r.type].size;
      emit(r.name + " = alloc " + types()[r.type].name);
    }
    refs_.back().push_back(r);
    return r;
  }

  void access(const std::string &addr, const std::string &prim) {
    if (roll(2)) emit("store " + prim + " " + addr + ", " + std::to_string(between(-3, 300)));
    else emit(fresh() + " = load " + prim + " " + addr);
  }

  void const_access() {
    Ref r = pick_ref();
    int off;
    std::string prim;
    if (r.type >= 0 && roll(10) < 7) {
      const auto &f = types()[r.type].fields[static_cast<std::size_t>(roll(static_cast<int>(types()[r.type].fields.size())))];
      off = f.first;
      prim = f.second;
    } else {
      prim = any_prim();
      int hi = r.size > 0 ? r.size : 8;
      off = between(-1, hi);
      if (roll(3)) off = std::max(0, std::min(off, hi - width(prim)));
    }
    std::string x = fresh();
    emit(x + " = gep " + r.name + ", " + std::to_string(off));
    access(x, prim);
  }

  std::string index_expr() {
    std::string i = any_int();
    std::string o = fresh();
    switch (roll(5)) {
    case 0: return i;
    case 1: emit(o + " = and " + i + ", " + std::to_string(between(1, 7))); return o;
    case 2: emit(o + " = mul " + i + ", " + std::to_string(between(1, 4))); return o;
    case 3: emit(o + " = add " + i + ", " + std::to_string(between(-2, 4))); return o;
    default: emit(o + " = sub " + i + ", " + std::to_string(between(0, 3))); return o;
    }
  }

  void var_access() {
    Ref r = pick_ref();
    std::string o = index_expr();
    std::string x = fresh();
    emit(x + " = gep " + r.name + ", " + o);
    access(x, roll(3) ? "i8" : "i32");
  }

  void int_cast() {
    Ref r = pick_ref();
    std::string x = fresh(), v = fresh(), w = fresh();
    int hi = r.size > 0 ? r.size : 8;
    int off = std::max(0, between(0, hi - 4));
    emit(x + " = gep " + r.name + ", " + std::to_string(off));
    if (roll(2)) emit("store i32 " + x + ", " + std::to_string(between(-200, 200)));
    emit(v + " = load i32 " + x);
    emit(w + " = cast " + v + ", " + (roll(2) ? "i8" : "i16"));
  }

  void ref_cast() {
    Ref r = pick_ref();
    int t = roll(static_cast<int>(types().size()));
    const TypeInfo &ti = types()[t];
    std::string c = fresh();
    emit(c + " = cast " + r.name + ", " + ti.name);
    const auto &f = ti.fields[static_cast<std::size_t>(roll(static_cast<int>(ti.fields.size())))];
    std::string x = fresh();
    emit(x + " = gep " + c + ", " + std::to_string(f.first));
    access(x, f.second);
    refs_.back().push_back({c, r.size, t});
  }

  void realloc_stmt() {
    Ref r = pick_ref();
    Ref n{fresh(), between(1, 24)};
    if (r.type >= 0 && roll(2)) {
      n.size = r.size;
      n.type = r.type;
      emit(n.name + " = realloc " + r.name + ", " + types()[r.type].name);
    } else {
      emit(n.name + " = realloc " + r.name + ", " + std::to_string(n.size));
    }
    refs_.back().push_back(n);
  }

  void free_stmt() {
    Ref r = pick_ref();
    if (roll(4) == 0) {
      std::string x = fresh();
      emit(x + " = gep " + r.name + ", " + std::to_string(between(1, 4)));
      emit("free " + x);
    } else {
      emit("free " + r.name);
    }
  }

  void global_stmt() {
    Ref r = pick_ref();
    std::string g = fresh(), y = fresh();
    emit(g + " = gaddr G");
    emit("store ref " + g + ", " + r.name);
    emit(y + " = load ref " + g);
    refs_.back().push_back({y, r.size, r.type});
  }

  void call_stmt() {
    Ref r = pick_ref();
    std::string k = roll(2) ? std::to_string(between(-1, r.size > 0 ? r.size : 8)) : any_int();
    emit("call put(" + r.name + ", " + k + ")");
  }

  void simple() {
    int k = roll(100);
    if (k < 15) alloc_stmt();
    else if (k < 40) const_access();
    else if (k < 55) var_access();
    else if (k < 62) int_cast();
    else if (k < 72) ref_cast();
    else if (k < 78) realloc_stmt();
    else if (k < 83) free_stmt();
    else if (k < 90) global_stmt();
    else call_stmt();
  }

  void if_stmt() {
    static const char *ops[] = {"lt", "le", "gt", "ge", "eq", "ne"};
    std::string c = fresh();
    emit(c + " = cmp " + ops[roll(6)] + " " + any_int() + ", " + std::to_string(between(-1, 16)));
    std::string then = label(), join = label();
    emit("br " + c + ", " + then + ", " + join);
    start(then);
    refs_.emplace_back();
    ints_.emplace_back();
    int n = 1 + roll(2);
    for (int i = 0; i < n; ++i) roll(2) ? var_access() : simple();
    refs_.pop_back();
    ints_.pop_back();
    emit("jmp " + join);
    start(join);
  }

  void loop_stmt() {
    Ref r = pick_ref();
    int trip = between(1, 6), step = between(1, 3), start_v = roll(3) == 0 ? between(-1, 2) : 0;
    std::string head = label(), body = label(), exit = label();
    std::string i = fresh(), c = fresh(), i2 = fresh();
    std::string from = cur_;
    emit("jmp " + head);
    start(head);
    emit(i + " = phi [" + from + ": " + std::to_string(start_v) + "], [" + body + ": " + i2 + "]");
    emit(c + " = cmp lt " + i + ", " + std::to_string(start_v + trip * step));
    emit("br " + c + ", " + body + ", " + exit);
    start(body);
    std::string x = fresh();
    if (roll(2)) {
      emit(x + " = gep " + r.name + ", " + i);
      access(x, "i8");
    } else {
      std::string o = fresh();
      emit(o + " = mul " + i + ", 4");
      emit(x + " = gep " + r.name + ", " + o);
      access(x, "i32");
    }
    emit(i2 + " = add " + i + ", " + std::to_string(step));
    emit("jmp " + head);
    start(exit);
  }

  void spawn_stmt() {
    Ref r = pick_ref();
    emit("spawn worker(" + r.name + ")");
    ++spawns_;
  }

  // A tagged object whose downcast is guarded by its tag.
  void tag_stmt() {
    std::string u = fresh(), t = fresh(), c = fresh(), v = fresh();
    int tag = 1 + roll(2);
    emit(u + " = alloc T");
    emit("store i32 " + u + ", " + std::to_string(tag));
    std::string vp = fresh();
    emit(vp + " = gep " + u + ", 8");
    emit("store i64 " + vp + ", 99");
    emit(t + " = load i32 " + u);
    emit(c + " = cmp eq " + t + ", 1");
    std::string yes = label(), join = label();
    emit("br " + c + ", " + yes + ", " + join);
    start(yes);
    std::string d = fresh(), x = fresh();
    emit(d + " = cast " + u + ", S");
    emit(x + " = gep " + d + ", 8");
    emit(v + " = load i32 " + x);
    emit("jmp " + join);
    start(join);
    refs_.back().push_back({u, 16, 2});
  }
};

} // namespace

std::string generate_program(std::uint64_t seed) { return Gen(seed).run(); }

} // namespace uriah
