// Helpers shared by the unit and acceptance tests.
#pragma once

#include "uriah/cfg.hpp"
#include "uriah/classifier.hpp"
#include "uriah/hir.hpp"
#include "uriah/oracle.hpp"

#include "uriah/layout.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace test {

inline std::filesystem::path source_dir() { return URIAH_SOURCE_DIR; }
inline std::filesystem::path corpus_dir() { return source_dir() / "corpus"; }

inline std::string read_text(const std::filesystem::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline uriah::hir::Program parse(std::string_view text) { return uriah::hir::parse_program(text); }

/// Site id of the allocation on source line `line`.
inline int site_on_line(const uriah::hir::Program &p, int line) {
  for (const auto &s : p.sites)
    if (s.line == line) return s.id;
  return -1;
}

inline bool has_reason(const uriah::hir::Program &p, const uriah::Report &r, int site, const std::string &code) {
  for (const auto &s : r.reason_strings(p, site))
    if (s.find(":" + code + "@") != std::string::npos) return true;
  return false;
}

/// `; expect site=N verdict=V [reason=R] [stage=S] oracle=clean|violates`
struct Label {
  int site = -1;
  std::string verdict, reason, stage, oracle;
};

struct CorpusCase {
  std::string name;
  std::string text;
  std::vector<Label> labels;
};

inline std::vector<CorpusCase> load_corpus() {
  std::vector<CorpusCase> out;
  std::vector<std::filesystem::path> files;
  for (const auto &e : std::filesystem::directory_iterator(corpus_dir()))
    if (e.path().extension() == ".hir") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto &f : files) {
    CorpusCase c{f.filename().string(), read_text(f), {}};
    std::istringstream in(c.text);
    std::string line;
    while (std::getline(in, line)) {
      if (line.rfind("; expect ", 0) != 0) continue;
      Label l;
      std::istringstream kv(line.substr(9));
      std::string tok;
      while (kv >> tok) {
        auto eq = tok.find('=');
        std::string k = tok.substr(0, eq), v = tok.substr(eq + 1);
        if (k == "site") l.site = std::stoi(v);
        else if (k == "verdict") l.verdict = v;
        else if (k == "reason") l.reason = v;
        else if (k == "stage") l.stage = v;
        else if (k == "oracle") l.oracle = v;
      }
      c.labels.push_back(l);
    }
    out.push_back(std::move(c));
  }
  return out;
}

// ---- random allocated-types ------------------------------------------------

/// Independent flattening: (offset, primitive) for every scalar, walking
/// nested compounds and arrays in declaration order.
inline void flatten_into(const uriah::AllocatedType &t, std::uint64_t base,
                         std::vector<std::pair<std::uint64_t, uriah::Prim>> &out) {
  std::uint64_t off = base;
  for (const auto &f : t.fields)
    for (std::uint64_t i = 0; i < f.count; ++i) {
      if (f.prim) {
        out.push_back({off, *f.prim});
        off += uriah::prim_size(*f.prim);
      } else {
        flatten_into(*f.compound, off, out);
        off += f.compound->total_size;
      }
    }
}
inline std::vector<std::pair<std::uint64_t, uriah::Prim>> flat_of(const uriah::AllocatedType &t) {
  std::vector<std::pair<std::uint64_t, uriah::Prim>> out;
  flatten_into(t, 0, out);
  return out;
}

inline uriah::FieldDesc prim_field(std::string name, uriah::Prim p, std::uint64_t count = 1, bool array = false) {
  uriah::FieldDesc f;
  f.name = std::move(name);
  f.prim = p;
  f.count = count;
  f.is_array = array;
  return f;
}
inline uriah::FieldDesc compound_field(std::string name, uriah::TypePtr t, std::uint64_t count = 1, bool array = false) {
  uriah::FieldDesc f;
  f.name = std::move(name);
  f.compound = std::move(t);
  f.count = count;
  f.is_array = array;
  return f;
}

class TypeGen {
public:
  explicit TypeGen(std::uint64_t seed) : rng_(seed) {}

  uriah::FieldDesc field(int depth) {
    std::string name = "f" + std::to_string(next_++);
    int k = roll(10);
    if (depth > 0 && k < 2) return compound_field(name, type(depth - 1), roll(3) == 0 ? 1 + roll(3) : 1, roll(3) == 0);
    uriah::Prim p = static_cast<uriah::Prim>(roll(5));
    if (k < 4) return prim_field(name, p, 1 + roll(4), true);
    return prim_field(name, p);
  }

  uriah::TypePtr type(int depth = 2) {
    std::vector<uriah::FieldDesc> fs;
    int n = 1 + roll(4);
    for (int i = 0; i < n; ++i) fs.push_back(field(depth));
    return uriah::make_type("T" + std::to_string(next_++), std::move(fs));
  }

  /// A type whose flattened layout starts with `t`'s: `t` nested as the
  /// first field, or `t`'s fields repeated and then extended.
  uriah::TypePtr extend(const uriah::TypePtr &t) {
    std::vector<uriah::FieldDesc> fs;
    if (roll(2)) fs.push_back(compound_field("head", t));
    else fs = t->fields;
    int extra = roll(3);
    for (int i = 0; i < extra; ++i) fs.push_back(field(1));
    return uriah::make_type("X" + std::to_string(next_++), std::move(fs));
  }

  int roll(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng_); }
  std::mt19937_64 &rng() { return rng_; }

private:
  std::mt19937_64 rng_;
  int next_ = 0;
};

} // namespace test
