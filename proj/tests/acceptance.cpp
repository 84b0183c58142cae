// Acceptance checks: one PASS/FAIL line per criterion; exit status 1 if any
// fails.
#include "support.hpp"

#include "uriah/allocator.hpp"
#include "uriah/fuzz.hpp"
#include "uriah/shared.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>

using namespace uriah;

namespace {

constexpr std::uint64_t kFuzzCases = 1000;
constexpr double kFuzzSeconds = 300.0;
constexpr std::size_t kMinCorpus = 30;
constexpr std::int64_t kAccumulated = 8;
constexpr int kTraces = 10;
constexpr std::size_t kTraceEvents = 100000;
constexpr double kAllocatorSeconds = 60.0;
constexpr int kCastPairs = 10000;

int failures = 0;

void report(bool ok, const std::string &name, const std::string &detail) {
  std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
  if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

// ---------------------------------------------------------------------------

void soundness_fuzzing() {
  KitConfig cfg;
  cfg.seed = 1;
  cfg.count = kFuzzCases;
  auto t0 = std::chrono::steady_clock::now();
  FuzzResult r = run_fuzz(cfg, false);
  double secs = seconds_since(t0);
  bool ok = r.cases == kFuzzCases && r.failures.empty() && secs < kFuzzSeconds;
  std::string d = std::to_string(r.cases) + " programs, " + std::to_string(r.sites) + " sites (" +
                  std::to_string(r.safe) + " safe), " + std::to_string(r.failures.size()) +
                  " safe-but-violating, " + fmt(secs) + "s (limit " + fmt(kFuzzSeconds) + "s)";
  if (!r.failures.empty()) d += "; first: seed " + std::to_string(r.failures[0].seed) + " site " +
                                std::to_string(r.failures[0].site) + " " + r.failures[0].detail;
  report(ok, "soundness fuzzing", d);
}

// ---------------------------------------------------------------------------

void corpus_ground_truth() {
  auto cases = test::load_corpus();
  std::size_t labels = 0, mismatches = 0, oracle_mismatches = 0, unsound = 0;
  std::string first;
  for (const auto &c : cases) {
    hir::Program p;
    try {
      p = test::parse(c.text);
    } catch (const std::exception &e) {
      ++mismatches;
      if (first.empty()) first = c.name + ": " + e.what();
      continue;
    }
    Report r = classify_all(p);
    OracleResult o = run_oracle(p);
    if (c.labels.size() != p.sites.size() || o.partial) {
      ++mismatches;
      if (first.empty()) first = c.name + ": label count or partial oracle";
    }
    for (const auto &l : c.labels) {
      ++labels;
      if (l.site < 0 || static_cast<std::size_t>(l.site) >= p.sites.size()) {
        ++mismatches;
        continue;
      }
      const SiteVerdict &s = r.site(l.site);
      bool ok = std::string(s.verdict == Verdict::Safe ? "Safe" : "Unsafe") == l.verdict;
      if (!l.reason.empty()) ok = ok && test::has_reason(p, r, l.site, l.reason);
      if (!l.stage.empty()) ok = ok && s.stage == l.stage;
      if (!ok) {
        ++mismatches;
        if (first.empty()) first = c.name + " site " + std::to_string(l.site);
      }
      bool violates = o.violates(l.site);
      if ((violates ? "violates" : "clean") != l.oracle) {
        ++oracle_mismatches;
        if (first.empty()) first = c.name + " site " + std::to_string(l.site) + " oracle";
      }
      if (s.verdict == Verdict::Safe && violates) ++unsound;
    }
  }
  bool ok = cases.size() >= kMinCorpus && mismatches == 0 && oracle_mismatches == 0 && unsound == 0;
  std::string d = std::to_string(cases.size()) + " programs (min " + std::to_string(kMinCorpus) + "), " +
                  std::to_string(labels) + " labels, " + std::to_string(mismatches) + " verdict mismatches, " +
                  std::to_string(oracle_mismatches) + " oracle mismatches, " + std::to_string(unsound) +
                  " safe-but-violating";
  if (!first.empty()) d += "; first: " + first;
  report(ok, "corpus ground truth", d);
}

// ---------------------------------------------------------------------------

std::string accumulation_program(int size) {
  return R"(type Holder = { cur: ref }
fn bump3(h: ref) {
entry:
  c = load ref h
  d = gep c, 3
  store ref h, d
  store i8 d, 3
  ret
}
fn bump5(h: ref) {
entry:
  c = load ref h
  d = gep c, 5
  store ref h, d
  store i8 d, 5
  ret
}
fn main() {
entry:
  buf = alloc )" + std::to_string(size) + R"(
  h = alloc Holder
  store ref h, buf
  spawn bump3(h)
  spawn bump5(h)
  ret
}
)";
}

void accumulation_micro_example() {
  std::string d;
  bool ok = true;
  for (int size : {9, 8}) {
    hir::Program p = test::parse(accumulation_program(size));
    auto ix = build_index(p);
    auto a = compute_points_to(p, ix);
    auto regions = compute_regions(p, ix, a);
    auto ints = compute_int_ranges(p, ix);
    auto idx = compute_index_ranges(p, ix, a, ints);
    auto events = collect_static_events(p, ix, a, ints, idx);
    auto flags = find_shared_objects(p, ix, a, regions);
    auto v = validate_shared(p, events.sites[0], flags[0], thread_count(p, ix, a, 0), a, idx);
    Report r = classify_all(p);
    bool safe = r.site(0).verdict == Verdict::Safe;
    bool accum_reason = test::has_reason(p, r, 0, "accumulated-index-out-of-bounds");
    bool violates = run_oracle(p).violates(0);
    ok = ok && v.accumulated == kAccumulated && safe == (size == 9) && accum_reason == (size == 8) &&
         violates == (size == 8);
    if (!d.empty()) d += "; ";
    d += "size " + std::to_string(size) + ": accumulated " +
         (v.accumulated ? std::to_string(*v.accumulated) : std::string("none")) + ", " +
         (safe ? "Safe" : "Unsafe") + ", oracle " + (violates ? "violates" : "clean");
  }
  report(ok, "accumulated index micro-example", d);
}

// ---------------------------------------------------------------------------

SiteTable placement(const hir::Program &p, const Report &r) {
  SiteTable t;
  for (const auto &[name, ty] : p.types) t.types[ty->hash()] = ty;
  for (const SiteVerdict &s : r.sites) {
    SitePlacement sp;
    sp.safe = s.verdict == Verdict::Safe;
    if (sp.safe) {
      sp.type = s.type;
      t.types[s.type->hash()] = s.type;
    } else {
      const auto &site = p.sites[s.site];
      sp.size = site.constant_size && site.size > 0 ? static_cast<std::uint64_t>(site.size)
                : site.declared                     ? site.declared->total_size
                                                    : 0;
    }
    t.sites[s.site] = sp;
  }
  return t;
}

void allocator_invariants() {
  hir::Program p = test::parse(test::read_text(test::corpus_dir() / "two_types.hir"));
  SiteTable table = placement(p, classify_all(p));
  // An unsafe site of fixed size so the traces also exercise masking.
  table.sites[static_cast<int>(table.sites.size())] = {false, nullptr, 40};
  auto t0 = std::chrono::steady_clock::now();
  std::size_t events = 0, violations = 0, masked = 0, zero_reads = 0, reuse = 0;
  std::string first;
  for (int i = 0; i < kTraces; ++i) {
    auto trace = random_trace(static_cast<std::uint64_t>(i + 1), kTraceEvents, table);
    HeapState heap;
    TraceReport r = replay_trace(heap, table, trace);
    heap.check_all();
    events += r.events.size();
    violations += r.violations.size() + heap.violations.size();
    if (first.empty() && !r.violations.empty()) first = r.violations[0];
    masked += r.counts["masked"];
    zero_reads += r.counts["ubi-zero-read"];
    reuse += r.counts["type-preserved-reuse"];
  }
  double secs = seconds_since(t0);
  bool ok = events == kTraces * kTraceEvents && violations == 0 && secs < kAllocatorSeconds && masked > 0 &&
            zero_reads > 0 && reuse > 0;
  std::string d = std::to_string(kTraces) + " traces, " + std::to_string(events) + " events, " +
                  std::to_string(violations) + " violations (" + std::to_string(masked) + " masked, " +
                  std::to_string(zero_reads) + " zero reads, " + std::to_string(reuse) + " stale reuses), " +
                  fmt(secs) + "s (limit " + fmt(kAllocatorSeconds) + "s)";
  if (!first.empty()) d += "; first: " + first;
  report(ok, "allocator invariants", d);
}

// ---------------------------------------------------------------------------

void temporal_containment() {
  hir::Program p = test::parse(test::read_text(test::corpus_dir() / "two_types.hir"));
  SiteTable table = placement(p, classify_all(p));
  auto replay = [&](const std::string &name, bool pools_disabled) {
    AllocatorOptions opt;
    opt.pools_disabled = pools_disabled;
    HeapState heap(opt);
    return replay_trace(heap, table, parse_trace(test::read_text(test::corpus_dir() / "traces" / (name + ".jsonl"))));
  };
  auto count = [](const TraceReport &r, const char *k) {
    auto it = r.counts.find(k);
    return it == r.counts.end() ? std::size_t{0} : it->second;
  };
  TraceReport uaf = replay("uaf", false), df = replay("double_free", false), ubi = replay("ubi", false);
  TraceReport control = replay("uaf", true);
  bool ok = count(uaf, "type-preserved-reuse") > 0 && count(uaf, "type-violation") == 0 && uaf.violations.empty() &&
            count(df, "double-free") > 0 && df.violations.empty() && count(ubi, "ubi-zero-read") > 0 &&
            ubi.violations.empty() && !control.violations.empty();
  std::string d = "uaf type-preserved-reuse " + std::to_string(count(uaf, "type-preserved-reuse")) +
                  ", double-free " + std::to_string(count(df, "double-free")) + ", ubi zero reads " +
                  std::to_string(count(ubi, "ubi-zero-read")) + "; pools disabled: " +
                  std::to_string(control.violations.size()) + " type-preservation violations";
  report(ok, "temporal exploit containment", d);
}

// ---------------------------------------------------------------------------

std::vector<bool> safe_sites(const Report &r) {
  std::vector<bool> s;
  for (const auto &v : r.sites) s.push_back(v.verdict == Verdict::Safe);
  return s;
}

bool subset(const std::vector<bool> &a, const std::vector<bool> &b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] && !b[i]) return false;
  return true;
}

void symexec_laws() {
  std::size_t flips = 0, unsound_flips = 0, demotions = 0, monotone_breaks = 0, runs = 0;
  std::string first;
  // Each budget is raised along its own axis with the others at default.
  const std::vector<int> depths{0, 1, 2, 4, 6};
  const std::vector<int> unrolls{0, 1, 2, 3};
  const std::vector<std::uint64_t> paths{1, 4, 64, 4096};
  for (const auto &c : test::load_corpus()) {
    hir::Program p = test::parse(c.text);
    Report stat = classify_static(p);
    Report full = classify_all(p);
    OracleResult o = run_oracle(p);
    for (std::size_t i = 0; i < p.sites.size(); ++i) {
      bool was = stat.sites[i].verdict == Verdict::Safe, now = full.sites[i].verdict == Verdict::Safe;
      if (was && !now) {
        ++demotions;
        if (first.empty()) first = c.name + " demoted site " + std::to_string(i);
      }
      if (!was && now) {
        ++flips;
        if (o.violates(static_cast<int>(i))) {
          ++unsound_flips;
          if (first.empty()) first = c.name + " flipped violating site " + std::to_string(i);
        }
      }
    }
    auto axis = [&](auto values, auto set) {
      std::vector<bool> prev;
      for (auto v : values) {
        ClassifierConfig cfg;
        set(cfg.budget, v);
        auto cur = safe_sites(classify_all(p, cfg));
        ++runs;
        if (!prev.empty() && !subset(prev, cur)) {
          ++monotone_breaks;
          if (first.empty()) first = c.name + " not monotone";
        }
        prev = std::move(cur);
      }
    };
    axis(depths, [](ExplorationBudget &b, int v) { b.depth = v; });
    axis(unrolls, [](ExplorationBudget &b, int v) { b.unroll = v; });
    axis(paths, [](ExplorationBudget &b, std::uint64_t v) { b.paths = v; });
  }
  bool ok = flips > 0 && unsound_flips == 0 && demotions == 0 && monotone_breaks == 0;
  std::string d = std::to_string(flips) + " flips, " + std::to_string(unsound_flips) + " onto violating sites, " +
                  std::to_string(demotions) + " Safe->Unsafe, " + std::to_string(monotone_breaks) +
                  " monotonicity breaks over " + std::to_string(runs) + " budget runs";
  if (!first.empty()) d += "; first: " + first;
  report(ok, "symexec refinement laws", d);
}

// ---------------------------------------------------------------------------

bool prefix_of(const std::vector<std::pair<std::uint64_t, Prim>> &t,
               const std::vector<std::pair<std::uint64_t, Prim>> &tn) {
  if (t.size() > tn.size()) return false;
  return std::equal(t.begin(), t.end(), tn.begin());
}

void cast_lattice() {
  test::TypeGen g(20240);
  int reflexive = 0, transitive_checked = 0, differing = 0, bad = 0;
  for (int i = 0; i < kCastPairs; ++i) {
    TypePtr a = g.type();
    TypePtr b = g.roll(2) ? g.extend(a) : g.type();
    TypePtr c = g.roll(2) ? g.extend(b) : g.type();
    if (!is_compatible_cast(*a, *a)) ++bad;
    ++reflexive;
    bool ab = is_compatible_cast(*b, *a), bc = is_compatible_cast(*c, *b), ac = is_compatible_cast(*c, *a);
    if (ab && bc) {
      ++transitive_checked;
      if (!ac) ++bad;
    }
    // Any differing entry within the shorter layout rules the cast out.
    auto fa = test::flat_of(*a), fb = test::flat_of(*b);
    std::size_t n = std::min(fa.size(), fb.size());
    bool differs = !std::equal(fa.begin(), fa.begin() + static_cast<std::ptrdiff_t>(n), fb.begin());
    if (differs) {
      ++differing;
      if (ab || is_compatible_cast(*a, *b)) ++bad;
    }
    if (ab != prefix_of(fa, fb)) ++bad;
  }
  bool ok = bad == 0 && transitive_checked > kCastPairs / 10 && differing > kCastPairs / 10;
  report(ok, "cast lattice properties",
         std::to_string(kCastPairs) + " pairs: " + std::to_string(reflexive) + " reflexive, " +
             std::to_string(transitive_checked) + " transitive chains, " + std::to_string(differing) +
             " differing prefixes, " + std::to_string(bad) + " counterexamples");
}

} // namespace

int main() {
  const std::vector<std::function<void()>> checks{soundness_fuzzing,    corpus_ground_truth, accumulation_micro_example,
                                                  allocator_invariants, temporal_containment, symexec_laws,
                                                  cast_lattice};
  for (const auto &check : checks) {
    try {
      check();
    } catch (const std::exception &e) {
      report(false, "exception", e.what());
    }
  }
  std::cout << (failures ? "acceptance: " + std::to_string(failures) + " failed" : std::string("acceptance: all passed"))
            << std::endl;
  return failures ? 1 : 0;
}
