#include "uriah/fuzz.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

namespace uriah {

namespace {

struct CaseResult {
  std::uint64_t sites = 0, safe = 0, unsafe = 0, unsafe_clean = 0, flips = 0;
  bool partial = false;
  std::vector<FuzzFailure> failures;
};

CaseResult run_case(const KitConfig &cfg, std::uint64_t seed) {
  CaseResult out;
  std::string text = generate_program(seed);
  hir::Program p;
  try {
    p = hir::parse_program(text);
  } catch (const hir::ParseError &e) {
    out.failures.push_back({seed, text, -1, std::string("generated program does not parse: ") + e.what(), {}});
    return out;
  }
  Report r = classify_all(p, cfg.classifier);
  OracleOptions opt;
  opt.cap = cfg.cap;
  OracleResult o = run_oracle(p, opt);
  out.partial = o.partial;
  out.sites = r.sites.size();
  out.safe = r.safe;
  out.unsafe = r.unsafe;
  out.flips = r.symexec_flips;
  for (const SiteVerdict &s : r.sites) {
    bool bad = o.violates(s.site);
    if (s.verdict == Verdict::Unsafe) {
      if (!bad) ++out.unsafe_clean;
      continue;
    }
    if (!bad) continue;
    std::string detail;
    for (const Finding &f : o.findings)
      if (f.site == s.site) {
        if (!detail.empty()) detail += "; ";
        detail += std::string(finding_name(f.kind)) + " at line " + std::to_string(f.line) + ": " + f.detail;
      }
    out.failures.push_back({seed, text, s.site, detail, {}});
  }
  return out;
}

} // namespace

FuzzResult run_fuzz(const KitConfig &cfg, bool write_reproducers) {
  FuzzResult total;
  std::mutex mu;
  std::atomic<std::uint64_t> next{0};
  unsigned jobs = cfg.jobs ? cfg.jobs : std::max(1u, std::thread::hardware_concurrency());
  jobs = static_cast<unsigned>(std::min<std::uint64_t>(jobs, std::max<std::uint64_t>(cfg.count, 1)));

  auto work = [&] {
    for (;;) {
      std::uint64_t i = next.fetch_add(1);
      if (i >= cfg.count) return;
      std::uint64_t seed = case_seed(cfg.seed, i);
      CaseResult c = run_case(cfg, seed);
      std::lock_guard<std::mutex> lock(mu);
      ++total.cases;
      total.sites += c.sites;
      total.safe += c.safe;
      total.unsafe += c.unsafe;
      total.unsafe_clean += c.unsafe_clean;
      total.flips += c.flips;
      if (c.partial) ++total.partial;
      for (FuzzFailure &f : c.failures) {
        if (write_reproducers && total.failures.size() < 32) {
          std::filesystem::path dir(cfg.reproducer_dir);
          std::error_code ec;
          std::filesystem::create_directories(dir, ec);
          auto path = dir / ("fuzz-repro-" + std::to_string(cfg.seed) + "-" + std::to_string(i) + ".hir");
          std::ofstream os(path);
          os << "; seed " << seed << ", site " << f.site << ": " << f.detail << "\n" << f.program;
          if (os) f.reproducer = path.string();
        }
        total.failures.push_back(std::move(f));
      }
    }
  };

  std::vector<std::thread> pool;
  for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(work);
  work();
  for (auto &t : pool) t.join();
  return total;
}

} // namespace uriah
