// uriah-kit: analyze HIR programs, replay allocator traces, run the
// exhaustive oracle, and fuzz the classifier against it.
#include "uriah/allocator.hpp"
#include "uriah/classifier.hpp"
#include "uriah/config.hpp"
#include "uriah/fuzz.hpp"
#include "uriah/hir.hpp"
#include "uriah/oracle.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

using namespace uriah;

namespace {

constexpr int kExitFail = 1;
constexpr int kExitDiag = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::optional<std::string> read_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::optional<hir::Program> load_program(const std::string &path) {
  auto text = read_file(path);
  if (!text) {
    std::cerr << path << ": cannot read file\n";
    return std::nullopt;
  }
  try {
    return hir::parse_program(*text);
  } catch (const hir::ParseError &e) {
    for (const auto &d : e.diagnostics())
      std::cerr << path << ":" << d.line << ":" << d.col << ": error: " << d.message << "\n";
    return std::nullopt;
  }
}

bool write_output(const std::string &path, const std::string &text) {
  if (path.empty() || path == "-") {
    std::cout << text << "\n";
    return true;
  }
  std::ofstream out(path, std::ios::binary);
  out << text << "\n";
  if (!out) {
    std::cerr << path << ": cannot write file\n";
    return false;
  }
  return true;
}

bool to_stdout(const KitConfig &cfg) { return cfg.json_path.empty() || cfg.json_path == "-"; }

std::string summary_line(const Report &r) {
  std::ostringstream os;
  os << "sites " << r.sites.size() << "  safe " << r.safe << "  unsafe " << r.unsafe << "  symexec-flips "
     << r.symexec_flips;
  if (!r.exploration.empty()) os << "  (exploration: " << r.exploration << ")";
  return os.str();
}

int cmd_analyze(const KitConfig &cfg, const std::string &input) {
  auto p = load_program(input);
  if (!p) return kExitDiag;
  Report r = classify_all(*p, cfg.classifier);
  if (!write_output(cfg.json_path, r.to_json(*p))) return kExitDiag;
  (to_stdout(cfg) ? std::cerr : std::cout) << summary_line(r) << "\n";
  return 0;
}

// Placement per site: verdicts from a saved report when one is given (it
// must describe the same program), otherwise from a fresh classification.
SiteTable placement(const hir::Program &p, const KitConfig &cfg, const std::string &report_path) {
  Report r = classify_all(p, cfg.classifier);
  if (!report_path.empty()) {
    auto text = read_file(report_path);
    if (!text) throw UsageError(report_path + ": cannot read file");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(*text);
    } catch (const nlohmann::json::exception &e) {
      throw UsageError(report_path + ": " + e.what());
    }
    if (j.value("program_sha256", "") != r.program_sha256)
      throw UsageError(report_path + ": report is for a different program");
    for (const auto &s : j.at("sites")) {
      int id = s.at("id").get<int>();
      if (id < 0 || static_cast<std::size_t>(id) >= r.sites.size()) throw UsageError(report_path + ": bad site id");
      bool safe = s.at("verdict").get<std::string>() == "Safe";
      if (safe && !r.sites[id].type) throw UsageError(report_path + ": Safe site " + std::to_string(id) + " has no type");
      r.sites[id].verdict = safe ? Verdict::Safe : Verdict::Unsafe;
    }
  }
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
      if (site.constant_size && site.size > 0) sp.size = static_cast<std::uint64_t>(site.size);
      else if (site.declared) sp.size = site.declared->total_size;
    }
    t.sites[s.site] = sp;
  }
  return t;
}

int cmd_run(const KitConfig &cfg, const std::string &input, const std::string &trace_path,
            const std::string &report_path, bool pools_disabled) {
  auto p = load_program(input);
  if (!p) return kExitDiag;
  auto text = read_file(trace_path);
  if (!text) {
    std::cerr << trace_path << ": cannot read file\n";
    return kExitDiag;
  }
  SiteTable table;
  try {
    table = placement(*p, cfg, report_path);
  } catch (const UsageError &e) {
    std::cerr << e.what() << "\n";
    return kExitDiag;
  }
  TraceReport rep;
  try {
    auto events = parse_trace(*text);
    AllocatorOptions opt;
    opt.pools_disabled = pools_disabled;
    HeapState heap(opt);
    rep = replay_trace(heap, table, events);
  } catch (const TraceError &e) {
    std::cerr << trace_path << ": " << e.what() << "\n";
    return kExitDiag;
  }
  if (!write_output(cfg.json_path, rep.to_json())) return kExitDiag;
  std::ostream &os = to_stdout(cfg) ? std::cerr : std::cout;
  os << "events " << rep.events.size();
  for (const auto &[k, n] : rep.counts) os << "  " << k << " " << n;
  os << "  invariant-violations " << rep.violations.size() << "\n";
  for (const auto &v : rep.violations) std::cerr << "violation: " << v << "\n";
  return rep.violations.empty() ? 0 : kExitFail;
}

int cmd_oracle(const KitConfig &cfg, const std::string &input) {
  auto p = load_program(input);
  if (!p) return kExitDiag;
  OracleOptions opt;
  opt.cap = cfg.cap;
  OracleResult o = run_oracle(*p, opt);
  if (!write_output(cfg.json_path, o.to_json(*p))) return kExitDiag;
  std::ostream &os = to_stdout(cfg) ? std::cerr : std::cout;
  os << "inputs " << o.inputs << "  executions " << o.executions << "  findings " << o.findings.size()
     << (o.partial ? "  (partial: cap reached)" : "") << "\n";
  return 0;
}

int cmd_fuzz(const KitConfig &cfg) {
  auto t0 = std::chrono::steady_clock::now();
  FuzzResult r = run_fuzz(cfg);
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << "cases " << r.cases << "  sites " << r.sites << "  safe " << r.safe << "  unsafe " << r.unsafe
            << "  symexec-flips " << r.flips << "  oracle-partial " << r.partial << "\n";
  std::cout << "unsafe-but-clean " << r.unsafe_clean << "/" << r.unsafe << " (" << r.precision_gap() * 100.0
            << "%, information only)\n";
  std::cout << "time " << secs << "s\n";
  if (!cfg.json_path.empty()) {
    nlohmann::ordered_json j;
    j["seed"] = cfg.seed;
    j["count"] = cfg.count;
    j["cases"] = r.cases;
    j["sites"] = r.sites;
    j["safe"] = r.safe;
    j["unsafe"] = r.unsafe;
    j["unsafe_clean"] = r.unsafe_clean;
    j["symexec_flips"] = r.flips;
    j["oracle_partial"] = r.partial;
    j["failures"] = nlohmann::json::array();
    for (const auto &f : r.failures)
      j["failures"].push_back({{"seed", f.seed}, {"site", f.site}, {"detail", f.detail}, {"reproducer", f.reproducer}});
    write_output(cfg.json_path, j.dump(2));
  }
  if (r.failures.empty()) return 0;
  for (const auto &f : r.failures) {
    std::cerr << "soundness violation: case seed " << f.seed << ", site " << f.site << ": " << f.detail << "\n";
    if (!f.reproducer.empty()) std::cerr << "  reproducer: " << f.reproducer << "\n";
  }
  return kExitFail;
}

} // namespace

int main(int argc, char **argv) {
  KitConfig cfg;
  try {
    cfg = load_config();
  } catch (const ConfigError &e) {
    std::cerr << e.what() << "\n";
    return kExitDiag;
  }

  CLI::App app{"Heap-safety classifier, allocator replay and soundness tools"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--json", cfg.json_path, "Write the JSON result here ('-' for stdout)");
  app.add_option("--budget-depth", cfg.classifier.budget.depth, "Call depth explored by path exploration")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--budget-unroll", cfg.classifier.budget.unroll, "Loop unrolling bound for path exploration")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--budget-paths", cfg.classifier.budget.paths, "Path budget for path exploration");
  app.add_flag("--heap-clone", cfg.classifier.heap_clone, "Clone heap objects per call site of allocation wrappers");
  app.add_flag("!--no-symexec", cfg.classifier.symexec, "Skip path exploration");
  app.add_option("--seed", cfg.seed, "Fuzz seed");
  app.add_option("--count", cfg.count, "Fuzz case count");
  app.add_option("--cap", cfg.cap, "Oracle execution cap");
  app.add_option("--jobs", cfg.jobs, "Fuzz worker threads (0: all cores)");
  app.add_option("--reproducer-dir", cfg.reproducer_dir, "Where fuzz reproducers are written");

  std::string input, trace, report;
  bool pools_disabled = false;

  auto *analyze = app.add_subcommand("analyze", "Classify every allocation site of a program");
  analyze->add_option("input", input, "HIR program")->required();

  auto *run = app.add_subcommand("run", "Replay an allocator trace using the program's site verdicts");
  run->add_option("input", input, "HIR program")->required();
  run->add_option("trace", trace, "Trace (JSON lines)")->required();
  run->add_option("report", report, "Report from 'analyze' (classified inline if omitted)");
  run->add_flag("--pools-disabled", pools_disabled, "Share freelists between types of equal slot size (control)");

  auto *oracle = app.add_subcommand("oracle", "Run the exhaustive concrete interpreter");
  oracle->add_option("input", input, "HIR program")->required();

  app.add_subcommand("fuzz", "Check the classifier against the oracle on random programs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    return app.exit(e) == 0 ? 0 : kExitDiag;
  }

  if (analyze->parsed()) return cmd_analyze(cfg, input);
  if (run->parsed()) return cmd_run(cfg, input, trace, report, pools_disabled);
  if (oracle->parsed()) return cmd_oracle(cfg, input);
  return cmd_fuzz(cfg);
}
