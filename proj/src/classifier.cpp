#include "uriah/classifier.hpp"

#include "uriah/alias.hpp"
#include "uriah/cfg.hpp"
#include "uriah/ranges.hpp"
#include "uriah/shared.hpp"
#include "uriah/typecheck.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <cstdio>

namespace uriah {

using namespace hir;

std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
  std::string out;
  char buf[3];
  for (unsigned i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    out += buf;
  }
  return out;
}

void Report::recount() {
  safe = unsafe = symexec_flips = 0;
  for (const auto &s : sites) {
    if (s.verdict == Verdict::Safe) ++safe;
    else ++unsafe;
    if (s.stage == "symexec") ++symexec_flips;
  }
}

std::vector<std::string> Report::reason_strings(const Program &p, int site) const {
  std::vector<std::string> out;
  for (const auto &r : sites[site].reasons) out.push_back(r.str(p));
  return out;
}

std::string Report::to_json(const Program &p, int indent) const {
  nlohmann::ordered_json j;
  j["program_sha256"] = program_sha256;
  j["config"] = {{"budget_depth", config.budget.depth},
                 {"budget_unroll", config.budget.unroll},
                 {"budget_paths", config.budget.paths},
                 {"heap_clone", config.heap_clone},
                 {"symexec", config.symexec}};
  j["sites"] = nlohmann::json::array();
  for (const auto &s : sites) {
    nlohmann::ordered_json o;
    o["id"] = s.site;
    o["fn"] = s.fn >= 0 ? p.functions[s.fn].name : "<global>";
    o["line"] = s.line;
    o["verdict"] = s.verdict == Verdict::Safe ? "Safe" : "Unsafe";
    o["reasons"] = reason_strings(p, s.site);
    o["stage"] = s.stage;
    if (s.type) {
      char hash[17];
      std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(s.type->hash()));
      o["allocated_type"] = {{"hash", hash}, {"size", s.type->total_size}, {"tag", s.type->tag}};
    } else {
      o["allocated_type"] = nullptr;
    }
    j["sites"].push_back(o);
  }
  j["summary"] = {{"safe", safe}, {"unsafe", unsafe}, {"symexec_flips", symexec_flips}};
  if (!exploration.empty()) j["exploration"] = exploration;
  return j.dump(indent);
}

Report classify_static(const Program &p, const ClassifierConfig &cfg) {
  Report r;
  r.program_sha256 = sha256_hex(print_program(p));
  r.config = cfg;

  ProgramIndex ix = build_index(p);
  AliasResult a = compute_points_to(p, ix, {cfg.heap_clone});
  RegionInfo regions = compute_regions(p, ix, a);
  IntRanges ints = compute_int_ranges(p, ix);
  IndexRanges idx = compute_index_ranges(p, ix, a, ints);
  EventSet es = collect_static_events(p, ix, a, ints, idx);
  auto shared = find_shared_objects(p, ix, a, regions);
  auto global_bad = validate_global_aliases(p, a);

  for (const auto &site : p.sites) {
    SiteVerdict v;
    v.site = site.id;
    v.fn = site.function;
    v.line = site.line;
    Where at{site.function, site.line, site.instr_id};
    for (const auto &g : global_bad)
      if (g.site == site.id) v.reasons.push_back({"global", g.reason, at, p.globals[g.global].name});
    const SiteEvents &e = es.sites[site.id];
    auto sp = validate_spatial(p, e, cfg.spatial);
    v.reasons.insert(v.reasons.end(), sp.begin(), sp.end());
    auto sh = shared.find(site.id);
    if (sh != shared.end() && sh->second.shared) {
      v.shared = true;
      auto sv = validate_shared(p, e, sh->second, thread_count(p, ix, a, site.id), a, idx);
      v.reasons.insert(v.reasons.end(), sv.reasons.begin(), sv.reasons.end());
    }
    TypeVerdict tv = validate_type(p, e);
    v.reasons.insert(v.reasons.end(), tv.reasons.begin(), tv.reasons.end());
    if (v.reasons.empty() && !tv.type) v.reasons.push_back({"type", "unresolved-type", at, ""});
    if (v.reasons.empty()) {
      v.verdict = Verdict::Safe;
      v.type = tv.type;
    }
    r.sites.push_back(std::move(v));
  }
  r.recount();
  return r;
}

void prune_false_positives(const Program &p, Report &r, const ExplorationBudget &budget) {
  bool any = false;
  for (const auto &s : r.sites) any = any || s.verdict == Verdict::Unsafe;
  if (!any) return;
  Exploration ex = explore_program(p, budget);
  if (!ex.complete) {
    r.exploration = ex.why;
    return;
  }
  for (auto &s : r.sites) {
    if (s.verdict != Verdict::Unsafe) continue;
    bool prunable = std::all_of(s.reasons.begin(), s.reasons.end(), [](const Reason &x) {
      return x.validator == "spatial" || x.validator == "type";
    });
    if (!prunable) continue;
    const SiteEvents &e = ex.events.sites[s.site];
    if (!validate_spatial(p, e, r.config.spatial).empty()) continue;
    TypeVerdict tv = validate_type(p, e, {.static_casts = false});
    if (!tv.reasons.empty() || !tv.type) continue;
    s.verdict = Verdict::Safe;
    s.reasons.clear();
    s.stage = "symexec";
    s.type = tv.type;
  }
  r.recount();
}

Report classify_all(const Program &p, const ClassifierConfig &cfg) {
  Report r = classify_static(p, cfg);
  if (cfg.symexec) prune_false_positives(p, r, cfg.budget);
  return r;
}

} // namespace uriah
