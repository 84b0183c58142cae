//===- classifier.hpp - Per-site safety verdicts ----------------*- C++ -*-===//
//
// A site is Safe when its global aliases are of an allowed class, every
// bounds rule passes (plus the thread-sharing rules if other threads can
// reach it), and its allocated-type is resolved with every cast, access
// and integer cast consistent with it.  Path exploration may afterwards
// clear sites whose only failures were bounds or type rules.
//
//===----------------------------------------------------------------------===//
#pragma once

#include "uriah/events.hpp"
#include "uriah/spatial.hpp"
#include "uriah/symexec.hpp"

#include <string>
#include <vector>

namespace uriah {

enum class Verdict : std::uint8_t { Safe, Unsafe };

struct SiteVerdict {
  int site = -1;
  int fn = -1;   // -1: global initializer
  int line = 0;
  Verdict verdict = Verdict::Unsafe;
  std::vector<Reason> reasons;   // empty iff Safe
  std::string stage = "static";  // "static" | "symexec"
  TypePtr type;                  // Safe only
  bool shared = false;
};

struct ClassifierConfig {
  ExplorationBudget budget;
  bool heap_clone = false;
  bool symexec = true;
  SpatialOptions spatial;  // test-only mutations
};

struct Report {
  std::string program_sha256;
  ClassifierConfig config;
  std::vector<SiteVerdict> sites;  // by site id
  std::size_t safe = 0;
  std::size_t unsafe = 0;
  std::size_t symexec_flips = 0;
  std::string exploration;  // why path exploration gave up, if it did

  const SiteVerdict &site(int id) const { return sites[id]; }
  void recount();
  std::string to_json(const hir::Program &p, int indent = 2) const;
  /// Codes of a site's reasons, e.g. "spatial:index-out-of-bounds@main:7".
  std::vector<std::string> reason_strings(const hir::Program &p, int site) const;
};

std::string sha256_hex(std::string_view data);

/// Static stages only.
Report classify_static(const hir::Program &p, const ClassifierConfig &cfg = {});

/// Clears Unsafe sites that failed only bounds or type rules when the
/// explored paths show those rules hold.  Never makes a site Unsafe.  Gives
/// up (changing nothing) if the budget runs out or the program spawns.
void prune_false_positives(const hir::Program &p, Report &r, const ExplorationBudget &budget);

/// classify_static followed by prune_false_positives when enabled.
Report classify_all(const hir::Program &p, const ClassifierConfig &cfg = {});

} // namespace uriah
