//===- shared.hpp - Objects reachable from several threads ------*- C++ -*-===//
#pragma once

#include "uriah/events.hpp"
#include "uriah/ranges.hpp"

#include <map>
#include <optional>

namespace uriah {

struct SharedFlag {
  bool shared = false;
  std::string evidence;  // "spawn-argument" | "global-alias" | "heap-alias"
};

/// Sites that more than one thread may touch.  Nothing is shared in a
/// program without reachable spawns.  Otherwise a site is shared if a spawn
/// argument may point to it, or any alias to it was read out of global or
/// heap memory.
std::map<int, SharedFlag> find_shared_objects(const hir::Program &p, const hir::ProgramIndex &ix,
                                              const AliasResult &a, const RegionInfo &regions);

struct ThreadsSet {
  std::optional<hir::Count> count;      // nullopt: unknown
  std::vector<std::uint32_t> spawns;    // contributing spawn instructions
};

/// Threads that may run a function touching the site: the total execution
/// count of the spawns whose thread reaches such a function.
ThreadsSet thread_count(const hir::Program &p, const hir::ProgramIndex &ix, const AliasResult &a,
                        int site);

struct SharedVerdict {
  std::vector<Reason> reasons;
  std::optional<std::int64_t> accumulated;  // largest index reached by accumulation
};

SharedVerdict validate_shared(const hir::Program &p, const SiteEvents &e, const SharedFlag &flag,
                              const ThreadsSet &threads, const AliasResult &a,
                              const IndexRanges &idx);

} // namespace uriah
