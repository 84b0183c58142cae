//===- config.hpp - Tool configuration --------------------------*- C++ -*-===//
//
// Defaults, overridden by a JSON file named in URIAH_KIT_CONFIG, overridden
// by command-line flags.  Recognised keys:
//
//   budget_depth, budget_unroll, budget_paths, heap_clone, symexec,
//   seed, count, cap, jobs, json, reproducer_dir
//
//===----------------------------------------------------------------------===//
#pragma once

#include "uriah/classifier.hpp"

#include <string>

namespace uriah {

struct KitConfig {
  ClassifierConfig classifier;
  std::uint64_t seed = 1;
  std::uint64_t count = 100;
  std::uint64_t cap = 1u << 16;  // oracle executions
  unsigned jobs = 0;             // 0: hardware concurrency
  std::string json_path;         // report output
  std::string reproducer_dir = ".";
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Applies the keys of a JSON object to `cfg`.  Unknown keys are errors.
void apply_config_json(KitConfig &cfg, std::string_view json_text);
/// Defaults plus the file named by URIAH_KIT_CONFIG, if set.
KitConfig load_config();

} // namespace uriah
