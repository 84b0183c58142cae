#include "uriah/config.hpp"

#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace uriah {

void apply_config_json(KitConfig &cfg, std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error &e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  try {
    for (const auto &[k, v] : j.items()) {
      if (k == "budget_depth") cfg.classifier.budget.depth = v.get<int>();
      else if (k == "budget_unroll") cfg.classifier.budget.unroll = v.get<int>();
      else if (k == "budget_paths") cfg.classifier.budget.paths = v.get<std::uint64_t>();
      else if (k == "heap_clone") cfg.classifier.heap_clone = v.get<bool>();
      else if (k == "symexec") cfg.classifier.symexec = v.get<bool>();
      else if (k == "seed") cfg.seed = v.get<std::uint64_t>();
      else if (k == "count") cfg.count = v.get<std::uint64_t>();
      else if (k == "cap") cfg.cap = v.get<std::uint64_t>();
      else if (k == "jobs") cfg.jobs = v.get<unsigned>();
      else if (k == "json") cfg.json_path = v.get<std::string>();
      else if (k == "mutate_skip_lower_bound") cfg.classifier.spatial.skip_lower_bound = v.get<bool>();
      else if (k == "mutate_skip_free_check") cfg.classifier.spatial.skip_free_check = v.get<bool>();
      else if (k == "reproducer_dir") cfg.reproducer_dir = v.get<std::string>();
      else throw ConfigError("config: unknown key '" + k + "'");
    }
  } catch (const nlohmann::json::type_error &e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (cfg.classifier.budget.depth < 0 || cfg.classifier.budget.unroll < 0)
    throw ConfigError("config: budgets must be non-negative");
}

KitConfig load_config() {
  KitConfig cfg;
  const char *path = std::getenv("URIAH_KIT_CONFIG");
  if (!path || !*path) return cfg;
  std::ifstream in(path);
  if (!in) throw ConfigError(std::string("config: cannot read ") + path);
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_json(cfg, ss.str());
  return cfg;
}

} // namespace uriah
