#include "support.hpp"

#include "uriah/classifier.hpp"
#include "uriah/config.hpp"
#include "uriah/fuzz.hpp"
#include "uriah/oracle.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>

using namespace uriah;

namespace {

hir::Program corpus(const std::string &name) {
  return test::parse(test::read_text(test::corpus_dir() / (name + ".hir")));
}

} // namespace

TEST_CASE("oracle findings") {
  SUBCASE("constant accesses are clean") {
    auto o = run_oracle(corpus("const_buffer"));
    CHECK(o.findings.empty());
    CHECK_FALSE(o.partial);
  }
  SUBCASE("off-by-one loop writes past the end") {
    auto p = corpus("off_by_one_loop");
    auto o = run_oracle(p);
    REQUIRE_FALSE(o.findings.empty());
    CHECK(o.findings[0].kind == FindingKind::OutOfBounds);
    CHECK(o.violates(0));
    auto j = nlohmann::json::parse(o.to_json(p));
    CHECK(j["findings"][0]["kind"] == "oob");
  }
  SUBCASE("guarded downcast is clean") {
    CHECK(run_oracle(corpus("guarded_downcast")).findings.empty());
  }
  SUBCASE("temporal findings do not count against spatial verdicts") {
    auto o = run_oracle(corpus("use_after_free"));
    REQUIRE_FALSE(o.findings.empty());
    CHECK(o.findings[0].kind == FindingKind::UseAfterFree);
    CHECK_FALSE(o.violates(0));
  }
  SUBCASE("a small cap leaves the run partial") {
    OracleOptions opt;
    opt.cap = 2;
    auto o = run_oracle(corpus("input_loop"), opt);
    CHECK(o.partial);
    CHECK(o.inputs <= 2);
  }
}

TEST_CASE("report JSON") {
  auto p = corpus("guarded_downcast");
  Report a = classify_all(p), b = classify_all(p);
  CHECK(a.to_json(p) == b.to_json(p));
  auto j = nlohmann::json::parse(a.to_json(p));
  CHECK(j["program_sha256"].get<std::string>().size() == 64);
  CHECK(j["sites"].size() == p.sites.size());
  CHECK(j["sites"][1]["verdict"] == "Safe");
  CHECK(j["sites"][1]["stage"] == "symexec");
  CHECK(a.safe + a.unsafe == p.sites.size());
  // The hash covers the program text, not the verdicts.
  auto q = test::parse(test::read_text(test::corpus_dir() / "guarded_downcast.hir") + "\n");
  CHECK(classify_all(q).program_sha256 == a.program_sha256);
}

TEST_CASE("fuzzing") {
  KitConfig cfg;
  cfg.seed = 1;
  cfg.count = 100;
  cfg.jobs = 2;
  SUBCASE("no failures on a short run") {
    FuzzResult r = run_fuzz(cfg, false);
    CHECK(r.cases == 100);
    CHECK(r.failures.empty());
    CHECK(r.sites > 100);
    CHECK(r.safe > 0);
  }
  SUBCASE("same result with any number of workers") {
    FuzzResult a = run_fuzz(cfg, false);
    cfg.jobs = 1;
    FuzzResult b = run_fuzz(cfg, false);
    CHECK(a.sites == b.sites);
    CHECK(a.safe == b.safe);
    CHECK(a.flips == b.flips);
  }
  SUBCASE("a weakened free check is caught") {
    cfg.count = 300;
    cfg.classifier.spatial.skip_free_check = true;
    auto dir = std::filesystem::temp_directory_path() / "uriah-fuzz-mutation";
    std::filesystem::remove_all(dir);
    cfg.reproducer_dir = dir.string();
    FuzzResult r = run_fuzz(cfg);
    REQUIRE_FALSE(r.failures.empty());
    CHECK(std::filesystem::exists(r.failures[0].reproducer));
    // The reproducer is a valid program that still shows the failure.
    auto p = test::parse(test::read_text(r.failures[0].reproducer));
    CHECK(run_oracle(p).violates(r.failures[0].site));
    std::filesystem::remove_all(dir);
  }
  SUBCASE("zero cases") {
    cfg.count = 0;
    FuzzResult r = run_fuzz(cfg, false);
    CHECK(r.cases == 0);
    CHECK(r.failures.empty());
  }
  SUBCASE("generated programs are reproducible") {
    CHECK(generate_program(case_seed(1, 5)) == generate_program(case_seed(1, 5)));
    CHECK(case_seed(1, 5) != case_seed(2, 5));
  }
}

TEST_CASE("configuration") {
  KitConfig cfg;
  apply_config_json(cfg, R"({"budget_depth": 6, "heap_clone": true, "seed": 9})");
  CHECK(cfg.classifier.budget.depth == 6);
  CHECK(cfg.classifier.heap_clone);
  CHECK(cfg.seed == 9);
  CHECK_THROWS_AS(apply_config_json(cfg, R"({"budget_dept": 6})"), ConfigError);
  CHECK_THROWS_AS(apply_config_json(cfg, R"({"budget_unroll": -1})"), ConfigError);
  CHECK_THROWS_AS(apply_config_json(cfg, R"({"seed": "x"})"), ConfigError);
  CHECK_THROWS_AS(apply_config_json(cfg, "[1]"), ConfigError);
}
