#include "support.hpp"

#include "uriah/allocator.hpp"

#include <doctest.h>

#include <random>

using namespace uriah;

namespace {

struct Types {
  hir::Program p = test::parse(R"(type T = { a: i64, b: i32 }
type U = { a: i32 }
type W = { a: i64, b: i64, c: i32 }
fn main() {
entry:
  t = alloc T
  u = alloc U
  v = alloc 24
  ret
}
)");
  TypePtr T = p.types.at("T"), U = p.types.at("U"), W = p.types.at("W");

  // Sites 0 and 1 safe, site 2 unsafe with 24 bytes.
  SiteTable table() const {
    SiteTable t;
    t.sites[0] = {true, T, 0};
    t.sites[1] = {true, U, 0};
    t.sites[2] = {false, nullptr, 24};
    for (const auto &ty : {T, U, W}) t.types[ty->hash()] = ty;
    return t;
  }
};

} // namespace

TEST_CASE("safe heap allocation and reuse") {
  Types ty;
  HeapState h;
  auto a = h.salloc(ty.T);
  REQUIRE(a);
  const Span *sp = h.span_at(*a);
  REQUIRE(sp);
  CHECK(sp->start == *a);  // first slot at the span start
  CHECK(sp->pool == ty.T->hash());

  SUBCASE("LIFO reuse within a type") {
    std::size_t before = h.pools().at(ty.T->hash()).freelist.size();
    CHECK(h.sfree(*a) == FreeStatus::Ok);
    CHECK(h.pools().at(ty.T->hash()).freelist.size() == before + 1);
    CHECK(h.salloc(ty.T) == a);
  }
  SUBCASE("other types get other spans") {
    auto b = h.salloc(ty.U);
    REQUIRE(b);
    CHECK(h.span_at(*b)->start != sp->start);
    CHECK(h.span_at(*b)->pool == ty.U->hash());
  }
  SUBCASE("free errors") {
    CHECK(h.sfree(*a) == FreeStatus::Ok);
    CHECK(h.sfree(*a) == FreeStatus::DoubleFree);
    auto u = h.ualloc(64);
    CHECK(h.sfree(*u) == FreeStatus::Foreign);
    CHECK(h.sfree(*a + 4) == FreeStatus::Foreign);
  }
  SUBCASE("fresh memory reads as zero") {
    for (std::uint64_t i = 0; i < ty.T->total_size; ++i) CHECK(h.read_byte(*a + i) == 0);
  }
  h.check_all();
  CHECK(h.violations.empty());
}

TEST_CASE("safe reallocation copies the common prefix") {
  Types ty;
  HeapState h;
  auto a = h.salloc(ty.T);
  for (std::uint64_t i = 0; i < 12; ++i) h.write_byte(*a + i, static_cast<std::uint8_t>(i + 1));
  FreeStatus st{};
  auto b = h.srealloc(*a, ty.W, &st);
  REQUIRE(b);
  CHECK(st == FreeStatus::Ok);
  CHECK(h.span_at(*b)->pool == ty.W->hash());
  for (std::uint64_t i = 0; i < 12; ++i) CHECK(h.read_byte(*b + i) == i + 1);
  // The old slot went back to T's freelist, so a stale alias only meets T objects.
  auto c = h.salloc(ty.T);
  CHECK(c == a);
  CHECK(h.slot_at(*a)->second.type_hash == ty.T->hash());

  SUBCASE("same type behaves like free then alloc") {
    HeapState g;
    auto x = g.salloc(ty.T);
    auto y = g.srealloc(*x, ty.T);
    HeapState k;
    auto x2 = k.salloc(ty.T);
    k.sfree(*x2);
    auto y2 = k.salloc(ty.T);
    CHECK(*y - *x == *y2 - *x2);
  }
}

TEST_CASE("unsafe heap") {
  HeapState h;
  auto a = h.ualloc(64);
  CHECK(a == kUnsafeBase);
  CHECK(h.ufree(*a) == FreeStatus::Ok);
  CHECK(h.ualloc(64) == a);  // any reuse is allowed here
  CHECK(mask_unsafe(0x0000DEADBEEFull) == (kUnsafeBase | 0xDEADBEEFull));
  CHECK(mask_unsafe(*a + 100) == *a + 100);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 10000; ++i) {
    std::uint64_t x = rng();
    CHECK(mask_unsafe(mask_unsafe(x)) == mask_unsafe(x));
    CHECK(h.in_unsafe(mask_unsafe(x)));
  }
}

TEST_CASE("trace parsing") {
  auto ev = parse_trace("{\"op\":\"alloc\",\"handle\":0,\"site\":1}\n\n{\"op\":\"write\",\"handle\":0,\"len\":4,\"value\":7}\n");
  REQUIRE(ev.size() == 2);
  CHECK(ev[1].op == TraceEvent::Write);
  CHECK(ev[1].line == 3);
  CHECK(parse_trace(trace_to_jsonl(ev)).size() == 2);
  auto line_of = [](const char *text) {
    try {
      parse_trace(text);
    } catch (const TraceError &e) {
      return e.line;
    }
    return 0;
  };
  CHECK(line_of("{\"op\":\"alloc\",\"handle\":0,\"site\":0}\n{\"op\":\"jump\",\"handle\":0}\n") == 2);
  CHECK(line_of("not json\n") == 1);
  CHECK(line_of("{\"op\":\"read\",\"handle\":0}\n") == 1);  // no len
  CHECK(line_of("{\"op\":\"alloc\",\"handle\":-1,\"site\":0}\n") == 1);
  CHECK(line_of("{\"op\":\"realloc\",\"handle\":0,\"new_handle\":1}\n") == 1);
}

TEST_CASE("replay outcomes") {
  Types ty;
  auto run = [&](const std::string &text, AllocatorOptions opt = {}) {
    HeapState h(opt);
    return replay_trace(h, ty.table(), parse_trace(text));
  };
  auto outcome = [](const TraceReport &r, std::size_t i) { return r.events.at(i).outcome; };
  SUBCASE("use after free on a safe site") {
    auto r = run(R"({"op":"alloc","handle":0,"site":0}
{"op":"free","handle":0}
{"op":"alloc","handle":1,"site":0}
{"op":"stale_write","handle":0,"len":8,"value":1}
)");
    CHECK(outcome(r, 3) == "type-preserved-reuse");
    CHECK(r.violations.empty());
  }
  SUBCASE("double free") {
    auto r = run("{\"op\":\"alloc\",\"handle\":0,\"site\":1}\n{\"op\":\"free\",\"handle\":0}\n{\"op\":\"free\",\"handle\":0}\n");
    CHECK(outcome(r, 2) == "double-free");
  }
  SUBCASE("read before write") {
    auto r = run("{\"op\":\"alloc\",\"handle\":0,\"site\":0}\n{\"op\":\"read\",\"handle\":0,\"len\":12}\n");
    CHECK(outcome(r, 1) == "ubi-zero-read");
  }
  SUBCASE("unsafe overflow is masked") {
    auto r = run("{\"op\":\"alloc\",\"handle\":0,\"site\":2}\n"
                 "{\"op\":\"write\",\"handle\":0,\"offset\":1099511627776,\"len\":8,\"value\":1}\n");
    CHECK(outcome(r, 1) == "masked");
    CHECK(r.events[1].address >= kUnsafeBase);
    CHECK(r.events[1].address < kUnsafeBase + kUnsafeSize);
    CHECK(r.violations.empty());
  }
  SUBCASE("safe overflow is refused") {
    auto r = run("{\"op\":\"alloc\",\"handle\":0,\"site\":1}\n{\"op\":\"write\",\"handle\":0,\"offset\":2,\"len\":4}\n");
    CHECK(outcome(r, 1) == "oob-blocked-by-classification");
  }
  SUBCASE("schema errors") {
    CHECK_THROWS_AS(run("{\"op\":\"alloc\",\"handle\":0,\"site\":9}\n"), TraceError);
    CHECK_THROWS_AS(run("{\"op\":\"free\",\"handle\":4}\n"), TraceError);
    CHECK(run("").events.empty());
  }
}

// Replays random traces and keeps an independent record of the type each
// safe address was first handed out for.
TEST_CASE("random traces keep every safe address single-typed") {
  Types ty;
  SiteTable table = ty.table();
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    auto events = random_trace(seed, 4000, table);
    HeapState h;
    TraceReport r = replay_trace(h, table, events);
    CHECK(r.violations.empty());
    std::map<std::uint64_t, std::uint64_t> first_type;
    std::map<int, std::uint64_t> live;
    for (std::size_t i = 0; i < events.size(); ++i) {
      const TraceEvent &ev = events[i];
      const EventOutcome &o = r.events[i];
      if (o.outcome != "ok" || !h.in_safe(o.address)) continue;
      if (ev.op == TraceEvent::Alloc || ev.op == TraceEvent::Realloc) {
        auto slot = h.slot_at(o.address);
        REQUIRE(slot);
        auto [it, fresh] = first_type.emplace(slot->first, slot->second.type_hash);
        CHECK(it->second == slot->second.type_hash);
      }
    }
    CHECK(first_type.size() > 10);
  }
}
