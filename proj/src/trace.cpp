#include "uriah/allocator.hpp"

#include <json.hpp>

#include <limits>
#include <random>
#include <sstream>

namespace uriah {

using nlohmann::json;

std::string_view trace_op_name(TraceEvent::Op op) {
  switch (op) {
  case TraceEvent::Alloc: return "alloc";
  case TraceEvent::Free: return "free";
  case TraceEvent::Realloc: return "realloc";
  case TraceEvent::Write: return "write";
  case TraceEvent::Read: return "read";
  case TraceEvent::StaleRead: return "stale_read";
  case TraceEvent::StaleWrite: return "stale_write";
  }
  return "?";
}

namespace {

std::uint64_t parse_u64(const json &v, int line, const char *field) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) {
    auto x = v.get<std::int64_t>();
    if (x < 0) throw TraceError(line, std::string(field) + " must be non-negative");
    return static_cast<std::uint64_t>(x);
  }
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    try {
      std::size_t used = 0;
      std::uint64_t x = std::stoull(s, &used, 0);
      if (used == s.size()) return x;
    } catch (const std::exception &) {
    }
  }
  throw TraceError(line, std::string(field) + " must be an unsigned integer");
}

int parse_int(const json &o, const char *field, int line, bool required) {
  if (!o.contains(field)) {
    if (required) throw TraceError(line, std::string("missing ") + field);
    return -1;
  }
  if (!o[field].is_number_integer()) throw TraceError(line, std::string(field) + " must be an integer");
  auto x = o[field].get<std::int64_t>();
  if (x < 0 || x > std::numeric_limits<int>::max())
    throw TraceError(line, std::string(field) + " must be a non-negative int");
  return static_cast<int>(x);
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << v;
  return os.str();
}

} // namespace

std::vector<TraceEvent> parse_trace(std::string_view text) {
  std::vector<TraceEvent> out;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
    json o;
    try {
      o = json::parse(raw);
    } catch (const json::parse_error &e) {
      throw TraceError(line, std::string("bad JSON: ") + e.what());
    }
    if (!o.is_object() || !o.contains("op") || !o["op"].is_string()) throw TraceError(line, "missing op");
    TraceEvent ev;
    ev.line = line;
    const std::string op = o["op"].get<std::string>();
    if (op == "alloc") ev.op = TraceEvent::Alloc;
    else if (op == "free") ev.op = TraceEvent::Free;
    else if (op == "realloc") ev.op = TraceEvent::Realloc;
    else if (op == "write") ev.op = TraceEvent::Write;
    else if (op == "read") ev.op = TraceEvent::Read;
    else if (op == "stale_read") ev.op = TraceEvent::StaleRead;
    else if (op == "stale_write") ev.op = TraceEvent::StaleWrite;
    else throw TraceError(line, "unknown op '" + op + "'");
    ev.handle = parse_int(o, "handle", line, true);
    if (ev.op == TraceEvent::Alloc) ev.site = parse_int(o, "site", line, true);
    if (ev.op == TraceEvent::Realloc) {
      ev.new_handle = parse_int(o, "new_handle", line, true);
      if (!o.contains("type_hash") && !o.contains("size")) throw TraceError(line, "realloc needs type_hash or size");
    }
    if (o.contains("type_hash")) ev.type_hash = parse_u64(o["type_hash"], line, "type_hash");
    if (o.contains("size")) ev.size = parse_u64(o["size"], line, "size");
    bool access = ev.op == TraceEvent::Write || ev.op == TraceEvent::Read || ev.op == TraceEvent::StaleRead ||
                  ev.op == TraceEvent::StaleWrite;
    if (access) {
      if (!o.contains("len")) throw TraceError(line, "missing len");
      ev.offset = o.contains("offset") ? parse_u64(o["offset"], line, "offset") : 0;
      ev.len = parse_u64(o["len"], line, "len");
      if (ev.len == 0 || ev.len > 4096) throw TraceError(line, "len must be in 1..4096");
      if (o.contains("value")) ev.value = parse_u64(o["value"], line, "value");
    }
    if (o.contains("thread")) ev.thread = parse_int(o, "thread", line, false);
    out.push_back(ev);
  }
  return out;
}

std::string trace_to_jsonl(const std::vector<TraceEvent> &events) {
  std::string out;
  for (const auto &ev : events) {
    nlohmann::ordered_json o;
    o["op"] = trace_op_name(ev.op);
    if (ev.op == TraceEvent::Alloc) o["site"] = ev.site;
    o["handle"] = ev.handle;
    if (ev.op == TraceEvent::Realloc) o["new_handle"] = ev.new_handle;
    if (ev.type_hash) o["type_hash"] = hex(*ev.type_hash);
    if (ev.size) o["size"] = *ev.size;
    if (ev.op >= TraceEvent::Write) {
      o["offset"] = ev.offset;
      o["len"] = ev.len;
      if (ev.op == TraceEvent::Write || ev.op == TraceEvent::StaleWrite) o["value"] = ev.value;
    }
    o["thread"] = ev.thread;
    out += o.dump() + "\n";
  }
  return out;
}

std::string TraceReport::to_json(bool per_event) const {
  nlohmann::ordered_json j;
  if (per_event) {
    j["events"] = json::array();
    for (const auto &e : events) {
      nlohmann::ordered_json o;
      o["index"] = e.index;
      o["outcome"] = e.outcome;
      o["address"] = hex(e.address);
      if (!e.detail.empty()) o["detail"] = e.detail;
      j["events"].push_back(o);
    }
  }
  nlohmann::ordered_json counts_j = nlohmann::ordered_json::object();
  for (const auto &[k, v] : counts) counts_j[k] = v;
  j["counts"] = counts_j;
  j["violations"] = violations;
  j["invariants"] = {{"checksum", hex(checksum)},
                     {"live_slots", live_slots},
                     {"free_slots", free_slots},
                     {"spans", spans},
                     {"pools", pools}};
  return j.dump(2);
}

namespace {

struct Handle {
  std::uint64_t addr = 0;
  std::uint64_t size = 0;  // object bytes
  bool safe = false;
  TypePtr type;
  bool live = true;
};

class Replayer {
public:
  Replayer(HeapState &h, const SiteTable &t) : heap_(h), table_(t) {}

  TraceReport run(const std::vector<TraceEvent> &events) {
    for (std::size_t i = 0; i < events.size(); ++i) {
      EventOutcome o = apply(events[i]);
      o.index = i;
      ++rep_.counts[o.outcome];
      for (auto &v : heap_.violations) rep_.violations.push_back("event " + std::to_string(i) + ": " + v);
      heap_.violations.clear();
      rep_.events.push_back(std::move(o));
    }
    heap_.check_all();
    for (auto &v : heap_.violations) rep_.violations.push_back("final: " + v);
    heap_.violations.clear();
    rep_.checksum = heap_.checksum();
    for (const auto &[a, s] : heap_.slots()) (s.state == SlotState::Live ? rep_.live_slots : rep_.free_slots)++;
    rep_.spans = heap_.spans().size();
    rep_.pools = heap_.pools().size();
    return std::move(rep_);
  }

private:
  HeapState &heap_;
  const SiteTable &table_;
  TraceReport rep_;
  std::map<int, Handle> handles_;

  Handle &handle(const TraceEvent &ev) {
    auto it = handles_.find(ev.handle);
    if (it == handles_.end()) throw TraceError(ev.line, "unknown handle " + std::to_string(ev.handle));
    return it->second;
  }

  void fresh_handle(const TraceEvent &ev, int h) {
    if (handles_.count(h)) throw TraceError(ev.line, "handle " + std::to_string(h) + " reused");
  }

  static std::uint8_t byte_of(std::uint64_t value, std::uint64_t i) {
    return static_cast<std::uint8_t>(value >> (8 * (i % 8)));
  }

  // Reads or writes through a handle's base address; `route` maps each
  // byte address to where the access really lands.
  template <class Route>
  bool touch(const TraceEvent &ev, std::uint64_t base, Route route) {
    bool write = ev.op == TraceEvent::Write || ev.op == TraceEvent::StaleWrite;
    bool untouched = true, zero = true;
    for (std::uint64_t i = 0; i < ev.len; ++i) {
      std::uint64_t a = route(base + ev.offset + i);
      if (write) {
        heap_.write_byte(a, byte_of(ev.value, i));
      } else {
        bool fresh = heap_.untouched(a);
        std::uint8_t v = heap_.read_byte(a);
        // Masked overflows may dirty unsafe memory before it is handed out,
        // so the zeroing contract is only checked on the safe heap.
        if (fresh && v != 0 && heap_.in_safe(a)) heap_.violations.push_back("fresh byte at " + std::to_string(a) + " reads nonzero");
        untouched = untouched && fresh;
        zero = zero && v == 0;
      }
    }
    return !write && untouched && zero;
  }

  EventOutcome access(const TraceEvent &ev, Handle &h) {
    EventOutcome o{0, "ok", h.addr + ev.offset, ""};
    bool stale = ev.op == TraceEvent::StaleRead || ev.op == TraceEvent::StaleWrite || !h.live;
    if (!h.safe) {
      bool outside = ev.offset + ev.len > h.size || stale;
      bool escaped = false;
      touch(ev, h.addr, [&](std::uint64_t a) {
        std::uint64_t m = mask_unsafe(a);
        if (!heap_.in_unsafe(m)) escaped = true;
        return m;
      });
      if (escaped) heap_.violations.push_back("unsafe access escaped the unsafe region");
      o.address = mask_unsafe(h.addr + ev.offset);
      if (outside) o.outcome = "masked";
      return o;
    }
    if (stale) {
      std::uint64_t a = h.addr + ev.offset;
      auto slot = heap_.slot_at(a);
      if (!slot || !heap_.span_at(a)) {
        o.outcome = "error";
        o.detail = "stale access to unmapped memory";
        return o;
      }
      touch(ev, h.addr, [](std::uint64_t x) { return x; });
      if (slot->second.type_hash == h.type->hash()) {
        o.outcome = "type-preserved-reuse";
      } else {
        o.outcome = "type-violation";
        o.detail = "slot now holds type " + hex(slot->second.type_hash) + ", stale alias expects " + hex(h.type->hash());
        heap_.violations.push_back("type preservation: " + o.detail);
      }
      return o;
    }
    if (ev.offset + ev.len > h.size) {
      o.outcome = "oob-blocked-by-classification";
      o.detail = "object has " + std::to_string(h.size) + " bytes";
      return o;
    }
    if (touch(ev, h.addr, [](std::uint64_t x) { return x; })) o.outcome = "ubi-zero-read";
    return o;
  }

  EventOutcome apply(const TraceEvent &ev) {
    switch (ev.op) {
    case TraceEvent::Alloc: {
      auto pl = table_.sites.find(ev.site);
      if (pl == table_.sites.end()) throw TraceError(ev.line, "no allocation site " + std::to_string(ev.site));
      fresh_handle(ev, ev.handle);
      Handle h;
      h.safe = pl->second.safe;
      std::optional<std::uint64_t> addr;
      if (h.safe) {
        h.type = pl->second.type;
        h.size = h.type->total_size;
        addr = heap_.salloc(h.type);
      } else {
        h.size = pl->second.size ? pl->second.size : ev.size.value_or(0);
        if (h.size == 0) throw TraceError(ev.line, "unsafe variable-size alloc needs size");
        addr = heap_.ualloc(h.size);
      }
      if (!addr) return {0, "error", 0, "address space exhausted"};
      h.addr = *addr;
      handles_[ev.handle] = h;
      return {0, "ok", h.addr, ""};
    }
    case TraceEvent::Free: {
      Handle &h = handle(ev);
      if (!h.live) return {0, "double-free", h.addr, ""};
      FreeStatus st = h.safe ? heap_.sfree(h.addr) : heap_.ufree(h.addr);
      h.live = false;
      if (st == FreeStatus::DoubleFree) return {0, "double-free", h.addr, ""};
      if (st == FreeStatus::Foreign) return {0, "error", h.addr, "foreign address"};
      return {0, "ok", h.addr, ""};
    }
    case TraceEvent::Realloc: {
      Handle &h = handle(ev);
      fresh_handle(ev, ev.new_handle);
      if (!h.live) return {0, "double-free", h.addr, "realloc of a freed handle"};
      Handle n;
      n.safe = h.safe;
      std::optional<std::uint64_t> addr;
      if (h.safe) {
        std::optional<TypePtr> t;
        if (ev.type_hash) {
          auto it = table_.types.find(*ev.type_hash);
          if (it == table_.types.end()) throw TraceError(ev.line, "unknown type_hash");
          t = realloc_type_transition(h.type, it->second);
        } else {
          t = realloc_type_transition(h.type, *ev.size);
        }
        if (!t) return {0, "error", h.addr, "realloc would change the allocated-type"};
        n.type = *t;
        n.size = n.type->total_size;
        FreeStatus st;
        addr = heap_.srealloc(h.addr, n.type, &st);
        if (st == FreeStatus::DoubleFree) return {0, "double-free", h.addr, ""};
      } else {
        n.size = ev.size ? *ev.size : 0;
        if (ev.type_hash) {
          auto it = table_.types.find(*ev.type_hash);
          if (it == table_.types.end()) throw TraceError(ev.line, "unknown type_hash");
          n.size = it->second->total_size;
        }
        if (n.size == 0) throw TraceError(ev.line, "realloc size must be positive");
        addr = heap_.ualloc(n.size);
        if (addr) {
          for (std::uint64_t i = 0; i < std::min(h.size, n.size); ++i)
            heap_.write_byte(*addr + i, heap_.read_byte(h.addr + i));
          heap_.ufree(h.addr);
        }
      }
      if (!addr) return {0, "error", h.addr, "address space exhausted"};
      h.live = false;
      n.addr = *addr;
      handles_[ev.new_handle] = n;
      return {0, "ok", n.addr, ""};
    }
    default: return access(ev, handle(ev));
    }
  }
};

} // namespace

TraceReport replay_trace(HeapState &heap, const SiteTable &table, const std::vector<TraceEvent> &events) {
  return Replayer(heap, table).run(events);
}

std::vector<TraceEvent> random_trace(std::uint64_t seed, std::size_t n, const SiteTable &table) {
  std::mt19937_64 rng(seed);
  std::vector<int> site_ids;
  for (const auto &[id, _] : table.sites) site_ids.push_back(id);
  std::vector<TraceEvent> out;
  if (site_ids.empty()) return out;
  struct H {
    int id;
    std::uint64_t size;
    bool safe;
    TypePtr type;
  };
  std::vector<H> live, dead;
  int next = 0;
  auto pick = [&](auto &v) -> std::size_t { return std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng); };
  auto roll = [&](int k) { return std::uniform_int_distribution<int>(0, k - 1)(rng); };
  while (out.size() < n) {
    int r = roll(100);
    TraceEvent ev;
    ev.thread = roll(3);
    if (live.empty() || (r < 30 && live.size() < 2000)) {
      int site = site_ids[pick(site_ids)];
      const SitePlacement &pl = table.sites.at(site);
      ev.op = TraceEvent::Alloc;
      ev.site = site;
      ev.handle = next++;
      H h{ev.handle, 0, pl.safe, pl.type};
      if (pl.safe) h.size = pl.type->total_size;
      else if (pl.size) h.size = pl.size;
      else h.size = 1 + roll(256), ev.size = h.size;
      live.push_back(h);
    } else if (r < 50) {
      std::size_t k = pick(live);
      ev.op = TraceEvent::Free;
      ev.handle = live[k].id;
      dead.push_back(live[k]);
      live.erase(live.begin() + static_cast<std::ptrdiff_t>(k));
    } else if (r < 53) {
      std::size_t k = pick(live);
      H h = live[k];
      ev.op = TraceEvent::Realloc;
      ev.handle = h.id;
      ev.new_handle = next++;
      H n2 = h;
      n2.id = ev.new_handle;
      if (h.safe) {
        // Growing a trailing array keeps the allocated-type; otherwise stay put.
        std::uint64_t grow = 0;
        const auto &last = h.type->fields.back();
        if (last.is_array) grow = last.element_size() * static_cast<std::uint64_t>(1 + roll(3));
        auto t = realloc_type_transition(h.type, h.size + grow);
        if (!t) t = h.type, grow = 0;
        n2.type = *t;
        n2.size = h.size + grow;
      } else {
        n2.size = 1 + roll(256);
      }
      ev.size = n2.size;
      dead.push_back(h);
      live.erase(live.begin() + static_cast<std::ptrdiff_t>(k));
      live.push_back(n2);
    } else if (r < 88) {
      const H &h = live[pick(live)];
      ev.op = r < 72 ? TraceEvent::Write : TraceEvent::Read;
      ev.handle = h.id;
      ev.len = 1 + roll(8);
      std::uint64_t room = h.size > ev.len ? h.size - ev.len : 0;
      ev.offset = roll(10) == 0 ? h.size + roll(64) : std::uniform_int_distribution<std::uint64_t>(0, room)(rng);
      ev.value = rng();
    } else if (r < 98 && !dead.empty()) {
      const H &h = dead[pick(dead)];
      ev.op = r < 93 ? TraceEvent::StaleWrite : TraceEvent::StaleRead;
      ev.handle = h.id;
      ev.len = 1 + roll(8);
      std::uint64_t room = h.size > ev.len ? h.size - ev.len : 0;
      ev.offset = std::uniform_int_distribution<std::uint64_t>(0, room)(rng);
      ev.value = rng();
    } else if (!dead.empty()) {
      ev.op = TraceEvent::Free;  // double free
      ev.handle = dead[pick(dead)].id;
    } else {
      continue;
    }
    out.push_back(ev);
  }
  return out;
}

} // namespace uriah
