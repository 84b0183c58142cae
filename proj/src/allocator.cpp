#include "uriah/allocator.hpp"

#include <algorithm>
#include <sstream>

namespace uriah {

namespace {

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << v;
  return os.str();
}

// What unzeroed OS memory happens to contain: never zero.
std::uint8_t garbage(std::uint64_t addr) {
  std::uint64_t x = addr * 0x9E3779B97F4A7C15ull;
  return static_cast<std::uint8_t>((x >> 56) | 1);
}

} // namespace

void HeapState::grant(std::uint64_t start, std::uint64_t size) {
  if (opt_.zero_on_fresh) zeroed_[start] = start + size;
}

std::uint8_t HeapState::read_byte(std::uint64_t addr) const {
  auto it = bytes_.find(addr);
  if (it != bytes_.end()) return it->second;
  auto z = zeroed_.upper_bound(addr);
  if (z != zeroed_.begin() && addr < std::prev(z)->second) return 0;
  return garbage(addr);
}

void HeapState::write_byte(std::uint64_t addr, std::uint8_t v) { bytes_[addr] = v; }

const Span *HeapState::span_at(std::uint64_t addr) const {
  auto it = spans_.upper_bound(addr);
  if (it == spans_.begin()) return nullptr;
  --it;
  return addr < it->second.start + it->second.size ? &it->second : nullptr;
}

std::optional<std::pair<std::uint64_t, SlotInfo>> HeapState::slot_at(std::uint64_t addr) const {
  auto it = slots_.upper_bound(addr);
  if (it == slots_.begin()) return std::nullopt;
  --it;
  if (addr >= it->first + it->second.size) return std::nullopt;
  return *it;
}

void HeapState::new_slot(std::uint64_t addr, SlotInfo info) {
  auto next = slots_.lower_bound(addr);
  if (next != slots_.end() && next->first < addr + info.size)
    violations.push_back("slot " + hex(addr) + " overlaps slot " + hex(next->first));
  if (next != slots_.begin()) {
    auto prev = std::prev(next);
    if (prev->first + prev->second.size > addr)
      violations.push_back("slot " + hex(addr) + " overlaps slot " + hex(prev->first));
  }
  if (info.safe) {
    const Span *sp = span_at(addr);
    if (!sp || addr + info.size > sp->start + sp->size)
      violations.push_back("slot " + hex(addr) + " straddles a span boundary");
  }
  slots_[addr] = info;
}

std::optional<std::uint64_t> HeapState::salloc(const TypePtr &t) {
  std::uint64_t slot_size = round_up(std::max<std::uint64_t>(t->total_size, 1), kSlotAlign);
  std::uint64_t key = opt_.pools_disabled ? slot_size : t->hash();
  Pool &pool = pools_[key];
  if (!pool.type) {
    pool.type = t;
    pool.slot_size = slot_size;
  }
  std::uint64_t addr;
  if (!pool.freelist.empty()) {
    addr = pool.freelist.back();
    pool.freelist.pop_back();
    auto it = slots_.find(addr);
    if (it == slots_.end() || it->second.state != SlotState::Free || !it->second.safe)
      violations.push_back("freelist entry " + hex(addr) + " is not a free slot");
    const Span *sp = span_at(addr);
    if (!sp || sp->pool != key) violations.push_back("freelist entry " + hex(addr) + " outside its pool");
    if (it != slots_.end()) {
      it->second.state = SlotState::Live;
      it->second.type_hash = t->hash();
      it->second.obj_size = t->total_size;
    }
  } else {
    if (pool.bump + slot_size > pool.bump_end) {
      std::uint64_t size = std::max(kSpanBytes, round_up(slot_size, 4096));
      if (os_cursor_ + size > kSafeBase + kSafeSize) return std::nullopt;
      std::uint64_t start = os_cursor_;
      os_cursor_ += size;
      grant(start, size);
      spans_[start] = {start, size, key};
      pool.spans.push_back(start);
      pool.bump = start;
      pool.bump_end = start + size / slot_size * slot_size;
    }
    addr = pool.bump;
    pool.bump += slot_size;
    new_slot(addr, {slot_size, t->total_size, t->hash(), SlotState::Live, true});
  }
  if (const Span *sp = span_at(addr)) {
    auto &types = span_types_[sp->start];
    types.insert(t->hash());
    if (types.size() == 2)
      violations.push_back("span " + hex(sp->start) + " reused for a second allocated-type");
  }
  return addr;
}

FreeStatus HeapState::sfree(std::uint64_t addr) {
  auto it = slots_.find(addr);
  if (!in_safe(addr) || it == slots_.end() || !it->second.safe) return FreeStatus::Foreign;
  if (it->second.state == SlotState::Free) return FreeStatus::DoubleFree;
  it->second.state = SlotState::Free;
  const Span *sp = span_at(addr);
  pools_[sp->pool].freelist.push_back(addr);
  return FreeStatus::Ok;
}

std::optional<std::uint64_t> HeapState::srealloc(std::uint64_t addr, const TypePtr &t_new, FreeStatus *status) {
  auto it = slots_.find(addr);
  FreeStatus st = FreeStatus::Ok;
  if (!in_safe(addr) || it == slots_.end() || !it->second.safe) st = FreeStatus::Foreign;
  else if (it->second.state == SlotState::Free) st = FreeStatus::DoubleFree;
  if (status) *status = st;
  if (st != FreeStatus::Ok) return std::nullopt;
  std::uint64_t old_size = it->second.obj_size;
  // Same type: freeing then allocating would hand back this slot (LIFO).
  if (it->second.type_hash == t_new->hash()) return addr;
  auto fresh = salloc(t_new);
  if (!fresh) return std::nullopt;
  std::uint64_t keep = std::min(old_size, t_new->total_size);
  for (std::uint64_t i = 0; i < keep; ++i) write_byte(*fresh + i, read_byte(addr + i));
  sfree(addr);
  return fresh;
}

std::optional<std::uint64_t> HeapState::ualloc(std::uint64_t size) {
  std::uint64_t slot_size = round_up(std::max<std::uint64_t>(size, 1), kSlotAlign);
  auto &fl = unsafe_free_[slot_size];
  std::uint64_t addr;
  if (!fl.empty()) {
    addr = fl.back();
    fl.pop_back();
    auto &info = slots_[addr];
    if (info.state != SlotState::Free || info.safe)
      violations.push_back("unsafe freelist entry " + hex(addr) + " is not a free slot");
    info.state = SlotState::Live;
    info.obj_size = size;
  } else {
    if (unsafe_cursor_ + slot_size > kUnsafeBase + kUnsafeSize) return std::nullopt;
    addr = unsafe_cursor_;
    unsafe_cursor_ += slot_size;
    grant(addr, slot_size);
    new_slot(addr, {slot_size, size, 0, SlotState::Live, false});
  }
  return addr;
}

FreeStatus HeapState::ufree(std::uint64_t addr) {
  auto it = slots_.find(addr);
  if (!in_unsafe(addr) || it == slots_.end() || it->second.safe) return FreeStatus::Foreign;
  if (it->second.state == SlotState::Free) return FreeStatus::DoubleFree;
  it->second.state = SlotState::Free;
  unsafe_free_[it->second.size].push_back(addr);
  return FreeStatus::Ok;
}

void HeapState::check_all() {
  std::uint64_t prev_end = 0;
  for (const auto &[addr, s] : slots_) {
    if (addr < prev_end) violations.push_back("slot " + hex(addr) + " overlaps its predecessor");
    prev_end = addr + s.size;
    if (s.safe) {
      const Span *sp = span_at(addr);
      if (!sp || addr + s.size > sp->start + sp->size)
        violations.push_back("slot " + hex(addr) + " straddles a span boundary");
      else if (pools_.at(sp->pool).slot_size != s.size)
        violations.push_back("slot " + hex(addr) + " has the wrong size for its pool");
    } else if (!in_unsafe(addr) || !in_unsafe(addr + s.size - 1)) {
      violations.push_back("unsafe slot " + hex(addr) + " outside the unsafe region");
    }
  }
  for (const auto &[start, types] : span_types_)
    if (types.size() > 1) violations.push_back("span " + hex(start) + " held " + std::to_string(types.size()) + " allocated-types");
  // Freelists hold exactly the free slots of their pool, once each.
  std::map<std::uint64_t, std::vector<std::uint64_t>> expect;
  for (const auto &[addr, s] : slots_)
    if (s.safe && s.state == SlotState::Free) expect[span_at(addr)->pool].push_back(addr);
  for (const auto &[key, pool] : pools_) {
    auto fl = pool.freelist;
    std::sort(fl.begin(), fl.end());
    if (fl != expect[key]) violations.push_back("freelist of pool " + hex(key) + " does not match its free slots");
  }
  std::map<std::uint64_t, std::vector<std::uint64_t>> uexpect;
  for (const auto &[addr, s] : slots_)
    if (!s.safe && s.state == SlotState::Free) uexpect[s.size].push_back(addr);
  for (const auto &[size, fl0] : unsafe_free_) {
    auto fl = fl0;
    std::sort(fl.begin(), fl.end());
    if (fl != uexpect[size]) violations.push_back("unsafe freelist of size " + std::to_string(size) + " does not match its free slots");
  }
}

std::uint64_t HeapState::checksum() const {
  std::string s;
  for (const auto &[a, sp] : spans_) s += hex(a) + ":" + std::to_string(sp.size) + ":" + hex(sp.pool) + ";";
  for (const auto &[a, sl] : slots_)
    s += hex(a) + ":" + std::to_string(sl.size) + ":" + std::to_string(static_cast<int>(sl.state)) + ":" +
         hex(sl.type_hash) + ";";
  for (const auto &[k, p] : pools_) {
    s += "P" + hex(k);
    for (auto a : p.freelist) s += "," + hex(a);
  }
  for (const auto &[k, fl] : unsafe_free_) {
    s += "U" + std::to_string(k);
    for (auto a : fl) s += "," + hex(a);
  }
  return fnv1a64(s);
}

} // namespace uriah
