#include "numalab/lru.hpp"

namespace numalab {

LruCache::LruCache(std::size_t capacity) : capacity_(capacity) {
  slots_.reserve(capacity);
  map_.reserve(capacity * 2);
}

void LruCache::unlink(std::uint32_t slot) {
  Slot& s = slots_[slot];
  if (s.prev != kNil) {
    slots_[s.prev].next = s.next;
  } else {
    head_ = s.next;
  }
  if (s.next != kNil) {
    slots_[s.next].prev = s.prev;
  } else {
    tail_ = s.prev;
  }
  s.prev = s.next = kNil;
}

void LruCache::push_front(std::uint32_t slot) {
  Slot& s = slots_[slot];
  s.prev = kNil;
  s.next = head_;
  if (head_ != kNil) slots_[head_].prev = slot;
  head_ = slot;
  if (tail_ == kNil) tail_ = slot;
}

LruCache::Probe LruCache::access(std::uint32_t key) {
  Probe p;
  if (capacity_ == 0) return p;
  if (auto it = map_.find(key); it != map_.end()) {
    p.hit = true;
    if (it->second != head_) {
      unlink(it->second);
      push_front(it->second);
    }
    return p;
  }
  std::uint32_t slot;
  if (map_.size() == capacity_) {
    slot = tail_;
    p.evicted = slots_[slot].key;
    map_.erase(slots_[slot].key);
    unlink(slot);
  } else if (!free_.empty()) {
    slot = free_.back();
    free_.pop_back();
  } else {
    slot = static_cast<std::uint32_t>(slots_.size());
    slots_.emplace_back();
  }
  slots_[slot].key = key;
  push_front(slot);
  map_.emplace(key, slot);
  return p;
}

bool LruCache::erase(std::uint32_t key) {
  auto it = map_.find(key);
  if (it == map_.end()) return false;
  unlink(it->second);
  free_.push_back(it->second);
  map_.erase(it);
  return true;
}

void LruCache::clear() {
  map_.clear();
  slots_.clear();
  free_.clear();
  head_ = tail_ = kNil;
}

std::vector<std::uint32_t> LruCache::keys_mru() const {
  std::vector<std::uint32_t> out;
  out.reserve(map_.size());
  for (std::uint32_t s = head_; s != kNil; s = slots_[s].next) out.push_back(slots_[s].key);
  return out;
}

}  // namespace numalab
