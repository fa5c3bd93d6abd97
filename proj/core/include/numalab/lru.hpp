#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

namespace numalab {

/// Fixed-capacity LRU set over 32-bit keys with O(1) probe, insert and erase.
class LruCache {
 public:
  explicit LruCache(std::size_t capacity = 0);

  struct Probe {
    bool hit = false;
    std::optional<std::uint32_t> evicted;
  };

  /// Marks `key` most recently used, inserting it on a miss.
  Probe access(std::uint32_t key);

  bool contains(std::uint32_t key) const { return map_.count(key) != 0; }
  bool erase(std::uint32_t key);
  void clear();

  std::size_t size() const { return map_.size(); }
  std::size_t capacity() const { return capacity_; }

  /// Keys from most to least recently used.
  std::vector<std::uint32_t> keys_mru() const;

 private:
  static constexpr std::uint32_t kNil = UINT32_MAX;
  struct Slot {
    std::uint32_t key = 0;
    std::uint32_t prev = kNil;
    std::uint32_t next = kNil;
  };

  void unlink(std::uint32_t slot);
  void push_front(std::uint32_t slot);

  std::size_t capacity_;
  std::vector<Slot> slots_;
  std::vector<std::uint32_t> free_;
  std::unordered_map<std::uint32_t, std::uint32_t> map_;
  std::uint32_t head_ = kNil;
  std::uint32_t tail_ = kNil;
};

}  // namespace numalab
