#pragma once

#include <cstdint>

namespace numalab {

/// Side length exponent of the spatial domain: coordinates live in [0, 2^16).
inline constexpr std::uint32_t kHilbertOrder = 16;
inline constexpr std::uint32_t kSpatialSide = 1u << kHilbertOrder;

struct Point2 {
  std::uint32_t x = 0;
  std::uint32_t y = 0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

/// Half-open axis-aligned rectangle [x0, x1) x [y0, y1).
struct Rect {
  std::uint32_t x0 = 0;
  std::uint32_t y0 = 0;
  std::uint32_t x1 = 0;
  std::uint32_t y1 = 0;

  bool empty() const { return x0 >= x1 || y0 >= y1; }
  bool contains(Point2 p) const { return p.x >= x0 && p.x < x1 && p.y >= y0 && p.y < y1; }
  bool intersects(const Rect& o) const { return x0 < o.x1 && o.x0 < x1 && y0 < o.y1 && o.y0 < y1; }
  bool covers(const Rect& o) const { return x0 <= o.x0 && o.x1 <= x1 && y0 <= o.y0 && o.y1 <= y1; }
  void expand(Point2 p);
  void expand(const Rect& o);
  friend bool operator==(const Rect&, const Rect&) = default;
};

/// Position of `p` along the Hilbert curve of the given order.
std::uint64_t hilbert_index(Point2 p, std::uint32_t order = kHilbertOrder);

/// Inverse of hilbert_index.
Point2 hilbert_point(std::uint64_t d, std::uint32_t order = kHilbertOrder);

}  // namespace numalab
