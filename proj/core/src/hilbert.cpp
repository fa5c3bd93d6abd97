#include "numalab/hilbert.hpp"

#include <algorithm>
#include <utility>

namespace numalab {

void Rect::expand(Point2 p) {
  if (empty()) {
    *this = Rect{p.x, p.y, p.x + 1, p.y + 1};
    return;
  }
  x0 = std::min(x0, p.x);
  y0 = std::min(y0, p.y);
  x1 = std::max(x1, p.x + 1);
  y1 = std::max(y1, p.y + 1);
}

void Rect::expand(const Rect& o) {
  if (o.empty()) return;
  if (empty()) {
    *this = o;
    return;
  }
  x0 = std::min(x0, o.x0);
  y0 = std::min(y0, o.y0);
  x1 = std::max(x1, o.x1);
  y1 = std::max(y1, o.y1);
}

// Classic rotate-and-accumulate formulation of the Hilbert mapping.
std::uint64_t hilbert_index(Point2 p, std::uint32_t order) {
  std::uint64_t x = p.x;
  std::uint64_t y = p.y;
  const std::uint64_t n = 1ULL << order;
  std::uint64_t d = 0;
  for (std::uint64_t s = n / 2; s > 0; s /= 2) {
    const std::uint64_t rx = (x & s) ? 1 : 0;
    const std::uint64_t ry = (y & s) ? 1 : 0;
    d += s * s * ((3 * rx) ^ ry);
    if (ry == 0) {
      if (rx == 1) {
        x = s - 1 - (x & (s - 1));
        y = s - 1 - (y & (s - 1));
      }
      std::swap(x, y);
    }
  }
  return d;
}

Point2 hilbert_point(std::uint64_t d, std::uint32_t order) {
  const std::uint64_t n = 1ULL << order;
  std::uint64_t x = 0;
  std::uint64_t y = 0;
  std::uint64_t t = d;
  for (std::uint64_t s = 1; s < n; s *= 2) {
    const std::uint64_t rx = 1 & (t / 2);
    const std::uint64_t ry = 1 & (t ^ rx);
    if (ry == 0) {
      if (rx == 1) {
        x = s - 1 - x;
        y = s - 1 - y;
      }
      std::swap(x, y);
    }
    x += s * rx;
    y += s * ry;
    t /= 4;
  }
  return Point2{static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y)};
}

}  // namespace numalab
