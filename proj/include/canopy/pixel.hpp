#pragma once

#include <compare>
#include <vector>

namespace canopy {

/// Image coordinate. Ordering is row-major (y first), the scan order used
/// everywhere ids or ties depend on pixel order.
struct Pixel {
  int x = 0;
  int y = 0;

  friend bool operator==(const Pixel&, const Pixel&) = default;
  friend auto operator<=>(const Pixel& a, const Pixel& b) {
    if (auto c = a.y <=> b.y; c != 0) return c;
    return a.x <=> b.x;
  }
};

/// One extracted crown. `id` is the 1-based discovery ordinal; pixels are
/// leaf pixels only, sorted row-major.
struct TreeRegion {
  int id = 0;
  std::vector<Pixel> pixels;

  std::size_t pixel_count() const { return pixels.size(); }
};

}  // namespace canopy
