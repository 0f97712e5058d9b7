#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "canopy/error.hpp"
#include "canopy/hypercube.hpp"
#include "canopy/pixel.hpp"

namespace canopy {

/// Thresholds of the leaf-pixel test.
struct LeafFilter {
  double ari2_min = 0.80;
  double sipi_min = 0.88;
  double p900_max = 6000.0;
  double p780_min = 2500.0;
  double p660_max = 1000.0;
};

struct ExtractConfig {
  LeafFilter filter;
  int grid_side = 4;
  int min_leaf_per_grid = 10;
  std::size_t min_tree_pixels = 40;
};

/// The five quantities the leaf test looks at for one pixel. ARI2/SIPI are
/// absent when their denominators vanish.
struct LeafSignals {
  std::optional<double> ari2;
  std::optional<double> sipi;
  double p900 = 0.0;
  double p780 = 0.0;
  double p660 = 0.0;
};

inline bool leaf_decision(const LeafSignals& s, const LeafFilter& f) {
  if (!s.ari2 || !s.sipi) return false;
  return *s.ari2 > f.ari2_min && *s.sipi > f.sipi_min && s.p900 < f.p900_max &&
         s.p780 > f.p780_min && s.p660 < f.p660_max;
}

inline LeafSignals leaf_signals(const Hypercube& cube, long x, long y) {
  const double p445 = cube.brightness(x, y, 445);
  const double p550 = cube.brightness(x, y, 550);
  const double p680 = cube.brightness(x, y, 680);
  const double p700 = cube.brightness(x, y, 700);
  const double p800 = cube.brightness(x, y, 800);
  LeafSignals s;
  // Filter form of ARI2 adds the reciprocals (catalog ARI2 subtracts them).
  if (p550 != 0.0 && p700 != 0.0) s.ari2 = p800 * (1.0 / p550 + 1.0 / p700);
  if (p800 + p680 != 0.0) s.sipi = (p800 - p445) / (p800 + p680);
  s.p900 = cube.brightness(x, y, 900);
  s.p780 = cube.brightness(x, y, 780);
  s.p660 = cube.brightness(x, y, 660);
  return s;
}

inline bool is_leaf(const Hypercube& cube, long x, long y, const LeafFilter& filter = {}) {
  return leaf_decision(leaf_signals(cube, x, y), filter);
}

/// Per-pixel leaf and connected-grid flags.
class LeafMask {
 public:
  LeafMask() = default;
  LeafMask(std::size_t width, std::size_t height)
      : width_(width), height_(height), leaf_(width * height, 0), connected_(width * height, 0) {}

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }

  bool leaf(std::size_t x, std::size_t y) const { return leaf_[y * width_ + x] != 0; }
  bool in_connected_grid(std::size_t x, std::size_t y) const {
    return connected_[y * width_ + x] != 0;
  }
  void set_leaf(std::size_t x, std::size_t y, bool v) { leaf_[y * width_ + x] = v; }
  void set_connected(std::size_t x, std::size_t y, bool v) { connected_[y * width_ + x] = v; }

  std::size_t leaf_count() const {
    return static_cast<std::size_t>(std::count(leaf_.begin(), leaf_.end(), 1));
  }
  std::size_t connected_count() const {
    return static_cast<std::size_t>(std::count(connected_.begin(), connected_.end(), 1));
  }

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<std::uint8_t> leaf_;
  std::vector<std::uint8_t> connected_;
};

inline LeafMask classify_leaves(const Hypercube& cube, const LeafFilter& filter = {}) {
  LeafMask mask(cube.width(), cube.height());
  for (std::size_t y = 0; y < cube.height(); ++y) {
    for (std::size_t x = 0; x < cube.width(); ++x) {
      mask.set_leaf(x, y, is_leaf(cube, static_cast<long>(x), static_cast<long>(y), filter));
    }
  }
  return mask;
}

/// Tiles the image with non-overlapping k x k grids anchored at (0, 0) and
/// flags every pixel of each grid holding at least `min_leaf` leaf pixels.
/// Border grids are clipped and use the same absolute threshold.
inline LeafMask connected_grids(LeafMask mask, int grid_side, int min_leaf) {
  if (grid_side < 2) throw Error("connected_grids: grid side must be >= 2");
  const auto k = static_cast<std::size_t>(grid_side);
  for (std::size_t gy = 0; gy < mask.height(); gy += k) {
    for (std::size_t gx = 0; gx < mask.width(); gx += k) {
      const std::size_t x_end = std::min(gx + k, mask.width());
      const std::size_t y_end = std::min(gy + k, mask.height());
      long count = 0;
      for (std::size_t y = gy; y < y_end; ++y)
        for (std::size_t x = gx; x < x_end; ++x) count += mask.leaf(x, y);
      const bool connected = count >= min_leaf;
      for (std::size_t y = gy; y < y_end; ++y)
        for (std::size_t x = gx; x < x_end; ++x) mask.set_connected(x, y, connected);
    }
  }
  return mask;
}

/// Depth-first labeling of 8-connected flagged pixels, seeded in row-major
/// scan order. Each component keeps only its leaf pixels; components under
/// `min_pixels` are dropped and the survivors numbered 1.. in discovery order.
inline std::vector<TreeRegion> extract_trees(const LeafMask& mask, std::size_t min_pixels = 40) {
  const std::size_t w = mask.width();
  const std::size_t h = mask.height();
  std::vector<std::uint8_t> visited(w * h, 0);
  std::vector<TreeRegion> trees;
  std::vector<Pixel> stack;

  for (std::size_t sy = 0; sy < h; ++sy) {
    for (std::size_t sx = 0; sx < w; ++sx) {
      if (!mask.in_connected_grid(sx, sy) || visited[sy * w + sx]) continue;
      TreeRegion region;
      stack.push_back({static_cast<int>(sx), static_cast<int>(sy)});
      visited[sy * w + sx] = 1;
      while (!stack.empty()) {
        const Pixel p = stack.back();
        stack.pop_back();
        if (mask.leaf(static_cast<std::size_t>(p.x), static_cast<std::size_t>(p.y))) {
          region.pixels.push_back(p);
        }
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            const long nx = p.x + dx;
            const long ny = p.y + dy;
            if (nx < 0 || ny < 0 || nx >= static_cast<long>(w) || ny >= static_cast<long>(h))
              continue;
            const auto ux = static_cast<std::size_t>(nx);
            const auto uy = static_cast<std::size_t>(ny);
            if (visited[uy * w + ux] || !mask.in_connected_grid(ux, uy)) continue;
            visited[uy * w + ux] = 1;
            stack.push_back({static_cast<int>(nx), static_cast<int>(ny)});
          }
        }
      }
      if (region.pixels.size() >= min_pixels) {
        std::sort(region.pixels.begin(), region.pixels.end());
        region.id = static_cast<int>(trees.size()) + 1;
        trees.push_back(std::move(region));
      }
    }
  }
  return trees;
}

/// Leaf filter, grid connectivity and DFS labeling in one call.
inline std::vector<TreeRegion> extract(const Hypercube& cube, const ExtractConfig& cfg = {}) {
  auto mask = connected_grids(classify_leaves(cube, cfg.filter), cfg.grid_side,
                              cfg.min_leaf_per_grid);
  return extract_trees(mask, cfg.min_tree_pixels);
}

}  // namespace canopy
