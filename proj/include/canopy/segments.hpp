#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "canopy/error.hpp"
#include "canopy/pixel.hpp"
#include "canopy/vegindex.hpp"

namespace canopy {

inline constexpr int kDefaultSegments = 5;

struct CrownGeometry {
  double center_x = 0.0;
  double center_y = 0.0;
  double radius = 0.0;
  Pixel end_a;
  Pixel end_b;

  bool degenerate() const { return radius <= 0.0; }
};

/// Center and radius from the farthest pixel pair: the midpoint and half the
/// pair distance. Exact all-pairs scan; the first pair in row-major order
/// wins ties.
inline CrownGeometry tree_geometry(std::span<const Pixel> pixels) {
  if (pixels.empty()) throw Error("tree_geometry: empty region");
  std::vector<Pixel> sorted(pixels.begin(), pixels.end());
  std::sort(sorted.begin(), sorted.end());
  long best = -1;
  std::size_t bi = 0, bj = 0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    for (std::size_t j = i + 1; j < sorted.size(); ++j) {
      const long dx = sorted[i].x - sorted[j].x;
      const long dy = sorted[i].y - sorted[j].y;
      const long d2 = dx * dx + dy * dy;
      if (d2 > best) {
        best = d2;
        bi = i;
        bj = j;
      }
    }
  }
  CrownGeometry g;
  g.end_a = sorted[bi];
  g.end_b = sorted[bj];
  g.center_x = 0.5 * (g.end_a.x + g.end_b.x);
  g.center_y = 0.5 * (g.end_a.y + g.end_b.y);
  g.radius = best > 0 ? 0.5 * std::sqrt(static_cast<double>(best)) : 0.0;
  return g;
}

/// 1-based ring of a pixel at `distance` from the center: ceil(d*n/r)
/// clamped to [1, n]. A degenerate radius puts everything in segment 1.
inline int segment_of(double distance, double radius, int n_segments) {
  if (n_segments < 1) throw Error("segment_of: need at least one segment");
  if (radius <= 0.0) return 1;
  const double ring = std::ceil(distance * n_segments / radius);
  return static_cast<int>(std::clamp(ring, 1.0, static_cast<double>(n_segments)));
}

inline std::vector<int> assign_segments(std::span<const Pixel> pixels, const CrownGeometry& g,
                                        int n_segments) {
  std::vector<int> seg;
  seg.reserve(pixels.size());
  for (const auto& p : pixels) {
    const double d = std::hypot(p.x - g.center_x, p.y - g.center_y);
    seg.push_back(segment_of(d, g.radius, n_segments));
  }
  return seg;
}

/// Per-ring pixel counts and index means of one tree. Rings are ordered
/// center to outer; `means[s][j]` is missing when no pixel of ring s has a
/// value for index j.
struct SegmentProfile {
  int tree_id = 0;
  std::vector<std::size_t> pixel_counts;
  std::vector<IndexVector> means;

  int segment_count() const { return static_cast<int>(means.size()); }
  std::size_t total_pixels() const {
    std::size_t n = 0;
    for (auto c : pixel_counts) n += c;
    return n;
  }
  std::vector<IndexValue> series(VegIndex index) const {
    std::vector<IndexValue> s;
    for (const auto& m : means) s.push_back(m[index_position(index)]);
    return s;
  }
};

inline SegmentProfile segment_means(int tree_id, std::span<const int> assignment,
                                    std::span<const PixelIndexRow> rows, int n_segments) {
  if (assignment.size() != rows.size()) {
    throw Error("segment_means: assignment and index rows differ in length");
  }
  SegmentProfile profile;
  profile.tree_id = tree_id;
  profile.pixel_counts.assign(static_cast<std::size_t>(n_segments), 0);
  std::vector<std::array<double, kIndexCount>> sums(static_cast<std::size_t>(n_segments));
  std::vector<std::array<std::size_t, kIndexCount>> counts(static_cast<std::size_t>(n_segments));
  for (auto& s : sums) s.fill(0.0);
  for (auto& c : counts) c.fill(0);

  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int s = assignment[i];
    if (s < 1 || s > n_segments) throw Error("segment_means: segment id out of range");
    const auto si = static_cast<std::size_t>(s - 1);
    ++profile.pixel_counts[si];
    for (std::size_t j = 0; j < kIndexCount; ++j) {
      if (const auto& v = rows[i].values[j]) {
        sums[si][j] += *v;
        ++counts[si][j];
      }
    }
  }
  profile.means.resize(static_cast<std::size_t>(n_segments));
  for (std::size_t s = 0; s < profile.means.size(); ++s) {
    for (std::size_t j = 0; j < kIndexCount; ++j) {
      if (counts[s][j] > 0) profile.means[s][j] = sums[s][j] / static_cast<double>(counts[s][j]);
    }
  }
  return profile;
}

/// Geometry, ring assignment and means for one tree in one call. `rows`
/// must follow the region's pixel order.
inline SegmentProfile profile_tree(const TreeRegion& region, std::span<const PixelIndexRow> rows,
                                   int n_segments = kDefaultSegments) {
  const auto g = tree_geometry(region.pixels);
  const auto seg = assign_segments(region.pixels, g, n_segments);
  return segment_means(region.id, seg, rows, n_segments);
}

/// Longest strictly increasing or strictly decreasing run, center to outer,
/// counted in segments. Ties and missing means break runs; never below 1.
inline int monotone_run(std::span<const IndexValue> series) {
  int best = 1;
  int up = 1;
  int down = 1;
  for (std::size_t i = 1; i < series.size(); ++i) {
    const auto& prev = series[i - 1];
    const auto& cur = series[i];
    if (prev && cur && *cur > *prev) {
      up += 1;
      down = 1;
    } else if (prev && cur && *cur < *prev) {
      down += 1;
      up = 1;
    } else {
      up = down = 1;
    }
    best = std::max({best, up, down});
  }
  return best;
}

inline int monotone_run(const SegmentProfile& profile, VegIndex index) {
  const auto s = profile.series(index);
  return monotone_run(s);
}

/// counts[l-1] = number of trees whose longest monotone run is l segments.
inline std::vector<std::size_t> monotone_histogram(std::span<const SegmentProfile> profiles,
                                                   VegIndex index,
                                                   int n_segments = kDefaultSegments) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(n_segments), 0);
  for (const auto& p : profiles) {
    const int run = monotone_run(p, index);
    if (run > n_segments) throw Error("monotone_histogram: profile has more segments than expected");
    ++counts[static_cast<std::size_t>(run - 1)];
  }
  return counts;
}

}  // namespace canopy
