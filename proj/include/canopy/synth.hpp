#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "canopy/error.hpp"
#include "canopy/hypercube.hpp"
#include "canopy/pixel.hpp"

namespace canopy {

/// Piecewise-linear reflectance curve over wavelength (nm), flat beyond the
/// first and last anchors.
class SpectrumTemplate {
 public:
  SpectrumTemplate() = default;
  explicit SpectrumTemplate(std::vector<std::pair<double, double>> anchors)
      : anchors_(std::move(anchors)) {
    if (anchors_.size() < 2) throw Error("spectrum template needs at least two anchors");
  }

  double at(double nm) const {
    if (nm <= anchors_.front().first) return anchors_.front().second;
    if (nm >= anchors_.back().first) return anchors_.back().second;
    auto hi = std::lower_bound(anchors_.begin(), anchors_.end(), nm,
                               [](const auto& a, double v) { return a.first < v; });
    auto lo = hi - 1;
    const double t = (nm - lo->first) / (hi->first - lo->first);
    return lo->second + t * (hi->second - lo->second);
  }

  SpectrumTemplate scaled(double factor) const {
    auto a = anchors_;
    for (auto& p : a) p.second *= factor;
    return SpectrumTemplate(std::move(a));
  }

 private:
  std::vector<std::pair<double, double>> anchors_;
};

// Canopy templates all pass the default leaf filter; so does any convex mix
// of them (every filter term is linear or a ratio of positive linear forms).
namespace spectra {

inline const SpectrumTemplate& healthy_center() {
  static const SpectrumTemplate t({{400, 220}, {445, 180}, {500, 260}, {510, 300}, {531, 560},
                                   {550, 820}, {570, 690}, {600, 420}, {640, 300}, {660, 260},
                                   {670, 250}, {680, 260}, {690, 330}, {700, 560}, {705, 760},
                                   {715, 1250}, {720, 1550}, {726, 1900}, {734, 2450},
                                   {740, 2850}, {747, 3300}, {750, 3500}, {760, 3900},
                                   {780, 4300}, {800, 4550}, {850, 4700}, {900, 4650},
                                   {940, 4300}, {970, 4150}, {1000, 4250}});
  return t;
}

inline const SpectrumTemplate& healthy_edge() {
  static const SpectrumTemplate t({{400, 240}, {445, 120}, {500, 300}, {510, 350}, {531, 640},
                                   {550, 900}, {570, 800}, {600, 520}, {640, 380}, {660, 300},
                                   {670, 290}, {680, 300}, {690, 420}, {700, 700}, {705, 880},
                                   {715, 1300}, {720, 1520}, {726, 1780}, {734, 2150},
                                   {740, 2450}, {747, 2750}, {750, 2880}, {760, 3100},
                                   {780, 3400}, {800, 3550}, {850, 3650}, {900, 3600},
                                   {940, 3300}, {970, 3100}, {1000, 3200}});
  return t;
}

inline const SpectrumTemplate& stressed_center() {
  static const SpectrumTemplate t({{400, 230}, {445, 150}, {500, 320}, {510, 380}, {531, 700},
                                   {550, 950}, {570, 880}, {600, 600}, {640, 420}, {660, 330},
                                   {670, 310}, {680, 310}, {690, 420}, {700, 760}, {705, 930},
                                   {715, 1350}, {720, 1600}, {726, 1870}, {734, 2300},
                                   {740, 2650}, {747, 3000}, {750, 3150}, {760, 3400},
                                   {780, 3700}, {800, 3800}, {850, 3900}, {900, 3850},
                                   {940, 3500}, {970, 3300}, {1000, 3400}});
  return t;
}

inline const SpectrumTemplate& stressed_edge() {
  static const SpectrumTemplate t({{400, 200}, {445, 100}, {500, 330}, {510, 400}, {531, 720},
                                   {550, 980}, {570, 920}, {600, 640}, {640, 420}, {660, 280},
                                   {670, 265}, {680, 260}, {690, 400}, {700, 780}, {705, 950},
                                   {715, 1300}, {720, 1480}, {726, 1700}, {734, 2000},
                                   {740, 2250}, {747, 2500}, {750, 2600}, {760, 2750},
                                   {780, 2900}, {800, 3000}, {850, 3100}, {900, 3050},
                                   {940, 2800}, {970, 2650}, {1000, 2700}});
  return t;
}

/// Bare soil / dry grass: fails the red and NIR brightness tests.
inline const SpectrumTemplate& background() {
  static const SpectrumTemplate t({{400, 900}, {445, 1000}, {500, 1150}, {550, 1300},
                                   {600, 1450}, {660, 1600}, {700, 1750}, {750, 1900},
                                   {780, 2000}, {800, 2050}, {900, 2200}, {1000, 2300}});
  return t;
}

/// Canopy shadow: far too dark in the NIR to pass.
inline const SpectrumTemplate& shade() {
  static const SpectrumTemplate t = healthy_center().scaled(0.18);
  return t;
}

}  // namespace spectra

struct SceneSpec {
  std::size_t width = 640;
  std::size_t height = 440;
  int tree_count = 10;
  // The grid rule trims roughly a one-pixel rim, so pixel-set agreement
  // with the planted disc grows like 1 - 2/r.
  double radius_min = 40.0;
  double radius_max = 44.0;
  std::size_t channels = 150;
  double wavelength_min = 400.0;
  double wavelength_max = 1000.0;
  /// 0: uniform crowns; 1: full center-to-edge spectral contrast.
  double gradient_strength = 1.0;
  /// Upper bound of the per-crown blend toward the stressed templates.
  double health_variation = 0.5;
  /// Standard deviation of additive Gaussian noise, reflectance units.
  double noise = 0.0;
  int min_gap = 12;
  bool shade = true;
  std::uint64_t seed = 1;
  int max_attempts = 20000;
};

struct PlantedCrown {
  int id = 0;
  double center_x = 0.0;
  double center_y = 0.0;
  double radius = 0.0;
  double health = 0.0;  // 0 healthy .. health_variation stressed
  std::vector<Pixel> pixels;
};

struct Scene {
  Hypercube cube;
  std::vector<PlantedCrown> crowns;
};

/// Disc crowns on a soil background, each with a shadow and a radial
/// center-to-edge spectral gradient. Crown ids follow row-major order of
/// each crown's first pixel.
inline Scene generate_scene(const SceneSpec& spec) {
  if (spec.channels < 2) throw Error("synth: need at least two channels");
  if (spec.tree_count < 0) throw Error("synth: negative tree count");
  if (!(spec.radius_min > 0.0) || spec.radius_max < spec.radius_min) {
    throw Error("synth: bad crown radius range");
  }
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<PlantedCrown> crowns;
  int attempts = 0;
  while (static_cast<int>(crowns.size()) < spec.tree_count) {
    if (++attempts > spec.max_attempts) {
      throw Error("synth: could not place " + std::to_string(spec.tree_count) +
                  " crowns without overlap after " + std::to_string(spec.max_attempts) +
                  " attempts");
    }
    PlantedCrown c;
    c.radius = spec.radius_min + unit(rng) * (spec.radius_max - spec.radius_min);
    const double margin = c.radius + 2.0;
    const double w = static_cast<double>(spec.width), h = static_cast<double>(spec.height);
    if (w <= 2 * margin || h <= 2 * margin) continue;
    c.center_x = margin + unit(rng) * (w - 2 * margin);
    c.center_y = margin + unit(rng) * (h - 2 * margin);
    c.health = unit(rng) * spec.health_variation;
    bool clear = true;
    for (const auto& o : crowns) {
      if (std::hypot(c.center_x - o.center_x, c.center_y - o.center_y) <
          c.radius + o.radius + spec.min_gap) {
        clear = false;
        break;
      }
    }
    if (clear) crowns.push_back(std::move(c));
  }

  std::vector<double> wavelengths(spec.channels);
  for (std::size_t i = 0; i < spec.channels; ++i) {
    wavelengths[i] = spec.wavelength_min + (spec.wavelength_max - spec.wavelength_min) *
                                               static_cast<double>(i) /
                                               static_cast<double>(spec.channels - 1);
  }
  auto sample = [&](const SpectrumTemplate& t) {
    std::vector<double> v(spec.channels);
    for (std::size_t i = 0; i < spec.channels; ++i) v[i] = t.at(wavelengths[i]);
    return v;
  };
  const auto soil = sample(spectra::background());
  const auto dark = sample(spectra::shade());
  const auto hc = sample(spectra::healthy_center()), he = sample(spectra::healthy_edge());
  const auto sc = sample(spectra::stressed_center()), se = sample(spectra::stressed_edge());

  const std::size_t W = spec.width, H = spec.height, C = spec.channels;
  // Spectrum per pixel as a small code: -1 soil, -2 shade, >= 0 crown index.
  std::vector<int> owner(W * H, -1);
  std::vector<double> rho(W * H, 0.0);
  if (spec.shade) {
    for (const auto& c : crowns) {
      const double sx = c.center_x + 0.55 * c.radius, sy = c.center_y + 0.45 * c.radius;
      const double sr = 0.85 * c.radius;
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x)
          if (std::hypot(x - sx, y - sy) <= sr) owner[y * W + x] = -2;
    }
  }
  for (std::size_t ci = 0; ci < crowns.size(); ++ci) {
    auto& c = crowns[ci];
    const auto x0 = static_cast<long>(std::floor(c.center_x - c.radius));
    const auto x1 = static_cast<long>(std::ceil(c.center_x + c.radius));
    const auto y0 = static_cast<long>(std::floor(c.center_y - c.radius));
    const auto y1 = static_cast<long>(std::ceil(c.center_y + c.radius));
    for (long y = std::max(0L, y0); y <= std::min<long>(y1, static_cast<long>(H) - 1); ++y) {
      for (long x = std::max(0L, x0); x <= std::min<long>(x1, static_cast<long>(W) - 1); ++x) {
        const double d = std::hypot(x - c.center_x, y - c.center_y);
        if (d > c.radius) continue;
        const auto idx = static_cast<std::size_t>(y) * W + static_cast<std::size_t>(x);
        owner[idx] = static_cast<int>(ci);
        rho[idx] = d / c.radius;
        c.pixels.push_back({static_cast<int>(x), static_cast<int>(y)});
      }
    }
  }

  std::normal_distribution<double> noise(0.0, spec.noise > 0.0 ? spec.noise : 1.0);
  std::vector<std::uint16_t> data(W * H * C);
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      const auto idx = y * W + x;
      const int o = owner[idx];
      double health = 0.0, t = 0.0;
      if (o >= 0) {
        health = crowns[static_cast<std::size_t>(o)].health;
        t = spec.gradient_strength * rho[idx];
      }
      for (std::size_t ch = 0; ch < C; ++ch) {
        double v;
        if (o == -1) {
          v = soil[ch];
        } else if (o == -2) {
          v = dark[ch];
        } else {
          const double center = (1.0 - health) * hc[ch] + health * sc[ch];
          const double edge = (1.0 - health) * he[ch] + health * se[ch];
          v = center + t * (edge - center);
        }
        if (spec.noise > 0.0) v += noise(rng);
        v = std::clamp(std::round(v), 0.0, static_cast<double>(kMaxReflectance));
        data[(ch * H + y) * W + x] = static_cast<std::uint16_t>(v);
      }
    }
  }

  for (auto& c : crowns) std::sort(c.pixels.begin(), c.pixels.end());
  std::stable_sort(crowns.begin(), crowns.end(), [](const auto& a, const auto& b) {
    return a.pixels.front() < b.pixels.front();
  });
  for (std::size_t i = 0; i < crowns.size(); ++i) crowns[i].id = static_cast<int>(i) + 1;
  return Scene{Hypercube(W, H, std::move(wavelengths), std::move(data)), std::move(crowns)};
}

}  // namespace canopy
