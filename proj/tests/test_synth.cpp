#include <algorithm>
#include <set>

#include "canopy/segments.hpp"
#include "canopy/synth.hpp"
#include "canopy/treex.hpp"
#include "support.hpp"

using namespace canopy;

namespace {

// 1x1 cube carrying `t` sampled on the default synthetic channel grid.
Hypercube single_pixel(const SpectrumTemplate& t) {
  const SceneSpec spec;
  std::vector<double> wl(spec.channels);
  std::vector<std::uint16_t> v(spec.channels);
  for (std::size_t i = 0; i < spec.channels; ++i) {
    wl[i] = spec.wavelength_min + (spec.wavelength_max - spec.wavelength_min) *
                                      static_cast<double>(i) / static_cast<double>(spec.channels - 1);
    v[i] = static_cast<std::uint16_t>(std::round(t.at(wl[i])));
  }
  return Hypercube(1, 1, wl, v);
}

SpectrumTemplate mix(const SpectrumTemplate& a, const SpectrumTemplate& b, double t) {
  std::vector<std::pair<double, double>> anchors;
  for (double nm = 400; nm <= 1000; nm += 2) anchors.emplace_back(nm, (1 - t) * a.at(nm) + t * b.at(nm));
  return SpectrumTemplate(anchors);
}

double pixel_jaccard(const std::vector<Pixel>& a, const std::vector<Pixel>& b) {
  std::set<Pixel> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::size_t inter = 0;
  for (const auto& p : sa) inter += sb.count(p);
  return static_cast<double>(inter) / static_cast<double>(sa.size() + sb.size() - inter);
}

}  // namespace

TEST_CASE("spectrum templates against the leaf filter", "[synth]") {
  using namespace spectra;
  CHECK(is_leaf(single_pixel(healthy_center()), 0, 0));
  CHECK(is_leaf(single_pixel(healthy_edge()), 0, 0));
  CHECK(is_leaf(single_pixel(stressed_center()), 0, 0));
  CHECK(is_leaf(single_pixel(stressed_edge()), 0, 0));
  CHECK_FALSE(is_leaf(single_pixel(background()), 0, 0));
  CHECK_FALSE(is_leaf(single_pixel(shade()), 0, 0));
  for (double t : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    CHECK(is_leaf(single_pixel(mix(healthy_center(), stressed_edge(), t)), 0, 0));
    CHECK(is_leaf(single_pixel(mix(healthy_edge(), stressed_center(), t)), 0, 0));
  }
  CHECK_THROWS_AS(SpectrumTemplate({{500, 1}}), Error);
}

TEST_CASE("three planted crowns", "[synth]") {
  SceneSpec spec;
  spec.width = 200;
  spec.height = 120;
  spec.tree_count = 3;
  spec.radius_min = 10;
  spec.radius_max = 14;
  spec.seed = 4;
  const auto scene = generate_scene(spec);
  REQUIRE(scene.crowns.size() == 3);
  std::set<Pixel> seen;
  for (const auto& c : scene.crowns) {
    CHECK(c.pixels.size() >= 40);
    for (const auto& p : c.pixels) CHECK(seen.insert(p).second);
  }
  CHECK(scene.crowns[0].pixels.front() < scene.crowns[1].pixels.front());
  CHECK(scene.cube.width() == 200);
  CHECK(scene.cube.channels() == spec.channels);
}

TEST_CASE("same seed gives identical cubes", "[synth]") {
  SceneSpec spec;
  spec.width = 160;
  spec.height = 100;
  spec.tree_count = 3;
  spec.radius_min = 10;
  spec.radius_max = 12;
  spec.noise = 40;
  spec.seed = 8;
  const auto a = generate_scene(spec), b = generate_scene(spec);
  CHECK(a.cube == b.cube);
  spec.seed = 9;
  CHECK_FALSE(generate_scene(spec).cube == a.cube);
}

TEST_CASE("placement failure is reported", "[synth]") {
  SceneSpec spec;
  spec.width = 60;
  spec.height = 60;
  spec.tree_count = 5;
  spec.radius_min = 15;
  spec.radius_max = 20;
  spec.max_attempts = 500;
  CHECK_THROWS_AS(generate_scene(spec), Error);
  spec.radius_max = 5;
  CHECK_THROWS_AS(generate_scene(spec), Error);
}

TEST_CASE("noise-free scene is recovered exactly", "[synth][recovery]") {
  SceneSpec spec;  // ten crowns, strong gradient, no noise
  const auto scene = generate_scene(spec);
  const auto trees = extract(scene.cube);
  REQUIRE(trees.size() == 10);
  std::set<int> matched;
  for (const auto& crown : scene.crowns) {
    INFO("crown " << crown.id);
    // Scan-order ids can differ from planting order once rims are trimmed.
    const auto best = std::max_element(trees.begin(), trees.end(), [&](const auto& a, const auto& b) {
      return pixel_jaccard(a.pixels, crown.pixels) < pixel_jaccard(b.pixels, crown.pixels);
    });
    CHECK(matched.insert(best->id).second);
    CHECK(pixel_jaccard(best->pixels, crown.pixels) >= 0.95);
    const auto profile = profile_tree(*best, compute_all(scene.cube, *best));
    for (std::size_t j = 0; j < kIndexCount; ++j) {
      INFO(index_name(index_at(j)));
      CHECK(monotone_run(profile, index_at(j)) == 5);
    }
  }
}

TEST_CASE("recovery loses only pixels of sparse rim grids", "[synth][recovery]") {
  SceneSpec spec;
  spec.width = 300;
  spec.height = 200;
  spec.tree_count = 4;
  spec.radius_min = 20;
  spec.radius_max = 30;
  spec.seed = 3;
  const auto scene = generate_scene(spec);
  const ExtractConfig cfg;
  const auto mask = connected_grids(classify_leaves(scene.cube), cfg.grid_side, cfg.min_leaf_per_grid);
  std::set<Pixel> extracted;
  for (const auto& t : extract(scene.cube, cfg)) extracted.insert(t.pixels.begin(), t.pixels.end());
  std::set<Pixel> planted;
  for (const auto& c : scene.crowns) planted.insert(c.pixels.begin(), c.pixels.end());
  for (const auto& p : extracted) CHECK(planted.count(p) == 1);
  std::size_t lost = 0;
  for (const auto& p : planted) {
    CHECK(mask.leaf(p.x, p.y));
    if (!extracted.count(p)) {
      ++lost;
      CHECK_FALSE(mask.in_connected_grid(p.x, p.y));
    }
  }
  CHECK(lost > 0);
}
