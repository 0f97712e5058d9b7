#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "canopy/error.hpp"
#include "canopy/hypercube.hpp"
#include "canopy/pixel.hpp"
#include "canopy/text.hpp"

namespace canopy {

/// The 21 hyperspectral vegetation indices, in catalog order. The order is
/// part of the data model: it fixes the token layout and vector layouts.
enum class VegIndex : std::uint8_t {
  ARI1, ARI2, ARVI, CRI1, CRI2, EVI, MCARI, MCARI2, MRENVI, MRESRI, NDVI,
  PRI, PSRI, RENDVI, SRI, SIPI, TCARI, VREI1, VREI2, VREI3, WBI,
};

inline constexpr std::size_t kIndexCount = 21;

struct IndexDescriptor {
  VegIndex id;
  std::string_view name;
  std::string_view long_name;
  std::string_view wavelengths;  // nm referenced directly, for documentation/exports
  std::string_view broadband;    // broadband tokens (NIR/Red/Green/Blue) used
};

inline const std::array<IndexDescriptor, kIndexCount>& index_catalog() {
  static const std::array<IndexDescriptor, kIndexCount> catalog{{
      {VegIndex::ARI1, "ARI1", "Anthocyanin Reflectance Index 1", "550 700", ""},
      {VegIndex::ARI2, "ARI2", "Anthocyanin Reflectance Index 2", "550 700 800", ""},
      {VegIndex::ARVI, "ARVI", "Atmospherically Resistant Vegetation Index", "", "NIR Red Blue"},
      {VegIndex::CRI1, "CRI1", "Carotenoid Reflectance Index 1", "510 550", ""},
      {VegIndex::CRI2, "CRI2", "Carotenoid Reflectance Index 2", "510 700", ""},
      {VegIndex::EVI, "EVI", "Enhanced Vegetation Index", "", "NIR Red Blue"},
      {VegIndex::MCARI, "MCARI", "Modified Chlorophyll Absorption Reflectance Index",
       "550 670 700", ""},
      {VegIndex::MCARI2, "MCARI2",
       "Modified Chlorophyll Absorption Reflectance Index Improved", "", "NIR Red Green"},
      {VegIndex::MRENVI, "MRENVI", "Modified Red Edge Normalized Vegetation Index",
       "445 700 705 750", ""},
      {VegIndex::MRESRI, "MRESRI", "Modified Red Edge Simple Ratio Index", "445 705 750", ""},
      {VegIndex::NDVI, "NDVI", "Normalized Difference Vegetation Index", "", "NIR Red"},
      {VegIndex::PRI, "PRI", "Photochemical Reflectance Index", "531 570", ""},
      {VegIndex::PSRI, "PSRI", "Plant Senescence Reflectance Index", "500 680 750", ""},
      {VegIndex::RENDVI, "RENDVI", "Red Edge Normalized Difference Vegetation Index",
       "705 750", ""},
      {VegIndex::SRI, "SRI", "Simple Ratio Index", "", "NIR Red"},
      {VegIndex::SIPI, "SIPI", "Structure Insensitive Pigment Index", "445 680 800", ""},
      {VegIndex::TCARI, "TCARI", "Transformed Chlorophyll Absorption Reflectance Index",
       "550 670 700", ""},
      {VegIndex::VREI1, "VREI1", "Vogelmann Red Edge Index 1", "720 740", ""},
      {VegIndex::VREI2, "VREI2", "Vogelmann Red Edge Index 2", "715 726 734 747", ""},
      {VegIndex::VREI3, "VREI3", "Vogelmann Red Edge Index 3", "715 720 734 747", ""},
      {VegIndex::WBI, "WBI", "Water Band Index", "900 970", ""},
  }};
  return catalog;
}

inline constexpr std::size_t index_position(VegIndex id) { return static_cast<std::size_t>(id); }

inline std::string_view index_name(VegIndex id) { return index_catalog()[index_position(id)].name; }

inline VegIndex index_at(std::size_t position) {
  if (position >= kIndexCount) throw Error("vegetation index position out of range");
  return static_cast<VegIndex>(position);
}

inline VegIndex parse_index_name(std::string_view name) {
  const auto wanted = text::lower(text::trim(name));
  for (const auto& d : index_catalog()) {
    if (text::lower(d.name) == wanted) return d.id;
  }
  throw Error("unknown vegetation index '" + std::string(name) + "'");
}

/// Wavelengths standing in for the broadband terms of ARVI/EVI/MCARI2/NDVI/SRI.
struct Broadband {
  double nir = 800.0;
  double red = 670.0;
  double green = 550.0;
  double blue = 445.0;
};

struct IndexConfig {
  Broadband broadband;
  double arvi_gamma = 1.0;
  /// Use the common literature forms of MRENVI and VREI3 instead of the
  /// catalog's printed forms.
  bool literature_variants = false;
};

/// Missing when the formula hits a zero denominator, a negative radicand, or
/// produces a non-finite value.
using IndexValue = std::optional<double>;

namespace detail {

inline IndexValue ratio(double num, double den) {
  if (den == 0.0) return std::nullopt;
  const double v = num / den;
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

inline IndexValue finite(double v) {
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

inline IndexValue reciprocal_difference(double a, double b) {
  if (a == 0.0 || b == 0.0) return std::nullopt;
  return finite(1.0 / a - 1.0 / b);
}

}  // namespace detail

/// Evaluates one catalog formula. `p(nm)` returns reflectance at the
/// channel standing in for `nm`; reflectance is used on its stored scale.
template <class Reflectance>
IndexValue evaluate_index(VegIndex index, Reflectance&& p, const IndexConfig& cfg = {}) {
  using detail::finite;
  using detail::ratio;
  using detail::reciprocal_difference;
  const auto& bb = cfg.broadband;
  switch (index) {
    case VegIndex::ARI1:
      return reciprocal_difference(p(550), p(700));
    case VegIndex::ARI2: {
      auto r = reciprocal_difference(p(550), p(700));
      if (!r) return std::nullopt;
      return finite(p(800) * *r);
    }
    case VegIndex::ARVI: {
      const double nir = p(bb.nir), red = p(bb.red), blue = p(bb.blue);
      const double rb = red - cfg.arvi_gamma * (blue - red);
      return ratio(nir - rb, nir + rb);
    }
    case VegIndex::CRI1:
      return reciprocal_difference(p(510), p(550));
    case VegIndex::CRI2:
      return reciprocal_difference(p(510), p(700));
    case VegIndex::EVI: {
      const double nir = p(bb.nir), red = p(bb.red), blue = p(bb.blue);
      return ratio(nir - red, nir + 6.0 * red - 7.5 * blue + 1.0);
    }
    case VegIndex::MCARI:
    case VegIndex::TCARI: {
      const double p550 = p(550), p670 = p(670), p700 = p(700);
      auto rel = ratio(p700, p670);
      if (!rel) return std::nullopt;
      const double v = p700 - p670 - 0.2 * (p700 - p550) * *rel;
      return finite(index == VegIndex::TCARI ? 3.0 * v : v);
    }
    case VegIndex::MCARI2: {
      const double nir = p(bb.nir), red = p(bb.red), green = p(bb.green);
      if (red < 0.0) return std::nullopt;
      const double radicand =
          (2.0 * nir + 1.0) * (2.0 * nir + 1.0) - (6.0 * nir - 5.0 * std::sqrt(red)) - 0.5;
      if (!(radicand > 0.0)) return std::nullopt;
      return ratio(1.5 * (2.5 * (nir - red) - 1.3 * (nir - green)), std::sqrt(radicand));
    }
    case VegIndex::MRENVI: {
      const double p445 = p(445), p705 = p(705), p750 = p(750);
      const double lead = cfg.literature_variants ? p750 : p(700);
      return ratio(lead - p705, p750 + p705 - 2.0 * p445);
    }
    case VegIndex::MRESRI: {
      const double p445 = p(445);
      return ratio(p(750) - p445, p(705) - p445);
    }
    case VegIndex::NDVI: {
      const double nir = p(bb.nir), red = p(bb.red);
      return ratio(nir - red, nir + red);
    }
    case VegIndex::PRI: {
      const double a = p(531), b = p(570);
      return ratio(a - b, a + b);
    }
    case VegIndex::PSRI:
      return ratio(p(680) - p(500), p(750));
    case VegIndex::RENDVI: {
      const double a = p(750), b = p(705);
      return ratio(a - b, a + b);
    }
    case VegIndex::SRI:
      return ratio(p(bb.nir), p(bb.red));
    case VegIndex::SIPI: {
      const double p800 = p(800);
      return ratio(p800 - p(445), p800 + p(680));
    }
    case VegIndex::VREI1:
      return ratio(p(740), p(720));
    case VegIndex::VREI2:
      return ratio(p(734) - p(747), p(715) - p(726));
    case VegIndex::VREI3: {
      const double tail = cfg.literature_variants ? p(726) : p(720);
      return ratio(p(734) - p(747), p(715) + tail);
    }
    case VegIndex::WBI:
      return ratio(p(970), p(900));
  }
  return std::nullopt;
}

inline IndexValue compute_index(const Hypercube& cube, long x, long y, VegIndex index,
                                const IndexConfig& cfg = {}) {
  if (!cube.contains(x, y)) throw Error("compute_index: pixel out of bounds");
  return evaluate_index(index, [&](double nm) { return cube.brightness(x, y, nm); }, cfg);
}

using IndexVector = std::array<IndexValue, kIndexCount>;

template <class Reflectance>
IndexVector evaluate_all(Reflectance&& p, const IndexConfig& cfg = {}) {
  IndexVector out;
  for (std::size_t j = 0; j < kIndexCount; ++j) out[j] = evaluate_index(index_at(j), p, cfg);
  return out;
}

struct PixelIndexRow {
  int tree_id = 0;
  Pixel pixel;
  IndexVector values;
};

/// One row per region pixel, in the region's pixel order.
inline std::vector<PixelIndexRow> compute_all(const Hypercube& cube, const TreeRegion& region,
                                              const IndexConfig& cfg = {}) {
  std::vector<PixelIndexRow> rows;
  rows.reserve(region.pixels.size());
  for (const auto& px : region.pixels) {
    if (!cube.contains(px.x, px.y)) throw Error("compute_all: region pixel out of bounds");
    rows.push_back({region.id, px,
                    evaluate_all([&](double nm) { return cube.brightness(px.x, px.y, nm); }, cfg)});
  }
  return rows;
}

}  // namespace canopy
