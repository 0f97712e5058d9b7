#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "canopy/error.hpp"
#include "canopy/segments.hpp"
#include "canopy/text.hpp"
#include "canopy/vegindex.hpp"

namespace canopy {

inline constexpr int kBandsPerIndex = 4;
inline constexpr std::size_t kVocabularySize = kBandsPerIndex * kIndexCount;

/// Numeric marker written for screened cells when `--paper-sentinel` is set.
inline constexpr double kOutlierSentinel = -1000000.0;

inline std::string_view band_name(int band) {
  static constexpr std::array<std::string_view, 4> names{"Low", "Mid", "High", "Very High"};
  if (band < 1 || band > kBandsPerIndex) throw Error("band id out of range");
  return names[static_cast<std::size_t>(band - 1)];
}

/// A vocabulary entry: band `b` of catalog index `j`. Internally 0-based
/// (j * 4 + b - 1); `number()` gives the 1-based id used in files.
struct Token {
  std::size_t id = 0;

  static Token of(VegIndex index, int band) {
    if (band < 1 || band > kBandsPerIndex) throw Error("band id out of range");
    return Token{index_position(index) * kBandsPerIndex + static_cast<std::size_t>(band - 1)};
  }
  static Token from_number(long long number) {
    if (number < 1 || number > static_cast<long long>(kVocabularySize)) {
      throw Error("token id " + std::to_string(number) + " outside 1..84");
    }
    return Token{static_cast<std::size_t>(number - 1)};
  }

  VegIndex index() const { return index_at(id / kBandsPerIndex); }
  int band() const { return static_cast<int>(id % kBandsPerIndex) + 1; }
  std::size_t number() const { return id + 1; }
  std::string name() const {
    return std::string(band_name(band())) + " " + std::string(index_name(index()));
  }

  friend auto operator<=>(const Token&, const Token&) = default;
};

/// Accepts "Low EVI", "V. High PSRI", "very high psri" or a 1-based id.
inline Token parse_token(std::string_view text_in) {
  const auto t = text::trim(text_in);
  if (auto n = text::parse_int(t)) return Token::from_number(*n);
  auto s = text::lower(t);
  int band = 0;
  std::string rest;
  auto starts = [&](std::string_view prefix) { return s.rfind(prefix, 0) == 0; };
  if (starts("very high ")) {
    band = 4;
    rest = s.substr(10);
  } else if (starts("v. high ")) {
    band = 4;
    rest = s.substr(8);
  } else if (starts("low ")) {
    band = 1;
    rest = s.substr(4);
  } else if (starts("mid ")) {
    band = 2;
    rest = s.substr(4);
  } else if (starts("high ")) {
    band = 3;
    rest = s.substr(5);
  } else {
    throw Error("cannot parse token '" + std::string(t) + "'");
  }
  return Token::of(parse_index_name(rest), band);
}

// ---------------------------------------------------------------------------
// Column statistics

using Column = std::vector<std::optional<double>>;

inline std::vector<double> present_values(const Column& column) {
  std::vector<double> v;
  for (const auto& x : column)
    if (x) v.push_back(*x);
  return v;
}

/// Quantile by linear interpolation between order statistics
/// (position q*(n-1) in the sorted sample).
inline double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw Error("quantile of empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

struct Normalization {
  double min = 0.0;
  double max = 0.0;

  double apply(double v) const { return max > min ? (v - min) / (max - min) : 0.0; }
};

inline Column minmax_normalize(const Column& column, Normalization* bounds = nullptr) {
  const auto values = present_values(column);
  if (values.empty()) throw Error("minmax_normalize: column has no values");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const Normalization norm{*lo, *hi};
  Column out(column.size());
  for (std::size_t i = 0; i < column.size(); ++i) {
    if (column[i]) out[i] = norm.apply(*column[i]);
  }
  if (bounds) *bounds = norm;
  return out;
}

/// Box-plot fences. `screened` is false when the column had too few values.
struct Fences {
  double q1 = 0.0;
  double q3 = 0.0;
  double iqr = 0.0;
  double lower = -INFINITY;
  double upper = INFINITY;
  bool screened = false;

  bool inside(double v) const { return lower <= v && v <= upper; }
};

inline Fences box_plot_fences(const Column& column) {
  auto values = present_values(column);
  Fences f;
  if (values.size() < 4) return f;
  std::sort(values.begin(), values.end());
  f.q1 = quantile_sorted(values, 0.25);
  f.q3 = quantile_sorted(values, 0.75);
  f.iqr = f.q3 - f.q1;
  f.lower = f.q1 - 1.5 * f.iqr;
  f.upper = f.q3 + 1.5 * f.iqr;
  f.screened = true;
  return f;
}

struct ScreenedColumn {
  Column values;  // outliers cleared
  std::vector<bool> outlier;
  Fences fences;
  std::size_t outlier_count = 0;
};

/// Clears values outside [Q1 - 1.5 IQR, Q3 + 1.5 IQR]; values on a fence
/// are kept. Needs at least four values, otherwise nothing is screened.
inline ScreenedColumn detect_outliers(const Column& column) {
  ScreenedColumn out;
  out.values = column;
  out.outlier.assign(column.size(), false);
  out.fences = box_plot_fences(column);
  if (!out.fences.screened) {
    warn("detect_outliers: fewer than 4 values, outlier screening skipped");
    return out;
  }
  for (std::size_t i = 0; i < column.size(); ++i) {
    if (column[i] && !out.fences.inside(*column[i])) {
      out.values[i].reset();
      out.outlier[i] = true;
      ++out.outlier_count;
    }
  }
  return out;
}

using BandThresholds = std::array<double, 3>;

inline BandThresholds band_thresholds(const Column& screened) {
  auto values = present_values(screened);
  if (values.size() < 4) {
    throw Error("band_thresholds: need at least 4 surviving values, have " +
                std::to_string(values.size()));
  }
  std::sort(values.begin(), values.end());
  return {quantile_sorted(values, 0.25), quantile_sorted(values, 0.5),
          quantile_sorted(values, 0.75)};
}

inline int assign_band(double v, const BandThresholds& t) {
  if (v <= t[0]) return 1;
  if (v <= t[1]) return 2;
  if (v <= t[2]) return 3;
  return 4;
}

// ---------------------------------------------------------------------------
// Band table

/// State of one (tree, segment, index) cell: a band 1..4, a screened
/// outlier, or missing because the index could not be computed. Outliers and
/// missing cells are treated alike downstream.
class BandCell {
 public:
  static BandCell banded(int band) {
    if (band < 1 || band > kBandsPerIndex) throw Error("band id out of range");
    return BandCell(static_cast<std::int8_t>(band));
  }
  static BandCell outlier() { return BandCell(0); }
  static BandCell missing() { return BandCell(-1); }

  BandCell() = default;
  bool valid() const { return code_ > 0; }
  bool is_outlier() const { return code_ == 0; }
  bool is_missing() const { return code_ < 0; }
  int band() const {
    if (!valid()) throw Error("cell holds no band");
    return code_;
  }
  friend bool operator==(const BandCell&, const BandCell&) = default;

 private:
  explicit BandCell(std::int8_t code) : code_(code) {}
  std::int8_t code_ = -1;
};

/// Per-index pipeline state kept alongside the cells.
struct IndexBanding {
  Normalization norm;
  Fences fences;
  BandThresholds thresholds{};
  std::size_t outliers = 0;
  std::size_t missing = 0;
};

/// Band ids for every (tree, segment, index) context cell plus the per-index
/// normalization, fences and thresholds that produced them. Trees keep the
/// order they were given in; segments are 0-based positions center->outer.
class BandTable {
 public:
  BandTable() = default;
  BandTable(std::vector<int> tree_ids, int segments, std::vector<BandCell> cells,
            std::array<IndexBanding, kIndexCount> banding, Column normalized = {})
      : tree_ids_(std::move(tree_ids)),
        segments_(segments),
        cells_(std::move(cells)),
        banding_(banding),
        normalized_(std::move(normalized)) {
    if (segments_ < 1) throw Error("BandTable: need at least one segment");
    if (cells_.size() != tree_ids_.size() * static_cast<std::size_t>(segments_) * kIndexCount) {
      throw Error("BandTable: cell count does not match trees x segments x indices");
    }
    if (!normalized_.empty() && normalized_.size() != cells_.size()) {
      throw Error("BandTable: normalized values do not match cell count");
    }
    for (std::size_t r = 0; r < tree_ids_.size(); ++r) {
      if (!rows_.emplace(tree_ids_[r], r).second) {
        throw Error("BandTable: duplicate tree id " + std::to_string(tree_ids_[r]));
      }
    }
  }

  std::size_t tree_count() const { return tree_ids_.size(); }
  int segment_count() const { return segments_; }
  std::span<const int> tree_ids() const { return tree_ids_; }
  std::size_t context_count() const { return tree_count() * static_cast<std::size_t>(segments_); }
  static constexpr std::size_t vocabulary_size() { return kVocabularySize; }

  bool has_tree(int tree_id) const { return rows_.contains(tree_id); }
  std::size_t row_of(int tree_id) const {
    auto it = rows_.find(tree_id);
    if (it == rows_.end()) throw Error("unknown tree id " + std::to_string(tree_id));
    return it->second;
  }

  /// Context id of (row, segment): row * |S| + segment.
  std::size_t context_of(std::size_t row, int segment) const {
    return row * static_cast<std::size_t>(segments_) + static_cast<std::size_t>(segment);
  }

  const BandCell& cell(std::size_t row, int segment, std::size_t index) const {
    return cells_[offset(row, segment, index)];
  }

  /// Normalized (pre-screening) segment mean, when the table carries them.
  std::optional<double> normalized(std::size_t row, int segment, std::size_t index) const {
    if (normalized_.empty()) return std::nullopt;
    return normalized_[offset(row, segment, index)];
  }
  bool has_normalized() const { return !normalized_.empty(); }

  const IndexBanding& banding(std::size_t index) const { return banding_[index]; }
  const std::array<IndexBanding, kIndexCount>& banding() const { return banding_; }
  std::span<const BandCell> cells() const { return cells_; }

  /// Attaches normalized values computed from raw profiles with the stored
  /// bounds (used when a table is reloaded from its CSV form).
  void attach_normalized(std::span<const SegmentProfile> profiles) {
    Column norm(cells_.size());
    for (const auto& p : profiles) {
      if (!has_tree(p.tree_id)) continue;
      if (p.segment_count() != segments_) throw Error("profile segment count mismatch");
      const auto row = row_of(p.tree_id);
      for (int s = 0; s < segments_; ++s) {
        for (std::size_t j = 0; j < kIndexCount; ++j) {
          if (const auto& v = p.means[static_cast<std::size_t>(s)][j]) {
            norm[offset(row, s, j)] = banding_[j].norm.apply(*v);
          }
        }
      }
    }
    normalized_ = std::move(norm);
  }

 private:
  std::size_t offset(std::size_t row, int segment, std::size_t index) const {
    return (row * static_cast<std::size_t>(segments_) + static_cast<std::size_t>(segment)) *
               kIndexCount +
           index;
  }

  std::vector<int> tree_ids_;
  int segments_ = 0;
  std::vector<BandCell> cells_;
  std::array<IndexBanding, kIndexCount> banding_{};
  Column normalized_;
  std::unordered_map<int, std::size_t> rows_;
};

/// normalize -> screen outliers -> quartile thresholds -> band, per index,
/// over all segments of all trees.
inline BandTable build_band_table(std::span<const SegmentProfile> profiles) {
  if (profiles.empty()) throw Error("build_band_table: no profiles");
  const int segments = profiles.front().segment_count();
  std::vector<int> ids;
  for (const auto& p : profiles) {
    if (p.segment_count() != segments) {
      throw Error("build_band_table: profiles disagree on segment count");
    }
    ids.push_back(p.tree_id);
  }
  const std::size_t contexts = profiles.size() * static_cast<std::size_t>(segments);
  std::vector<BandCell> cells(contexts * kIndexCount);
  Column normalized(contexts * kIndexCount);
  std::array<IndexBanding, kIndexCount> banding{};

  for (std::size_t j = 0; j < kIndexCount; ++j) {
    Column raw(contexts);
    for (std::size_t t = 0; t < profiles.size(); ++t) {
      for (int s = 0; s < segments; ++s) {
        raw[t * static_cast<std::size_t>(segments) + static_cast<std::size_t>(s)] =
            profiles[t].means[static_cast<std::size_t>(s)][j];
      }
    }
    const auto name = std::string(index_name(index_at(j)));
    if (present_values(raw).empty()) {
      throw Error("build_band_table: index " + name + " has no values in any segment");
    }
    auto& info = banding[j];
    const auto norm = minmax_normalize(raw, &info.norm);
    const auto screened = detect_outliers(norm);
    info.fences = screened.fences;
    info.outliers = screened.outlier_count;
    try {
      info.thresholds = band_thresholds(screened.values);
    } catch (const Error& e) {
      throw Error("build_band_table: index " + name + ": " + e.what());
    }
    for (std::size_t c = 0; c < contexts; ++c) {
      auto& cell = cells[c * kIndexCount + j];
      normalized[c * kIndexCount + j] = norm[c];
      if (!raw[c]) {
        cell = BandCell::missing();
        ++info.missing;
      } else if (screened.outlier[c]) {
        cell = BandCell::outlier();
      } else {
        cell = BandCell::banded(assign_band(*norm[c], info.thresholds));
      }
    }
  }
  return BandTable(std::move(ids), segments, std::move(cells), banding, std::move(normalized));
}

}  // namespace canopy
