#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "canopy/banding.hpp"
#include "canopy/embed.hpp"
#include "canopy/error.hpp"

namespace canopy {

/// Which segments stand in for an unusable segment `p`: the valid segments
/// at the smallest ring distance k >= 1. Empty when no segment is valid.
struct NearestSegments {
  std::optional<int> inner;  // p - k
  std::optional<int> outer;  // p + k

  bool found() const { return inner.has_value() || outer.has_value(); }
};

inline NearestSegments nearest_valid_segments(const std::vector<bool>& valid, int p) {
  const int n = static_cast<int>(valid.size());
  for (int k = 1; k < n; ++k) {
    NearestSegments out;
    if (p - k >= 0 && valid[static_cast<std::size_t>(p - k)]) out.inner = p - k;
    if (p + k < n && valid[static_cast<std::size_t>(p + k)]) out.outer = p + k;
    if (out.found()) return out;
  }
  return {};
}

namespace detail {

inline std::vector<bool> valid_segments(const BandTable& table, std::size_t row,
                                        std::size_t index) {
  std::vector<bool> valid(static_cast<std::size_t>(table.segment_count()));
  for (int s = 0; s < table.segment_count(); ++s) {
    valid[static_cast<std::size_t>(s)] = table.cell(row, s, index).valid();
  }
  return valid;
}

inline std::span<const double> band_embedding(const BandTable& table, const EmbeddingModel& model,
                                              std::size_t row, int segment, std::size_t index) {
  const auto token = Token::of(index_at(index), table.cell(row, segment, index).band());
  return model.embedding(token.id);
}

}  // namespace detail

/// Embedding for an unusable (outlier or missing) cell: copied from the
/// nearest valid segment of the same index, averaged when both neighbours
/// at that distance are valid, zero (with a warning) when none is.
inline std::vector<double> impute_cell(const BandTable& table, const EmbeddingModel& model,
                                       int tree_id, int segment, std::size_t index) {
  const auto row = table.row_of(tree_id);
  const auto dim = model.architecture().embedding_dim;
  const auto valid = detail::valid_segments(table, row, index);
  const auto nearest = nearest_valid_segments(valid, segment);
  std::vector<double> out(dim, 0.0);
  if (!nearest.found()) {
    warn("tree " + std::to_string(tree_id) + ": no valid segment for " +
         std::string(index_name(index_at(index))) + ", using zero embedding");
    return out;
  }
  if (nearest.inner && nearest.outer) {
    const auto a = detail::band_embedding(table, model, row, *nearest.inner, index);
    const auto b = detail::band_embedding(table, model, row, *nearest.outer, index);
    for (std::size_t r = 0; r < dim; ++r) out[r] = 0.5 * (a[r] + b[r]);
  } else {
    const auto a = detail::band_embedding(table, model, row,
                                          nearest.inner ? *nearest.inner : *nearest.outer, index);
    std::copy(a.begin(), a.end(), out.begin());
  }
  return out;
}

struct TreeEmbedding {
  int tree_id = 0;
  std::vector<double> values;
  std::size_t imputed_cells = 0;
};

inline std::size_t tree_vector_length(int segments, std::size_t embedding_dim) {
  return static_cast<std::size_t>(segments) * kIndexCount * embedding_dim;
}

inline std::vector<std::size_t> all_index_positions() {
  std::vector<std::size_t> all(kIndexCount);
  for (std::size_t j = 0; j < kIndexCount; ++j) all[j] = j;
  return all;
}

/// Segments center->outer, indices in catalog order within a segment,
/// embedding dimensions within an index. `indices` restricts the layout to a
/// subset of catalog positions (all 21 when empty).
inline TreeEmbedding tree_vector(const BandTable& table, const EmbeddingModel& model,
                                 int tree_id, std::span<const std::size_t> indices = {}) {
  if (model.architecture().vocabulary != kVocabularySize) {
    throw Error("tree_vector: model vocabulary must be " + std::to_string(kVocabularySize));
  }
  const auto all = all_index_positions();
  if (indices.empty()) indices = all;
  const auto row = table.row_of(tree_id);
  const auto dim = model.architecture().embedding_dim;
  TreeEmbedding out;
  out.tree_id = tree_id;
  out.values.reserve(static_cast<std::size_t>(table.segment_count()) * indices.size() * dim);
  for (int s = 0; s < table.segment_count(); ++s) {
    for (std::size_t j : indices) {
      if (j >= kIndexCount) throw Error("tree_vector: index position out of range");
      if (table.cell(row, s, j).valid()) {
        const auto e = detail::band_embedding(table, model, row, s, j);
        out.values.insert(out.values.end(), e.begin(), e.end());
      } else {
        const auto e = impute_cell(table, model, tree_id, s, j);
        out.values.insert(out.values.end(), e.begin(), e.end());
        ++out.imputed_cells;
      }
    }
  }
  return out;
}

inline std::vector<TreeEmbedding> tree_vectors(const BandTable& table,
                                               const EmbeddingModel& model) {
  std::vector<TreeEmbedding> out;
  for (int id : table.tree_ids()) out.push_back(tree_vector(table, model, id));
  return out;
}

}  // namespace canopy
