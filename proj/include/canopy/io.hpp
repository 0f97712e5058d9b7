#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "canopy/analysis.hpp"
#include "canopy/banding.hpp"
#include "canopy/embed.hpp"
#include "canopy/error.hpp"
#include "canopy/segments.hpp"
#include "canopy/synth.hpp"
#include "canopy/text.hpp"
#include "canopy/treevec.hpp"
#include "canopy/treex.hpp"
#include "canopy/vegindex.hpp"

namespace canopy::io {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

inline constexpr int kModelFormatVersion = 1;

inline void write_json(const fs::path& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

inline json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

namespace detail {

inline std::string field(const IndexValue& v) { return v ? text::format_double(*v) : ""; }

inline IndexValue optional_field(const std::string& s, const fs::path& path) {
  if (s.empty()) return std::nullopt;
  auto v = text::parse_double(s);
  if (!v) throw Error(path.string() + ": bad number '" + s + "'");
  return v;
}

inline std::vector<std::string> index_header() {
  std::vector<std::string> h;
  for (const auto& d : index_catalog()) h.emplace_back(d.name);
  return h;
}

// Doubles are stored as shortest round-trip text so reloads are exact.
inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Tree masks

inline void write_trees_csv(const fs::path& path, const std::vector<TreeRegion>& trees) {
  text::CsvWriter out(path);
  out.row({"tree_id", "x", "y"});
  for (const auto& t : trees)
    for (const auto& p : t.pixels)
      out.row({std::to_string(t.id), std::to_string(p.x), std::to_string(p.y)});
}

/// Regions in order of first appearance.
inline std::vector<TreeRegion> read_trees_csv(const fs::path& path) {
  const auto csv = text::read_csv(path);
  const auto ci = csv.column("tree_id"), cx = csv.column("x"), cy = csv.column("y");
  std::vector<TreeRegion> trees;
  std::map<int, std::size_t> slot;
  for (const auto& r : csv.rows) {
    const int id = static_cast<int>(text::require_int(r[ci], path.string()));
    auto [it, fresh] = slot.emplace(id, trees.size());
    if (fresh) trees.push_back(TreeRegion{id, {}});
    trees[it->second].pixels.push_back(
        {static_cast<int>(text::require_int(r[cx], path.string())),
         static_cast<int>(text::require_int(r[cy], path.string()))});
  }
  return trees;
}

inline std::vector<TreeRegion> ground_truth_regions(const std::vector<PlantedCrown>& crowns) {
  std::vector<TreeRegion> out;
  for (const auto& c : crowns) out.push_back(TreeRegion{c.id, c.pixels});
  return out;
}

inline json trees_summary(const std::vector<TreeRegion>& trees, const LeafMask& mask) {
  json doc;
  doc["tree_count"] = trees.size();
  doc["leaf_pixels"] = mask.leaf_count();
  doc["connected_grid_pixels"] = mask.connected_count();
  std::size_t total = 0;
  json sizes = json::array();
  for (const auto& t : trees) {
    total += t.pixel_count();
    sizes.push_back({{"tree_id", t.id}, {"pixels", t.pixel_count()}});
  }
  doc["tree_pixels"] = total;
  doc["trees"] = std::move(sizes);
  return doc;
}

// ---------------------------------------------------------------------------
// Per-pixel indices

inline void write_pixel_indices(const fs::path& path, const std::vector<PixelIndexRow>& rows) {
  text::CsvWriter out(path);
  std::vector<std::string> header{"tree_id", "x", "y"};
  for (auto& h : detail::index_header()) header.push_back(std::move(h));
  out.row(header);
  std::vector<std::string> f;
  for (const auto& r : rows) {
    f = {std::to_string(r.tree_id), std::to_string(r.pixel.x), std::to_string(r.pixel.y)};
    for (const auto& v : r.values) f.push_back(detail::field(v));
    out.row(f);
  }
}

inline std::vector<PixelIndexRow> read_pixel_indices(const fs::path& path) {
  const auto csv = text::read_csv(path);
  const auto ci = csv.column("tree_id"), cx = csv.column("x"), cy = csv.column("y");
  std::array<std::size_t, kIndexCount> cols{};
  for (std::size_t j = 0; j < kIndexCount; ++j) cols[j] = csv.column(index_name(index_at(j)));
  std::vector<PixelIndexRow> rows;
  rows.reserve(csv.rows.size());
  for (const auto& r : csv.rows) {
    PixelIndexRow row;
    row.tree_id = static_cast<int>(text::require_int(r[ci], path.string()));
    row.pixel = {static_cast<int>(text::require_int(r[cx], path.string())),
                 static_cast<int>(text::require_int(r[cy], path.string()))};
    for (std::size_t j = 0; j < kIndexCount; ++j)
      row.values[j] = detail::optional_field(r[cols[j]], path);
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Segment profiles

inline void write_segments_csv(const fs::path& path, const std::vector<SegmentProfile>& profiles) {
  text::CsvWriter out(path);
  std::vector<std::string> header{"tree_id", "segment", "pixel_count"};
  for (auto& h : detail::index_header()) header.push_back(std::move(h));
  out.row(header);
  std::vector<std::string> f;
  for (const auto& p : profiles) {
    for (int s = 0; s < p.segment_count(); ++s) {
      const auto su = static_cast<std::size_t>(s);
      f = {std::to_string(p.tree_id), std::to_string(s + 1), std::to_string(p.pixel_counts[su])};
      for (const auto& v : p.means[su]) f.push_back(detail::field(v));
      out.row(f);
    }
  }
}

inline std::vector<SegmentProfile> read_segments_csv(const fs::path& path) {
  const auto csv = text::read_csv(path);
  const auto ci = csv.column("tree_id"), cs = csv.column("segment"),
             cn = csv.column("pixel_count");
  std::array<std::size_t, kIndexCount> cols{};
  for (std::size_t j = 0; j < kIndexCount; ++j) cols[j] = csv.column(index_name(index_at(j)));
  std::vector<SegmentProfile> profiles;
  std::map<int, std::size_t> slot;
  for (const auto& r : csv.rows) {
    const int id = static_cast<int>(text::require_int(r[ci], path.string()));
    const auto seg = text::require_int(r[cs], path.string());
    auto [it, fresh] = slot.emplace(id, profiles.size());
    if (fresh) profiles.push_back(SegmentProfile{id, {}, {}});
    auto& p = profiles[it->second];
    if (seg != p.segment_count() + 1) {
      throw Error(path.string() + ": segments of tree " + std::to_string(id) +
                  " are not consecutive from 1");
    }
    p.pixel_counts.push_back(static_cast<std::size_t>(text::require_int(r[cn], path.string())));
    IndexVector means;
    for (std::size_t j = 0; j < kIndexCount; ++j)
      means[j] = detail::optional_field(r[cols[j]], path);
    p.means.push_back(means);
  }
  if (!profiles.empty()) {
    const int n = profiles.front().segment_count();
    for (const auto& p : profiles)
      if (p.segment_count() != n) throw Error(path.string() + ": trees disagree on segment count");
  }
  return profiles;
}

/// One row per index: count of trees whose longest monotone run is 1..|S|.
inline void write_monotone_histogram(const fs::path& path,
                                     const std::vector<SegmentProfile>& profiles, int segments) {
  text::CsvWriter out(path);
  std::vector<std::string> header{"index"};
  for (int l = 1; l <= segments; ++l) header.push_back("run_" + std::to_string(l));
  out.row(header);
  for (const auto& d : index_catalog()) {
    const auto counts = monotone_histogram(profiles, d.id, segments);
    std::vector<std::string> f{std::string(d.name)};
    for (int l = 1; l <= segments; ++l) f.push_back(std::to_string(counts[static_cast<std::size_t>(l - 1)]));
    out.row(f);
  }
}

// ---------------------------------------------------------------------------
// Band table

inline std::string cell_text(const BandCell& c, bool paper_sentinel) {
  if (c.valid()) return std::to_string(c.band());
  if (c.is_outlier()) return paper_sentinel ? "-1000000" : "outlier";
  return "missing";
}

inline BandCell parse_cell(std::string_view s) {
  const auto t = text::lower(text::trim(s));
  if (t == "outlier" || t == "-1000000" || t == "-1e6" || t == "-1e+06") return BandCell::outlier();
  if (t == "missing" || t.empty()) return BandCell::missing();
  if (auto b = text::parse_int(t)) return BandCell::banded(static_cast<int>(*b));
  throw Error("unrecognised band cell '" + std::string(s) + "'");
}

inline void write_bands_csv(const fs::path& path, const BandTable& table, bool paper_sentinel) {
  text::CsvWriter out(path);
  out.row({"tree_id", "segment", "index_name", "band_or_marker"});
  for (std::size_t row = 0; row < table.tree_count(); ++row) {
    const auto id = std::to_string(table.tree_ids()[row]);
    for (int s = 0; s < table.segment_count(); ++s) {
      for (std::size_t j = 0; j < kIndexCount; ++j) {
        out.row({id, std::to_string(s + 1), std::string(index_name(index_at(j))),
                 cell_text(table.cell(row, s, j), paper_sentinel)});
      }
    }
  }
}

inline json band_thresholds_json(const BandTable& table) {
  json doc;
  doc["segments"] = table.segment_count();
  doc["tree_count"] = table.tree_count();
  json indices = json::array();
  for (std::size_t j = 0; j < kIndexCount; ++j) {
    const auto& b = table.banding(j);
    json e;
    e["index"] = index_name(index_at(j));
    e["normalization"] = {{"min", b.norm.min}, {"max", b.norm.max}};
    json f;
    f["screened"] = b.fences.screened;
    if (b.fences.screened) {
      f["q1"] = b.fences.q1;
      f["q3"] = b.fences.q3;
      f["iqr"] = b.fences.iqr;
      f["lower"] = b.fences.lower;
      f["upper"] = b.fences.upper;
    }
    e["fences"] = std::move(f);
    e["thresholds"] = {b.thresholds[0], b.thresholds[1], b.thresholds[2]};
    e["outliers"] = b.outliers;
    e["missing"] = b.missing;
    indices.push_back(std::move(e));
  }
  doc["indices"] = std::move(indices);
  return doc;
}

/// Rebuilds a BandTable from its CSV cells and thresholds JSON. Trees keep
/// CSV order.
inline BandTable read_band_table(const fs::path& bands_csv, const fs::path& thresholds_json) {
  const auto doc = read_json(thresholds_json);
  std::array<IndexBanding, kIndexCount> banding{};
  const auto& entries = doc.at("indices");
  if (entries.size() != kIndexCount) throw Error(thresholds_json.string() + ": expected 21 indices");
  for (const auto& e : entries) {
    const auto j = index_position(parse_index_name(e.at("index").get<std::string>()));
    auto& b = banding[j];
    b.norm.min = e.at("normalization").at("min").get<double>();
    b.norm.max = e.at("normalization").at("max").get<double>();
    const auto& f = e.at("fences");
    b.fences.screened = f.at("screened").get<bool>();
    if (b.fences.screened) {
      b.fences.q1 = f.at("q1").get<double>();
      b.fences.q3 = f.at("q3").get<double>();
      b.fences.iqr = f.at("iqr").get<double>();
      b.fences.lower = f.at("lower").get<double>();
      b.fences.upper = f.at("upper").get<double>();
    }
    for (std::size_t q = 0; q < 3; ++q) b.thresholds[q] = e.at("thresholds").at(q).get<double>();
    b.outliers = e.at("outliers").get<std::size_t>();
    b.missing = e.at("missing").get<std::size_t>();
  }
  const int segments = doc.at("segments").get<int>();

  const auto csv = text::read_csv(bands_csv);
  const auto ci = csv.column("tree_id"), cs = csv.column("segment"),
             cn = csv.column("index_name"), cb = csv.column("band_or_marker");
  std::vector<int> ids;
  std::map<int, std::size_t> slot;
  std::vector<std::optional<BandCell>> cells;
  for (const auto& r : csv.rows) {
    const int id = static_cast<int>(text::require_int(r[ci], bands_csv.string()));
    const auto seg = text::require_int(r[cs], bands_csv.string());
    if (seg < 1 || seg > segments) throw Error(bands_csv.string() + ": segment out of range");
    auto [it, fresh] = slot.emplace(id, ids.size());
    if (fresh) {
      ids.push_back(id);
      cells.resize(cells.size() + static_cast<std::size_t>(segments) * kIndexCount);
    }
    const auto j = index_position(parse_index_name(r[cn]));
    auto& c = cells[(it->second * static_cast<std::size_t>(segments) +
                     static_cast<std::size_t>(seg - 1)) * kIndexCount + j];
    if (c) throw Error(bands_csv.string() + ": duplicate cell for tree " + std::to_string(id));
    c = parse_cell(r[cb]);
  }
  std::vector<BandCell> flat;
  flat.reserve(cells.size());
  for (const auto& c : cells) {
    if (!c) throw Error(bands_csv.string() + ": incomplete band table");
    flat.push_back(*c);
  }
  return BandTable(std::move(ids), segments, std::move(flat), banding);
}

// ---------------------------------------------------------------------------
// Model

inline json architecture_json(const Architecture& a) {
  return {{"vocabulary", a.vocabulary}, {"embedding_dim", a.embedding_dim},
          {"hidden", a.hidden},         {"leaky_slope", a.leaky_slope},
          {"bias", a.bias}};
}

inline Architecture architecture_from(const json& j) {
  Architecture a;
  a.vocabulary = j.at("vocabulary").get<std::size_t>();
  a.embedding_dim = j.at("embedding_dim").get<std::size_t>();
  a.hidden = j.at("hidden").get<std::size_t>();
  a.leaky_slope = j.at("leaky_slope").get<double>();
  a.bias = j.at("bias").get<bool>();
  return a;
}

inline json train_config_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},   {"learning_rate", c.learning_rate},
          {"dropout", c.dropout}, {"beta1", c.beta1},
          {"beta2", c.beta2},     {"epsilon", c.epsilon},
          {"init_scale", c.init_scale}, {"seed", c.seed}};
}

inline void write_model(const fs::path& path, const EmbeddingModel& model, const TrainConfig& cfg,
                        double initial_loss, double final_loss) {
  json doc;
  doc["format"] = "canopy-embedding-model";
  doc["version"] = kModelFormatVersion;
  doc["architecture"] = architecture_json(model.architecture());
  doc["training"] = train_config_json(cfg);
  doc["initial_loss"] = detail::number_or_null(initial_loss);
  doc["final_loss"] = detail::number_or_null(final_loss);
  const auto p = model.parameters();
  doc["parameters"] = std::vector<double>(p.begin(), p.end());
  write_json(path, doc);
}

inline EmbeddingModel read_model(const fs::path& path) {
  const auto doc = read_json(path);
  if (doc.value("format", "") != "canopy-embedding-model") {
    throw Error(path.string() + ": not an embedding model file");
  }
  if (doc.at("version").get<int>() != kModelFormatVersion) {
    throw Error(path.string() + ": unsupported model version");
  }
  EmbeddingModel model(architecture_from(doc.at("architecture")));
  const auto& p = doc.at("parameters");
  auto params = model.parameters();
  if (p.size() != params.size()) throw Error(path.string() + ": parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) params[i] = p[i].get<double>();
  return model;
}

inline void write_loss_history(const fs::path& path, const TrainResult& r) {
  text::CsvWriter out(path);
  out.row({"epoch", "final_loss"});
  out.row({"0", text::format_double(r.initial_loss)});
  for (std::size_t e = 0; e < r.loss_history.size(); ++e)
    out.row({std::to_string(e + 1), text::format_double(r.loss_history[e])});
}

/// One row per vocabulary token.
inline void write_embeddings_csv(const fs::path& path, const EmbeddingModel& model) {
  const auto& a = model.architecture();
  text::CsvWriter out(path);
  std::vector<std::string> header{"token", "name"};
  for (std::size_t r = 1; r <= a.embedding_dim; ++r) header.push_back("e" + std::to_string(r));
  out.row(header);
  for (std::size_t t = 0; t < a.vocabulary; ++t) {
    std::vector<std::string> f{std::to_string(t + 1),
                               a.vocabulary == kVocabularySize ? Token{t}.name() : ""};
    for (double v : model.embedding(t)) f.push_back(text::format_double(v));
    out.row(f);
  }
}

// ---------------------------------------------------------------------------
// Feature vectors

inline void write_features_csv(const fs::path& path, const FeatureSet& features,
                               const std::vector<std::string>& column_names) {
  text::CsvWriter out(path);
  std::vector<std::string> header{"tree_id"};
  header.insert(header.end(), column_names.begin(), column_names.end());
  out.row(header);
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features.rows[i].size() != column_names.size()) {
      throw Error("write_features_csv: row width does not match header");
    }
    std::vector<std::string> f{std::to_string(features.tree_ids[i])};
    for (double v : features.rows[i]) f.push_back(text::format_double(v));
    out.row(f);
  }
}

inline FeatureSet read_features_csv(const fs::path& path) {
  const auto csv = text::read_csv(path);
  const auto ci = csv.column("tree_id");
  FeatureSet out;
  for (const auto& r : csv.rows) {
    out.tree_ids.push_back(static_cast<int>(text::require_int(r[ci], path.string())));
    std::vector<double> row;
    row.reserve(r.size() - 1);
    for (std::size_t c = 0; c < r.size(); ++c)
      if (c != ci) row.push_back(text::require_double(r[c], path.string()));
    out.rows.push_back(std::move(row));
  }
  return out;
}

/// "s<segment>_<index>_e<dim>" for tree vectors.
inline std::vector<std::string> tree_vector_columns(int segments, std::size_t dim) {
  std::vector<std::string> names;
  for (int s = 1; s <= segments; ++s)
    for (const auto& d : index_catalog())
      for (std::size_t r = 1; r <= dim; ++r)
        names.push_back("s" + std::to_string(s) + "_" + std::string(d.name) + "_e" +
                        std::to_string(r));
  return names;
}

/// "s<segment>_<index>" for direct vectors.
inline std::vector<std::string> direct_vector_columns(int segments) {
  std::vector<std::string> names;
  for (int s = 1; s <= segments; ++s)
    for (const auto& d : index_catalog())
      names.push_back("s" + std::to_string(s) + "_" + std::string(d.name));
  return names;
}

// ---------------------------------------------------------------------------
// Clusters and analyses

inline void write_clusters(const fs::path& csv_path, const fs::path& json_path,
                           const ClusterAssignment& a) {
  text::CsvWriter out(csv_path);
  out.row({"tree_id", "cluster"});
  for (std::size_t i = 0; i < a.tree_ids.size(); ++i)
    out.row({std::to_string(a.tree_ids[i]), std::to_string(a.labels[i])});
  json doc;
  doc["k"] = a.k;
  doc["seed"] = a.seed;
  doc["space"] = a.space;
  doc["inertia"] = a.inertia;
  doc["iterations"] = a.iterations;
  json sizes = json::array();
  for (int l = 1; l <= a.k; ++l) sizes.push_back(a.members(l).size());
  doc["cluster_sizes"] = std::move(sizes);
  write_json(json_path, doc);
}

/// k is the largest label seen.
inline ClusterAssignment read_clusters_csv(const fs::path& path) {
  const auto csv = text::read_csv(path);
  const auto ci = csv.column("tree_id"), cl = csv.column("cluster");
  ClusterAssignment a;
  for (const auto& r : csv.rows) {
    a.tree_ids.push_back(static_cast<int>(text::require_int(r[ci], path.string())));
    const int label = static_cast<int>(text::require_int(r[cl], path.string()));
    if (label < 1) throw Error(path.string() + ": cluster labels start at 1");
    a.labels.push_back(label);
    a.k = std::max(a.k, label);
  }
  a.space = path.stem().string();
  return a;
}

inline void write_confusion_csv(const fs::path& path, const CountMatrix& m) {
  text::CsvWriter out(path);
  std::vector<std::string> header{"cluster"};
  const std::size_t cols = m.empty() ? 0 : m.front().size();
  for (std::size_t j = 1; j <= cols; ++j) header.push_back("b" + std::to_string(j));
  out.row(header);
  for (std::size_t i = 0; i < m.size(); ++i) {
    std::vector<std::string> f{"a" + std::to_string(i + 1)};
    for (auto v : m[i]) f.push_back(std::to_string(v));
    out.row(f);
  }
}

inline json purity_json(const CountMatrix& m) {
  std::size_t total = 0, agree = 0;
  for (const auto& row : m) {
    for (auto v : row) total += v;
    if (!row.empty()) agree += *std::max_element(row.begin(), row.end());
  }
  return {{"purity", purity(m)}, {"agreeing", agree}, {"trees", total}};
}

inline void write_accuracy_csv(const fs::path& path, const std::vector<FractionAccuracy>& acc,
                               std::string_view classifier) {
  text::CsvWriter out(path);
  out.row({"classifier", "test_fraction", "test_size", "mean_accuracy", "repetitions", "skipped"});
  for (const auto& a : acc) {
    out.row({std::string(classifier), text::format_double(a.test_fraction),
             std::to_string(a.test_size), text::format_double(a.mean_accuracy),
             std::to_string(a.repetitions_used), std::to_string(a.skipped)});
  }
}

inline void write_characterization_csv(const fs::path& path,
                                       const std::vector<CoordinateRank>& ranks) {
  text::CsvWriter out(path);
  out.row({"rank", "coordinate", "segment", "index", "band", "name", "deviation", "centroid"});
  for (std::size_t r = 0; r < ranks.size(); ++r) {
    const auto& c = ranks[r];
    out.row({std::to_string(r + 1), std::to_string(c.coordinate + 1), std::to_string(c.segment),
             std::string(index_name(c.index)), std::to_string(c.band), c.name(),
             text::format_double(c.deviation), text::format_double(c.centroid)});
  }
}

inline void write_neighbors_csv(const fs::path& path, Token query,
                                const std::vector<Neighbor>& neighbors, std::string_view space) {
  text::CsvWriter out(path);
  out.row({"query", "rank", "token", "name", "space", "score"});
  for (std::size_t r = 0; r < neighbors.size(); ++r) {
    const auto& n = neighbors[r];
    out.row({query.name(), std::to_string(r + 1), std::to_string(n.token.number()),
             n.token.name(), std::string(space), text::format_double(n.score)});
  }
}

}  // namespace canopy::io
