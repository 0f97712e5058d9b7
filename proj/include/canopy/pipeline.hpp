#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <json.hpp>

#include "canopy/analysis.hpp"
#include "canopy/banding.hpp"
#include "canopy/config.hpp"
#include "canopy/embed.hpp"
#include "canopy/error.hpp"
#include "canopy/hypercube.hpp"
#include "canopy/io.hpp"
#include "canopy/segments.hpp"
#include "canopy/synth.hpp"
#include "canopy/treevec.hpp"
#include "canopy/treex.hpp"
#include "canopy/vegindex.hpp"

namespace canopy {

inline constexpr std::string_view kVersion = "1.0.0";

namespace fs = std::filesystem;

/// Hex SHA-256 of a file's bytes.
inline std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("digest: cannot open " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw Error("digest: OpenSSL initialisation failed");
  }
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

/// Default artifact file names inside the output directory.
namespace artifact {
inline constexpr const char* cube = "scene.hdr";
inline constexpr const char* cube_payload = "scene.raw";
inline constexpr const char* ground_truth = "ground_truth.csv";
inline constexpr const char* trees = "trees.csv";
inline constexpr const char* trees_summary = "trees_summary.json";
inline constexpr const char* pixel_indices = "pixel_indices.csv";
inline constexpr const char* segments = "segments.csv";
inline constexpr const char* monotone = "monotone_histogram.csv";
inline constexpr const char* bands = "bands.csv";
inline constexpr const char* thresholds = "band_thresholds.json";
inline constexpr const char* model = "model.json";
inline constexpr const char* loss = "loss_history.csv";
inline constexpr const char* embeddings = "embeddings.csv";
inline constexpr const char* tree_vectors = "tree_vectors.csv";
inline constexpr const char* direct_vectors = "direct_vectors.csv";
inline constexpr const char* manifest = "manifest.json";

inline std::string clusters_csv(std::string_view space) { return "clusters_" + std::string(space) + ".csv"; }
inline std::string clusters_json(std::string_view space) { return "clusters_" + std::string(space) + ".json"; }
inline std::string accuracy(std::string_view space) { return "accuracy_" + std::string(space) + ".csv"; }
inline std::string characterize(int cluster) { return "characterize_cluster" + std::to_string(cluster) + ".csv"; }
inline constexpr const char* purity = "purity.json";
inline constexpr const char* confusion = "confusion.csv";
inline constexpr const char* neighbors = "neighbors.csv";
}  // namespace artifact

struct StageRecord {
  std::string name;
  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;
};

// ---------------------------------------------------------------------------
// Stages. Each reads only its listed inputs and writes into `out`.

inline StageRecord stage_synth(const Config& cfg, const fs::path& out) {
  const auto scene = generate_scene(cfg.scene_spec());
  const auto header = save_hypercube(scene.cube, out / artifact::cube);
  io::write_trees_csv(out / artifact::ground_truth, io::ground_truth_regions(scene.crowns));
  return {"synth", {}, {header, payload_path_for(header), out / artifact::ground_truth}};
}

inline StageRecord stage_extract(const Config& cfg, const fs::path& cube_path, const fs::path& out) {
  const auto cube = load_hypercube(cube_path);
  auto mask = classify_leaves(cube, cfg.extract.filter);
  mask = connected_grids(std::move(mask), cfg.extract.grid_side, cfg.extract.min_leaf_per_grid);
  const auto trees = extract_trees(mask, cfg.extract.min_tree_pixels);
  if (trees.empty()) warn("extract: no trees found");
  io::write_trees_csv(out / artifact::trees, trees);
  io::write_json(out / artifact::trees_summary, io::trees_summary(trees, mask));
  const auto header = header_path_for(cube_path);
  return {"extract",
          {header, payload_path_for(header)},
          {out / artifact::trees, out / artifact::trees_summary}};
}

inline StageRecord stage_indices(const Config& cfg, const fs::path& cube_path,
                                 const fs::path& trees_csv, const fs::path& out) {
  const auto cube = load_hypercube(cube_path);
  const auto trees = io::read_trees_csv(trees_csv);
  std::vector<PixelIndexRow> rows;
  for (const auto& t : trees) {
    auto r = compute_all(cube, t, cfg.indices);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  io::write_pixel_indices(out / artifact::pixel_indices, rows);
  const auto header = header_path_for(cube_path);
  return {"indices", {header, payload_path_for(header), trees_csv}, {out / artifact::pixel_indices}};
}

inline StageRecord stage_segment(const Config& cfg, const fs::path& trees_csv,
                                 const fs::path& pixel_csv, const fs::path& out) {
  const auto trees = io::read_trees_csv(trees_csv);
  const auto rows = io::read_pixel_indices(pixel_csv);
  std::map<std::pair<int, Pixel>, std::size_t> at;
  for (std::size_t i = 0; i < rows.size(); ++i) at.emplace(std::pair{rows[i].tree_id, rows[i].pixel}, i);
  std::vector<SegmentProfile> profiles;
  for (const auto& t : trees) {
    std::vector<PixelIndexRow> mine;
    mine.reserve(t.pixels.size());
    for (const auto& p : t.pixels) {
      auto it = at.find({t.id, p});
      if (it == at.end()) {
        throw Error("segment: no index row for tree " + std::to_string(t.id) + " pixel (" +
                    std::to_string(p.x) + ", " + std::to_string(p.y) + ")");
      }
      mine.push_back(rows[it->second]);
    }
    profiles.push_back(profile_tree(t, mine, cfg.segments));
  }
  io::write_segments_csv(out / artifact::segments, profiles);
  io::write_monotone_histogram(out / artifact::monotone, profiles, cfg.segments);
  return {"segment", {trees_csv, pixel_csv}, {out / artifact::segments, out / artifact::monotone}};
}

inline StageRecord stage_band(const Config& cfg, const fs::path& segments_csv, const fs::path& out) {
  const auto profiles = io::read_segments_csv(segments_csv);
  const auto table = build_band_table(profiles);
  io::write_bands_csv(out / artifact::bands, table, cfg.paper_sentinel);
  io::write_json(out / artifact::thresholds, io::band_thresholds_json(table));
  return {"band", {segments_csv}, {out / artifact::bands, out / artifact::thresholds}};
}

inline StageRecord stage_train(const Config& cfg, const fs::path& bands_csv,
                               const fs::path& thresholds_json, const fs::path& out) {
  const auto table = io::read_band_table(bands_csv, thresholds_json);
  const auto contexts = band_contexts(table);
  const auto tc = cfg.training_config();
  const auto result = train_new(cfg.architecture, contexts, tc);
  const double last = result.loss_history.empty() ? result.initial_loss : result.loss_history.back();
  io::write_model(out / artifact::model, result.model, tc, result.initial_loss, last);
  io::write_loss_history(out / artifact::loss, result);
  io::write_embeddings_csv(out / artifact::embeddings, result.model);
  return {"train",
          {bands_csv, thresholds_json},
          {out / artifact::model, out / artifact::loss, out / artifact::embeddings}};
}

/// Band table with normalized segment means attached, as the direct
/// representation needs them.
inline BandTable load_band_table(const fs::path& bands_csv, const fs::path& thresholds_json,
                                 const fs::path& segments_csv) {
  auto table = io::read_band_table(bands_csv, thresholds_json);
  table.attach_normalized(io::read_segments_csv(segments_csv));
  return table;
}

inline StageRecord stage_vectors(const fs::path& bands_csv, const fs::path& thresholds_json,
                                 const fs::path& segments_csv, const fs::path& model_json,
                                 const fs::path& out) {
  const auto table = load_band_table(bands_csv, thresholds_json, segments_csv);
  const auto model = io::read_model(model_json);
  const auto vectors = tree_vectors(table, model);
  io::write_features_csv(out / artifact::tree_vectors, embedding_features(vectors),
                         io::tree_vector_columns(table.segment_count(),
                                                 model.architecture().embedding_dim));
  io::write_features_csv(out / artifact::direct_vectors, direct_vectors(table),
                         io::direct_vector_columns(table.segment_count()));
  return {"vectors",
          {bands_csv, thresholds_json, segments_csv, model_json},
          {out / artifact::tree_vectors, out / artifact::direct_vectors}};
}

inline StageRecord stage_cluster(const fs::path& features_csv, std::string_view space, int k,
                                 std::uint64_t seed, const fs::path& out) {
  const auto features = io::read_features_csv(features_csv);
  auto assignment = kmeans(features, k, seed);
  assignment.space = std::string(space);
  const auto csv = out / artifact::clusters_csv(space);
  const auto js = out / artifact::clusters_json(space);
  io::write_clusters(csv, js, assignment);
  return {"cluster_" + std::string(space), {features_csv}, {csv, js}};
}

inline StageRecord stage_purity(const fs::path& a_csv, const fs::path& b_csv, const fs::path& out) {
  const auto a = io::read_clusters_csv(a_csv);
  const auto b = io::read_clusters_csv(b_csv);
  const auto m = confusion(a, b);
  io::write_confusion_csv(out / artifact::confusion, m);
  io::write_json(out / artifact::purity, io::purity_json(m));
  return {"purity", {a_csv, b_csv}, {out / artifact::confusion, out / artifact::purity}};
}

inline StageRecord stage_classify(const Config& cfg, const fs::path& features_csv,
                                  const fs::path& clusters_csv, std::string_view space,
                                  const fs::path& out) {
  const auto features = io::read_features_csv(features_csv);
  const auto clusters = io::read_clusters_csv(clusters_csv);
  std::map<int, int> label_of;
  for (std::size_t i = 0; i < clusters.tree_ids.size(); ++i)
    label_of[clusters.tree_ids[i]] = clusters.labels[i];
  std::vector<int> labels;
  for (int id : features.tree_ids) {
    auto it = label_of.find(id);
    if (it == label_of.end()) throw Error("classify: tree " + std::to_string(id) + " has no cluster");
    labels.push_back(it->second);
  }
  HarnessOptions opts;
  opts.test_fractions = cfg.analysis.test_fractions;
  opts.repetitions = cfg.analysis.repetitions;
  opts.seed = cfg.stage_seed("classify");
  const auto acc = classification_harness(features, labels, cfg.analysis.classifier, opts);
  const auto path = out / artifact::accuracy(space);
  io::write_accuracy_csv(path, acc, classifier_name(cfg.analysis.classifier));
  return {"classify_" + std::string(space), {features_csv, clusters_csv}, {path}};
}

inline StageRecord stage_characterize(const Config& cfg, const fs::path& clusters_csv, int cluster,
                                      const fs::path& direct_csv, const fs::path& bands_csv,
                                      const fs::path& thresholds_json, const fs::path& out) {
  const auto clusters = io::read_clusters_csv(clusters_csv);
  const auto direct = io::read_features_csv(direct_csv);
  const auto table = io::read_band_table(bands_csv, thresholds_json);
  const auto members = clusters.members(cluster);
  if (members.empty()) {
    throw Error("characterize: cluster " + std::to_string(cluster) + " has no members");
  }
  const auto ranks = characterize_cluster(members, direct, table, cfg.analysis.top_n);
  const auto path = out / artifact::characterize(cluster);
  io::write_characterization_csv(path, ranks);
  return {"characterize_" + std::to_string(cluster),
          {clusters_csv, direct_csv, bands_csv, thresholds_json},
          {path}};
}

/// Neighbor queries in the embedding space (model) and the direct
/// co-occurrence space (band table), appended into one CSV.
inline StageRecord stage_nn(const Config& cfg, const std::vector<std::string>& queries,
                            std::string_view space, const fs::path& model_json,
                            const fs::path& bands_csv, const fs::path& thresholds_json,
                            const fs::path& out) {
  const auto path = out / artifact::neighbors;
  text::CsvWriter csv(path);
  csv.row({"query", "rank", "token", "name", "space", "score"});
  const bool want_embedding = space == "embedding" || space == "both";
  const bool want_direct = space == "direct" || space == "both";
  if (!want_embedding && !want_direct) throw Error("nn: space must be embedding, direct or both");
  std::optional<EmbeddingModel> model;
  std::optional<CooccurrenceTable> contexts;
  StageRecord rec{"nn", {}, {path}};
  if (want_embedding) {
    model = io::read_model(model_json);
    rec.inputs.push_back(model_json);
  }
  if (want_direct) {
    contexts = band_contexts(io::read_band_table(bands_csv, thresholds_json));
    rec.inputs.push_back(bands_csv);
    rec.inputs.push_back(thresholds_json);
  }
  const auto metric = cfg.analysis.neighbor_metric == "cosine" ? EmbeddingMetric::cosine
                                                               : EmbeddingMetric::euclidean;
  auto emit = [&](Token q, const std::vector<Neighbor>& ns, std::string_view sp) {
    for (std::size_t r = 0; r < ns.size(); ++r) {
      csv.row({q.name(), std::to_string(r + 1), std::to_string(ns[r].token.number()),
               ns[r].token.name(), std::string(sp), text::format_double(ns[r].score)});
    }
  };
  for (const auto& q : queries) {
    const auto token = parse_token(q);
    if (model) emit(token, nearest_bands_embedding(*model, token, cfg.analysis.neighbors, metric), "embedding");
    if (contexts) emit(token, nearest_bands_direct(*contexts, token, cfg.analysis.neighbors), "direct");
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Full pipeline

/// Stage order of `run`. "synth" only runs when the config names no input cube.
inline const std::vector<std::string>& pipeline_stages() {
  static const std::vector<std::string> s{"synth", "extract", "indices", "segment",
                                          "band",  "train",   "vectors", "analyses"};
  return s;
}

/// Config sections each stage's outputs depend on.
inline std::vector<std::string> stage_config_keys(std::string_view stage) {
  if (stage == "synth") return {"seed", "synth"};
  if (stage == "extract") return {"input_cube", "extract"};
  if (stage == "indices") return {"indices"};
  if (stage == "segment") return {"segments"};
  if (stage == "band") return {"banding"};
  if (stage == "train") return {"seed", "embedding"};
  if (stage == "analyses") return {"seed", "analysis"};
  return {};
}

struct RunOptions {
  std::string from;  // first stage to execute; earlier stages come from cache
};

struct RunResult {
  nlohmann::ordered_json manifest;
  std::vector<StageRecord> stages;
};

namespace pipeline_detail {

inline nlohmann::ordered_json file_digests(const std::vector<fs::path>& files, const fs::path& root) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& f : files) {
    std::error_code ec;
    auto rel = fs::relative(f, root, ec);
    const bool inside = !ec && !rel.empty() && *rel.begin() != "..";
    j[(inside ? rel : f).generic_string()] = sha256_file(f);
  }
  return j;
}

}  // namespace pipeline_detail

/// Runs every stage (or the suffix starting at `opts.from`) into `out` and
/// writes manifest.json. Skipped stages are verified against the previous
/// manifest: their recorded outputs must still hash the same and their
/// config sections must be unchanged.
inline RunResult run_pipeline(const Config& cfg, const fs::path& out, const RunOptions& opts = {}) {
  using json = nlohmann::ordered_json;
  validate(cfg);
  fs::create_directories(out);
  const auto& order = pipeline_stages();
  const bool synthetic = cfg.input_cube.empty();
  std::size_t first = 0;
  if (!opts.from.empty()) {
    auto it = std::find(order.begin(), order.end(), opts.from);
    if (it == order.end()) throw Error("run: unknown stage '" + opts.from + "'");
    first = static_cast<std::size_t>(it - order.begin());
  }
  if (!synthetic && opts.from == "synth") {
    throw Error("run: config names an input cube; there is no synth stage");
  }
  if (!synthetic && first == 0) first = 1;

  const json config_snapshot = config_to_json(cfg);
  json previous;
  std::map<std::string, json> cached_stage;
  if (first > (synthetic ? 0u : 1u)) {
    const auto mpath = out / artifact::manifest;
    if (!fs::exists(mpath)) throw Error("run: --from " + opts.from + " needs a previous manifest in " + out.string());
    previous = io::read_json(mpath);
    for (const auto& s : previous.at("stages")) cached_stage[s.at("name").get<std::string>()] = s;
    for (std::size_t i = synthetic ? 0 : 1; i < first; ++i) {
      const auto& name = order[i];
      auto it = cached_stage.find(name);
      if (it == cached_stage.end()) throw Error("stale cache: stage " + name + " missing from manifest");
      for (const auto& key : stage_config_keys(name)) {
        if (previous.at("config").value(key, json()) != config_snapshot.value(key, json())) {
          throw Error("stale cache: config section '" + key + "' changed since stage " + name + " ran");
        }
      }
      for (const auto& [file, digest] : it->second.at("outputs").items()) {
        const fs::path p = fs::path(file).is_absolute() ? fs::path(file) : out / file;
        if (!fs::exists(p) || sha256_file(p) != digest.get<std::string>()) {
          throw Error("stale cache: " + file + " no longer matches the digest recorded by stage " + name);
        }
      }
    }
  }

  const fs::path cube = synthetic ? out / artifact::cube : fs::path(cfg.input_cube);
  RunResult result;
  auto run_stage = [&](const std::string& name, auto&& fn) {
    try {
      auto rec = fn();
      rec.name = rec.name.empty() ? name : rec.name;
      result.stages.push_back(std::move(rec));
    } catch (const Error& e) {
      throw Error("stage " + name + " failed: " + e.what());
    }
  };
  auto p = [&](const char* f) { return out / f; };
  const auto space_features = [&](std::string_view space) {
    return space == "embedding" ? p(artifact::tree_vectors) : p(artifact::direct_vectors);
  };

  std::vector<StageRecord> analyses;
  for (std::size_t i = first; i < order.size(); ++i) {
    const auto& name = order[i];
    if (name == "synth") {
      run_stage(name, [&] { return stage_synth(cfg, out); });
    } else if (name == "extract") {
      run_stage(name, [&] { return stage_extract(cfg, cube, out); });
    } else if (name == "indices") {
      run_stage(name, [&] { return stage_indices(cfg, cube, p(artifact::trees), out); });
    } else if (name == "segment") {
      run_stage(name, [&] { return stage_segment(cfg, p(artifact::trees), p(artifact::pixel_indices), out); });
    } else if (name == "band") {
      run_stage(name, [&] { return stage_band(cfg, p(artifact::segments), out); });
    } else if (name == "train") {
      run_stage(name, [&] { return stage_train(cfg, p(artifact::bands), p(artifact::thresholds), out); });
    } else if (name == "vectors") {
      run_stage(name, [&] {
        return stage_vectors(p(artifact::bands), p(artifact::thresholds), p(artifact::segments),
                             p(artifact::model), out);
      });
    } else if (name == "analyses") {
      const int k = cfg.analysis.clusters;
      const auto seed = cfg.stage_seed("cluster");
      for (std::string_view space : {"embedding", "direct"}) {
        run_stage("cluster", [&] { return stage_cluster(space_features(space), space, k, seed, out); });
      }
      run_stage("purity", [&] {
        return stage_purity(out / artifact::clusters_csv("embedding"),
                            out / artifact::clusters_csv("direct"), out);
      });
      for (std::string_view space : {"embedding", "direct"}) {
        run_stage("classify", [&] {
          return stage_classify(cfg, space_features(space), out / artifact::clusters_csv(space), space, out);
        });
      }
      const auto chosen = out / artifact::clusters_csv(cfg.analysis.cluster_space);
      const auto assignment = io::read_clusters_csv(chosen);
      for (int c = 1; c <= assignment.k; ++c) {
        if (assignment.members(c).empty()) continue;
        run_stage("characterize", [&] {
          return stage_characterize(cfg, chosen, c, p(artifact::direct_vectors), p(artifact::bands),
                                    p(artifact::thresholds), out);
        });
      }
      run_stage("nn", [&] {
        return stage_nn(cfg, cfg.analysis.neighbor_queries, "both", p(artifact::model),
                        p(artifact::bands), p(artifact::thresholds), out);
      });
    }
  }

  json manifest;
  manifest["format"] = "canopy-run-manifest";
  manifest["version"] = 1;
  manifest["versions"] = {{"canopy", kVersion},
                          {"model_format", io::kModelFormatVersion},
                          {"compiler", __VERSION__},
                          {"cplusplus", __cplusplus}};
  manifest["config"] = config_snapshot;
  json seeds;
  seeds["root"] = cfg.seed;
  for (const char* s : {"synth", "train", "cluster", "classify"}) seeds[s] = cfg.stage_seed(s);
  manifest["seeds"] = std::move(seeds);
  manifest["training"] = {{"deterministic", true}, {"threads", 1}};
  json stages = json::array();
  for (std::size_t i = synthetic ? 0 : 1; i < first; ++i) {
    auto s = cached_stage.at(order[i]);
    s["cached"] = true;
    stages.push_back(std::move(s));
  }
  for (const auto& r : result.stages) {
    json s;
    s["name"] = r.name;
    s["inputs"] = pipeline_detail::file_digests(r.inputs, out);
    s["outputs"] = pipeline_detail::file_digests(r.outputs, out);
    stages.push_back(std::move(s));
  }
  manifest["stages"] = std::move(stages);
  io::write_json(out / artifact::manifest, manifest);
  result.manifest = std::move(manifest);
  return result;
}

}  // namespace canopy
