// canopy: command-line front end for the crown embedding pipeline.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "canopy/config.hpp"
#include "canopy/io.hpp"
#include "canopy/pipeline.hpp"

namespace fs = std::filesystem;
using namespace canopy;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "canopy_out";
  bool paper_sentinel = false;
};

Config load(const Globals& g) {
  Config cfg = g.config.empty() ? Config{} : load_config(g.config);
  if (g.seed) cfg.seed = *g.seed;
  if (g.paper_sentinel) cfg.paper_sentinel = true;
  validate(cfg);
  return cfg;
}

fs::path or_default(const std::string& given, const fs::path& out, const char* name) {
  return given.empty() ? out / name : fs::path(given);
}

void report(const StageRecord& r) {
  std::cout << r.name << ":";
  for (const auto& o : r.outputs) std::cout << ' ' << o.generic_string();
  std::cout << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hyperspectral tree-crown extraction, vegetation-index banding and band embeddings"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(kVersion));

  Globals g;
  app.add_option("--config", g.config, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Root seed (overrides the config)");
  app.add_option("--out-dir", g.out_dir, "Directory for inputs and outputs")->capture_default_str();
  app.add_flag("--paper-sentinel", g.paper_sentinel, "Write outliers as -1000000 in bands.csv");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic orchard scene with ground truth");
  std::optional<int> synth_trees;
  std::optional<double> synth_noise;
  synth->add_option("--trees", synth_trees, "Number of crowns");
  synth->add_option("--noise", synth_noise, "Noise standard deviation (reflectance units)");

  // extract
  auto* extract = app.add_subcommand("extract", "Find tree crowns in a cube");
  std::string cube;
  std::optional<int> grid_side, min_leaf;
  std::optional<std::size_t> min_tree;
  std::optional<double> ari2_min, sipi_min, p900_max, p780_min, p660_max;
  extract->add_option("--cube", cube, "Cube header or payload (default <out-dir>/scene.hdr)");
  extract->add_option("--grid-side,-k", grid_side, "Grid side k in pixels");
  extract->add_option("--min-leaf-per-grid", min_leaf, "Leaf pixels a grid needs to be connected");
  extract->add_option("--min-tree-pixels", min_tree, "Smallest tree kept, in leaf pixels");
  extract->add_option("--ari2-min", ari2_min);
  extract->add_option("--sipi-min", sipi_min);
  extract->add_option("--p900-max", p900_max);
  extract->add_option("--p780-min", p780_min);
  extract->add_option("--p660-max", p660_max);

  // indices
  auto* indices = app.add_subcommand("indices", "Per-pixel vegetation indices of every tree");
  std::string trees_csv;
  indices->add_option("--cube", cube, "Cube header or payload (default <out-dir>/scene.hdr)");
  indices->add_option("--trees", trees_csv, "Tree mask CSV");

  // segment
  auto* segment = app.add_subcommand("segment", "Ring segments and per-segment index means");
  std::string pixels_csv;
  std::optional<int> segments;
  segment->add_option("--trees", trees_csv, "Tree mask CSV");
  segment->add_option("--pixels", pixels_csv, "Per-pixel index CSV");
  segment->add_option("--segments,-s", segments, "Segments per tree (2..8)");

  // band
  auto* band = app.add_subcommand("band", "Normalize, screen and quartile-band segment means");
  std::string segments_csv;
  band->add_option("--profiles", segments_csv, "Segment profile CSV");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train band embeddings against Jaccard targets");
  std::string bands_csv, thresholds_json;
  std::optional<int> epochs;
  std::optional<std::size_t> dim, hidden;
  std::optional<double> lr;
  train_cmd->add_option("--bands", bands_csv, "Band table CSV");
  train_cmd->add_option("--thresholds", thresholds_json, "Band thresholds JSON");
  train_cmd->add_option("--epochs", epochs);
  train_cmd->add_option("--embedding-dim", dim);
  train_cmd->add_option("--hidden", hidden);
  train_cmd->add_option("--learning-rate", lr);

  // vectors
  auto* vectors = app.add_subcommand("vectors", "Tree embedding vectors and direct vectors");
  std::string model_json;
  vectors->add_option("--bands", bands_csv, "Band table CSV");
  vectors->add_option("--thresholds", thresholds_json, "Band thresholds JSON");
  vectors->add_option("--profiles", segments_csv, "Segment profile CSV");
  vectors->add_option("--model", model_json, "Model JSON");

  // cluster
  auto* cluster = app.add_subcommand("cluster", "k-means over tree or direct vectors");
  std::optional<int> k;
  std::string space = "embedding", features_csv;
  cluster->add_option("--k", k, "Number of clusters");
  cluster->add_option("--space", space, "embedding | direct")
      ->check(CLI::IsMember({"embedding", "direct"}))
      ->capture_default_str();
  cluster->add_option("--features", features_csv, "Feature CSV (default by space)");

  // purity
  auto* purity_cmd = app.add_subcommand("purity", "Purity and confusion of two clusterings");
  std::string a_csv, b_csv;
  purity_cmd->add_option("a", a_csv, "First assignment CSV")->required();
  purity_cmd->add_option("b", b_csv, "Second assignment CSV")->required();

  // classify
  auto* classify = app.add_subcommand("classify", "Accuracy of predicting cluster labels");
  std::string algorithm, clusters_csv;
  std::vector<double> fractions;
  std::optional<int> reps;
  classify->add_option("--algorithm", algorithm, "gnb | logistic");
  classify->add_option("--fractions", fractions, "Test fractions");
  classify->add_option("--reps", reps, "Repetitions per fraction");
  classify->add_option("--space", space, "embedding | direct")
      ->check(CLI::IsMember({"embedding", "direct"}))
      ->capture_default_str();
  classify->add_option("--features", features_csv, "Feature CSV (default by space)");
  classify->add_option("--clusters", clusters_csv, "Cluster assignment CSV (default by space)");

  // characterize
  auto* characterize = app.add_subcommand("characterize", "Most compact bands of one cluster");
  int cluster_id = 1;
  std::optional<std::size_t> top_n;
  std::string direct_csv;
  characterize->add_option("--cluster", cluster_id, "Cluster label")->capture_default_str();
  characterize->add_option("--top-n", top_n);
  characterize->add_option("--clusters", clusters_csv, "Cluster assignment CSV");
  characterize->add_option("--direct", direct_csv, "Direct vector CSV");
  characterize->add_option("--bands", bands_csv, "Band table CSV");
  characterize->add_option("--thresholds", thresholds_json, "Band thresholds JSON");

  // nn
  auto* nn = app.add_subcommand("nn", "Nearest vegetation-index bands of a band");
  std::vector<std::string> tokens;
  std::optional<std::size_t> n_neighbors;
  std::string nn_space = "embedding";
  std::optional<std::string> metric;
  nn->add_option("--token", tokens, "Band name such as \"Low NDVI\" or a 1-based id")->required();
  nn->add_option("--n", n_neighbors, "Neighbors per query");
  nn->add_option("--space", nn_space, "embedding | direct | both")
      ->check(CLI::IsMember({"embedding", "direct", "both"}))
      ->capture_default_str();
  nn->add_option("--metric", metric, "euclidean | cosine")->check(CLI::IsMember({"euclidean", "cosine"}));
  nn->add_option("--model", model_json, "Model JSON");
  nn->add_option("--bands", bands_csv, "Band table CSV");
  nn->add_option("--thresholds", thresholds_json, "Band thresholds JSON");

  // run
  auto* run = app.add_subcommand("run", "Whole pipeline with a manifest");
  std::string from;
  run->add_option("--from", from, "First stage to execute; earlier outputs come from the out dir");

  CLI11_PARSE(app, argc, argv);

  try {
    Config cfg = load(g);
    const fs::path out = g.out_dir;
    fs::create_directories(out);
    namespace a = artifact;

    if (*synth) {
      if (synth_trees) cfg.synth.tree_count = *synth_trees;
      if (synth_noise) cfg.synth.noise = *synth_noise;
      report(stage_synth(cfg, out));
    } else if (*extract) {
      if (grid_side) cfg.extract.grid_side = *grid_side;
      if (min_leaf) cfg.extract.min_leaf_per_grid = *min_leaf;
      if (min_tree) cfg.extract.min_tree_pixels = *min_tree;
      auto& f = cfg.extract.filter;
      if (ari2_min) f.ari2_min = *ari2_min;
      if (sipi_min) f.sipi_min = *sipi_min;
      if (p900_max) f.p900_max = *p900_max;
      if (p780_min) f.p780_min = *p780_min;
      if (p660_max) f.p660_max = *p660_max;
      validate(cfg);
      const auto cube_path = cube.empty() ? (cfg.input_cube.empty() ? out / a::cube : fs::path(cfg.input_cube))
                                          : fs::path(cube);
      report(stage_extract(cfg, cube_path, out));
    } else if (*indices) {
      const auto cube_path = cube.empty() ? (cfg.input_cube.empty() ? out / a::cube : fs::path(cfg.input_cube))
                                          : fs::path(cube);
      report(stage_indices(cfg, cube_path, or_default(trees_csv, out, a::trees), out));
    } else if (*segment) {
      if (segments) cfg.segments = *segments;
      validate(cfg);
      report(stage_segment(cfg, or_default(trees_csv, out, a::trees),
                           or_default(pixels_csv, out, a::pixel_indices), out));
    } else if (*band) {
      report(stage_band(cfg, or_default(segments_csv, out, a::segments), out));
    } else if (*train_cmd) {
      if (epochs) cfg.training.epochs = *epochs;
      if (dim) cfg.architecture.embedding_dim = *dim;
      if (hidden) cfg.architecture.hidden = *hidden;
      if (lr) cfg.training.learning_rate = *lr;
      validate(cfg);
      report(stage_train(cfg, or_default(bands_csv, out, a::bands),
                         or_default(thresholds_json, out, a::thresholds), out));
    } else if (*vectors) {
      report(stage_vectors(or_default(bands_csv, out, a::bands),
                           or_default(thresholds_json, out, a::thresholds),
                           or_default(segments_csv, out, a::segments),
                           or_default(model_json, out, a::model), out));
    } else if (*cluster) {
      const auto feats = or_default(features_csv, out,
                                    space == "embedding" ? a::tree_vectors : a::direct_vectors);
      report(stage_cluster(feats, space, k.value_or(cfg.analysis.clusters), cfg.stage_seed("cluster"), out));
    } else if (*purity_cmd) {
      const auto rec = stage_purity(a_csv, b_csv, out);
      report(rec);
      std::cout << "purity " << io::read_json(out / a::purity).at("purity").get<double>() << '\n';
    } else if (*classify) {
      if (!algorithm.empty()) cfg.analysis.classifier = parse_classifier(algorithm);
      if (!fractions.empty()) cfg.analysis.test_fractions = fractions;
      if (reps) cfg.analysis.repetitions = *reps;
      validate(cfg);
      const auto feats = or_default(features_csv, out,
                                    space == "embedding" ? a::tree_vectors : a::direct_vectors);
      const auto labels = clusters_csv.empty() ? out / a::clusters_csv(space) : fs::path(clusters_csv);
      report(stage_classify(cfg, feats, labels, space, out));
    } else if (*characterize) {
      if (top_n) cfg.analysis.top_n = *top_n;
      const auto labels = clusters_csv.empty() ? out / a::clusters_csv(cfg.analysis.cluster_space)
                                               : fs::path(clusters_csv);
      report(stage_characterize(cfg, labels, cluster_id, or_default(direct_csv, out, a::direct_vectors),
                                or_default(bands_csv, out, a::bands),
                                or_default(thresholds_json, out, a::thresholds), out));
    } else if (*nn) {
      if (n_neighbors) cfg.analysis.neighbors = *n_neighbors;
      if (metric) cfg.analysis.neighbor_metric = *metric;
      report(stage_nn(cfg, tokens, nn_space, or_default(model_json, out, a::model),
                      or_default(bands_csv, out, a::bands),
                      or_default(thresholds_json, out, a::thresholds), out));
    } else if (*run) {
      const auto result = run_pipeline(cfg, out, RunOptions{from});
      for (const auto& r : result.stages) report(r);
      std::cout << "manifest: " << (out / a::manifest).generic_string() << '\n';
    }
  } catch (const canopy::Error& e) {
    std::cerr << "canopy: " << e.what() << '\n';
    return EXIT_FAILURE;
  } catch (const std::exception& e) {
    std::cerr << "canopy: unexpected error: " << e.what() << '\n';
    return EXIT_FAILURE;
  }
  return EXIT_SUCCESS;
}
