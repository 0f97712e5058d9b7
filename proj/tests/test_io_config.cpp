#include <fstream>
#include <random>

#include "canopy/config.hpp"
#include "canopy/io.hpp"
#include "support.hpp"

using namespace canopy;
using canopy::testing::TempDir;

namespace {

std::vector<SegmentProfile> profiles(int trees, int segments, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<SegmentProfile> ps;
  for (int id = 1; id <= trees; ++id) {
    SegmentProfile p;
    p.tree_id = id * 3;
    p.pixel_counts.assign(static_cast<std::size_t>(segments), static_cast<std::size_t>(id + 4));
    p.means.resize(static_cast<std::size_t>(segments));
    for (auto& m : p.means)
      for (auto& v : m) v = g(rng) / 3.0;
    ps.push_back(p);
  }
  ps[1].means[0][4].reset();
  ps[2].means[1][9] = 50.0;
  return ps;
}

void write_text(const std::filesystem::path& p, const std::string& s) { std::ofstream(p) << s; }

}  // namespace

TEST_CASE("trees and pixel indices round-trip", "[io]") {
  TempDir dir;
  std::vector<TreeRegion> trees{{1, {{3, 4}, {4, 4}, {3, 5}}}, {2, {{10, 1}}}};
  io::write_trees_csv(dir / "trees.csv", trees);
  const auto back = io::read_trees_csv(dir / "trees.csv");
  REQUIRE(back.size() == 2);
  CHECK(back[0].id == 1);
  CHECK(back[0].pixels == trees[0].pixels);
  CHECK(back[1].pixels == trees[1].pixels);

  std::vector<PixelIndexRow> rows(2);
  rows[0].tree_id = 1;
  rows[0].pixel = {3, 4};
  for (std::size_t j = 0; j < kIndexCount; ++j) rows[0].values[j] = 0.1 * j - 0.7 + 1e-13;
  rows[1].tree_id = 2;
  rows[1].pixel = {10, 1};
  rows[1].values[5] = 42.0;
  io::write_pixel_indices(dir / "px.csv", rows);
  const auto px = io::read_pixel_indices(dir / "px.csv");
  REQUIRE(px.size() == 2);
  CHECK(px[0].values == rows[0].values);
  CHECK(px[1].values == rows[1].values);
  CHECK_FALSE(px[1].values[0].has_value());
  CHECK(px[1].pixel == Pixel{10, 1});
}

TEST_CASE("segment profiles round-trip", "[io]") {
  TempDir dir;
  const auto ps = profiles(4, 5, 1);
  io::write_segments_csv(dir / "seg.csv", ps);
  const auto back = io::read_segments_csv(dir / "seg.csv");
  REQUIRE(back.size() == ps.size());
  for (std::size_t i = 0; i < ps.size(); ++i) {
    CHECK(back[i].tree_id == ps[i].tree_id);
    CHECK(back[i].pixel_counts == ps[i].pixel_counts);
    CHECK(back[i].means == ps[i].means);
  }
  write_text(dir / "gap.csv", "tree_id,segment,pixel_count\n1,1,3\n1,3,3\n");
  CHECK_THROWS_AS(io::read_segments_csv(dir / "gap.csv"), Error);
}

TEST_CASE("band table round-trips in both marker styles", "[io]") {
  TempDir dir;
  canopy::testing::WarningCapture quiet;
  const auto ps = profiles(6, 5, 2);
  const auto table = build_band_table(ps);
  REQUIRE(table.cell(2, 1, 9).is_outlier());
  REQUIRE(table.cell(1, 0, 4).is_missing());
  for (bool sentinel : {false, true}) {
    io::write_bands_csv(dir / "bands.csv", table, sentinel);
    io::write_json(dir / "thr.json", io::band_thresholds_json(table));
    std::ifstream in(dir / "bands.csv");
    const std::string body((std::istreambuf_iterator<char>(in)), {});
    CHECK((body.find("-1000000") != std::string::npos) == sentinel);
    CHECK((body.find("outlier") != std::string::npos) == !sentinel);
    const auto back = io::read_band_table(dir / "bands.csv", dir / "thr.json");
    CHECK(back.tree_count() == 6);
    CHECK(std::vector<int>(back.tree_ids().begin(), back.tree_ids().end()) ==
          std::vector<int>(table.tree_ids().begin(), table.tree_ids().end()));
    CHECK(std::equal(back.cells().begin(), back.cells().end(), table.cells().begin()));
    for (std::size_t j = 0; j < kIndexCount; ++j) {
      CHECK(back.banding(j).thresholds == table.banding(j).thresholds);
      CHECK(back.banding(j).norm.min == table.banding(j).norm.min);
      CHECK(back.banding(j).outliers == table.banding(j).outliers);
    }
  }
  CHECK(io::parse_cell("OUTLIER").is_outlier());
  CHECK(io::parse_cell("-1e+06").is_outlier());
  CHECK(io::parse_cell("").is_missing());
  CHECK(io::parse_cell("3").band() == 3);
  CHECK_THROWS_AS(io::parse_cell("high"), Error);
}

TEST_CASE("model file round-trips exactly", "[io]") {
  TempDir dir;
  Architecture a;
  a.embedding_dim = 5;
  a.hidden = 7;
  a.bias = true;
  const auto m = EmbeddingModel::random(a, 0.3, 12);
  TrainConfig cfg;
  cfg.seed = 99;
  io::write_model(dir / "model.json", m, cfg, 0.5, 0.01);
  const auto back = io::read_model(dir / "model.json");
  CHECK(back.architecture() == a);
  CHECK(std::equal(back.parameters().begin(), back.parameters().end(), m.parameters().begin(),
                   m.parameters().end()));
  auto doc = io::read_json(dir / "model.json");
  doc["version"] = 2;
  io::write_json(dir / "v2.json", doc);
  CHECK_THROWS_AS(io::read_model(dir / "v2.json"), Error);
  doc["version"] = 1;
  doc["parameters"].erase(0);
  io::write_json(dir / "short.json", doc);
  CHECK_THROWS_AS(io::read_model(dir / "short.json"), Error);

  io::write_embeddings_csv(dir / "emb.csv", m);
  const auto csv = text::read_csv(dir / "emb.csv");
  CHECK(csv.rows.size() == kVocabularySize);
  CHECK(csv.rows[83][1] == "Very High WBI");
  CHECK(text::require_double(csv.rows[2][3], "") == m.embedding(2)[1]);
}

TEST_CASE("feature and cluster files round-trip", "[io]") {
  TempDir dir;
  FeatureSet f{{4, 8}, {{0.125, -3.5e-7, 1.0 / 3.0}, {2, 0, 1e300}}};
  io::write_features_csv(dir / "f.csv", f, {"a", "b", "c"});
  const auto back = io::read_features_csv(dir / "f.csv");
  CHECK(back.tree_ids == f.tree_ids);
  CHECK(back.rows == f.rows);
  CHECK_THROWS_AS(io::write_features_csv(dir / "bad.csv", f, {"a"}), Error);

  CHECK(io::tree_vector_columns(5, 64).size() == 6720);
  CHECK(io::tree_vector_columns(2, 3)[4] == "s1_ARI2_e2");
  CHECK(io::direct_vector_columns(5).size() == 105);
  CHECK(io::direct_vector_columns(5)[21] == "s2_ARI1");

  ClusterAssignment a;
  a.tree_ids = {4, 8, 15};
  a.labels = {2, 1, 2};
  a.k = 2;
  a.space = "embedding";
  io::write_clusters(dir / "clusters_embedding.csv", dir / "clusters_embedding.json", a);
  const auto c = io::read_clusters_csv(dir / "clusters_embedding.csv");
  CHECK(c.tree_ids == a.tree_ids);
  CHECK(c.labels == a.labels);
  CHECK(c.k == 2);
  CHECK(c.space == "clusters_embedding");
  const auto doc = io::read_json(dir / "clusters_embedding.json");
  CHECK(doc["cluster_sizes"] == nlohmann::ordered_json({1, 2}));
}

TEST_CASE("seed derivation", "[config]") {
  CHECK(derive_seed(7, "train") == derive_seed(7, "train"));
  CHECK(derive_seed(7, "train") != derive_seed(7, "cluster"));
  CHECK(derive_seed(7, "train") != derive_seed(8, "train"));
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  Config c;
  c.seed = 11;
  CHECK(c.training_config().seed == derive_seed(11, "train"));
  CHECK(c.scene_spec().seed == derive_seed(11, "synth"));
}

TEST_CASE("config defaults and round-trip", "[config]") {
  const Config d;
  CHECK(d.segments == 5);
  CHECK(d.architecture.embedding_dim == 64);
  CHECK(d.architecture.hidden == 600);
  CHECK(d.training.epochs == 2000);
  CHECK(d.training.dropout == 0.2);
  CHECK(d.extract.grid_side == 4);
  CHECK(d.analysis.clusters == 4);
  CHECK(d.analysis.repetitions == 100);

  Config c;
  c.seed = 5;
  c.segments = 3;
  c.paper_sentinel = true;
  c.architecture.embedding_dim = 8;
  c.training.learning_rate = 0.01;
  c.analysis.classifier = ClassifierKind::multinomial_logistic;
  c.analysis.neighbor_queries = {"Mid PRI"};
  const auto j = config_to_json(c);
  const auto back = config_from_json(j);
  CHECK(config_to_json(back) == j);
}

TEST_CASE("config files reject bad input", "[config]") {
  TempDir dir;
  write_text(dir / "ok.json", "{ // comment\n \"seed\": 3, \"segments\": {\"count\": 4}}");
  const auto c = load_config(dir / "ok.json");
  CHECK(c.seed == 3);
  CHECK(c.segments == 4);

  write_text(dir / "typo.json", R"({"embedding": {"epoch": 5}})");
  CHECK_THROWS_WITH(load_config(dir / "typo.json"), Catch::Matchers::ContainsSubstring("epoch"));
  write_text(dir / "root.json", R"({"sed": 5})");
  CHECK_THROWS_AS(load_config(dir / "root.json"), Error);
  write_text(dir / "nested.json", R"({"extract": {"filter": {"ari2": 1}}})");
  CHECK_THROWS_AS(load_config(dir / "nested.json"), Error);
  write_text(dir / "type.json", R"({"segments": {"count": "five"}})");
  CHECK_THROWS_AS(load_config(dir / "type.json"), Error);
  write_text(dir / "range.json", R"({"segments": {"count": 1}})");
  CHECK_THROWS_AS(load_config(dir / "range.json"), Error);
  write_text(dir / "space.json", R"({"analysis": {"cluster_space": "pixels"}})");
  CHECK_THROWS_AS(load_config(dir / "space.json"), Error);
  write_text(dir / "broken.json", "{");
  CHECK_THROWS_AS(load_config(dir / "broken.json"), Error);
  CHECK_THROWS_AS(load_config(dir / "absent.json"), Error);
}
