#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "canopy/analysis.hpp"
#include "canopy/embed.hpp"
#include "canopy/error.hpp"
#include "canopy/segments.hpp"
#include "canopy/synth.hpp"
#include "canopy/treex.hpp"
#include "canopy/vegindex.hpp"

namespace canopy {

/// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seed of a named stage, derived from the root seed.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view stage) {
  return mix64(root ^ fnv1a64(stage));
}

struct AnalysisConfig {
  int clusters = 4;
  std::string cluster_space = "embedding";  // embedding | direct
  ClassifierKind classifier = ClassifierKind::gaussian_naive_bayes;
  std::vector<double> test_fractions = HarnessOptions::default_fractions();
  int repetitions = 100;
  std::size_t top_n = 10;
  std::size_t neighbors = 5;
  std::string neighbor_metric = "euclidean";  // euclidean | cosine
  std::vector<std::string> neighbor_queries = {"Low NDVI", "Very High NDVI"};
};

struct Config {
  std::uint64_t seed = 0;
  /// Cube to process; when empty, `run` generates a synthetic scene first.
  std::string input_cube;
  SceneSpec synth;
  ExtractConfig extract;
  IndexConfig indices;
  int segments = kDefaultSegments;
  bool paper_sentinel = false;
  Architecture architecture;
  TrainConfig training;
  AnalysisConfig analysis;

  std::uint64_t stage_seed(std::string_view stage) const { return derive_seed(seed, stage); }

  /// Training settings with the derived "train" seed filled in.
  TrainConfig training_config() const {
    auto t = training;
    t.seed = stage_seed("train");
    return t;
  }
  SceneSpec scene_spec() const {
    auto s = synth;
    s.seed = stage_seed("synth");
    return s;
  }
};

namespace config_detail {

using json = nlohmann::ordered_json;

/// Reads members of one JSON object section, rejecting unknown keys.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw Error("config: section '" + name_ + "' must be an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.contains(it.key())) {
        throw Error("config: unknown key '" + it.key() + "' in section '" + name_ + "'");
      }
    }
  }
  Section(const Section&) = delete;
  Section& operator=(const Section&) = delete;

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw Error("config: " + name_ + "." + key + ": " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

}  // namespace config_detail

inline nlohmann::ordered_json config_to_json(const Config& c) {
  using json = nlohmann::ordered_json;
  json j;
  j["seed"] = c.seed;
  j["input_cube"] = c.input_cube;
  const auto& s = c.synth;
  j["synth"] = {{"width", s.width},
                {"height", s.height},
                {"tree_count", s.tree_count},
                {"radius_min", s.radius_min},
                {"radius_max", s.radius_max},
                {"channels", s.channels},
                {"wavelength_min", s.wavelength_min},
                {"wavelength_max", s.wavelength_max},
                {"gradient_strength", s.gradient_strength},
                {"health_variation", s.health_variation},
                {"noise", s.noise},
                {"min_gap", s.min_gap},
                {"shade", s.shade},
                {"max_attempts", s.max_attempts}};
  const auto& f = c.extract.filter;
  j["extract"] = {{"grid_side", c.extract.grid_side},
                  {"min_leaf_per_grid", c.extract.min_leaf_per_grid},
                  {"min_tree_pixels", c.extract.min_tree_pixels},
                  {"filter",
                   {{"ari2_min", f.ari2_min},
                    {"sipi_min", f.sipi_min},
                    {"p900_max", f.p900_max},
                    {"p780_min", f.p780_min},
                    {"p660_max", f.p660_max}}}};
  const auto& b = c.indices.broadband;
  j["indices"] = {{"broadband", {{"nir", b.nir}, {"red", b.red}, {"green", b.green}, {"blue", b.blue}}},
                  {"arvi_gamma", c.indices.arvi_gamma},
                  {"literature_variants", c.indices.literature_variants}};
  j["segments"] = {{"count", c.segments}};
  j["banding"] = {{"paper_sentinel", c.paper_sentinel}};
  const auto& a = c.architecture;
  const auto& t = c.training;
  j["embedding"] = {{"embedding_dim", a.embedding_dim},
                    {"hidden", a.hidden},
                    {"leaky_slope", a.leaky_slope},
                    {"bias", a.bias},
                    {"epochs", t.epochs},
                    {"learning_rate", t.learning_rate},
                    {"dropout", t.dropout},
                    {"beta1", t.beta1},
                    {"beta2", t.beta2},
                    {"epsilon", t.epsilon},
                    {"init_scale", t.init_scale}};
  const auto& an = c.analysis;
  j["analysis"] = {{"clusters", an.clusters},
                   {"cluster_space", an.cluster_space},
                   {"classifier", std::string(classifier_name(an.classifier))},
                   {"test_fractions", an.test_fractions},
                   {"repetitions", an.repetitions},
                   {"top_n", an.top_n},
                   {"neighbors", an.neighbors},
                   {"neighbor_metric", an.neighbor_metric},
                   {"neighbor_queries", an.neighbor_queries}};
  return j;
}

inline void validate(const Config& c) {
  if (c.segments < 2 || c.segments > 8) throw Error("config: segments.count must lie in 2..8");
  if (c.extract.grid_side < 2) throw Error("config: extract.grid_side must be >= 2");
  if (c.extract.min_leaf_per_grid < 0) throw Error("config: extract.min_leaf_per_grid must be >= 0");
  if (c.training.epochs < 1) throw Error("config: embedding.epochs must be >= 1");
  if (!(c.training.dropout >= 0.0 && c.training.dropout < 1.0)) {
    throw Error("config: embedding.dropout must lie in [0, 1)");
  }
  if (c.architecture.embedding_dim == 0 || c.architecture.hidden == 0) {
    throw Error("config: embedding dimensions must be positive");
  }
  if (c.analysis.clusters < 1) throw Error("config: analysis.clusters must be >= 1");
  if (c.analysis.cluster_space != "embedding" && c.analysis.cluster_space != "direct") {
    throw Error("config: analysis.cluster_space must be 'embedding' or 'direct'");
  }
  if (c.analysis.neighbor_metric != "euclidean" && c.analysis.neighbor_metric != "cosine") {
    throw Error("config: analysis.neighbor_metric must be 'euclidean' or 'cosine'");
  }
  if (c.analysis.repetitions < 1) throw Error("config: analysis.repetitions must be >= 1");
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline Config config_from_json(const nlohmann::ordered_json& j) {
  using config_detail::Section;
  Config c;
  {
    Section root(j, "root");
    root.get("seed", c.seed);
    root.get("input_cube", c.input_cube);
    if (const auto* s = root.child("synth")) {
      Section sec(*s, "synth");
      auto& v = c.synth;
      sec.get("width", v.width);
      sec.get("height", v.height);
      sec.get("tree_count", v.tree_count);
      sec.get("radius_min", v.radius_min);
      sec.get("radius_max", v.radius_max);
      sec.get("channels", v.channels);
      sec.get("wavelength_min", v.wavelength_min);
      sec.get("wavelength_max", v.wavelength_max);
      sec.get("gradient_strength", v.gradient_strength);
      sec.get("health_variation", v.health_variation);
      sec.get("noise", v.noise);
      sec.get("min_gap", v.min_gap);
      sec.get("shade", v.shade);
      sec.get("max_attempts", v.max_attempts);
    }
    if (const auto* s = root.child("extract")) {
      Section sec(*s, "extract");
      sec.get("grid_side", c.extract.grid_side);
      sec.get("min_leaf_per_grid", c.extract.min_leaf_per_grid);
      sec.get("min_tree_pixels", c.extract.min_tree_pixels);
      if (const auto* f = sec.child("filter")) {
        Section fs(*f, "extract.filter");
        auto& v = c.extract.filter;
        fs.get("ari2_min", v.ari2_min);
        fs.get("sipi_min", v.sipi_min);
        fs.get("p900_max", v.p900_max);
        fs.get("p780_min", v.p780_min);
        fs.get("p660_max", v.p660_max);
      }
    }
    if (const auto* s = root.child("indices")) {
      Section sec(*s, "indices");
      sec.get("arvi_gamma", c.indices.arvi_gamma);
      sec.get("literature_variants", c.indices.literature_variants);
      if (const auto* b = sec.child("broadband")) {
        Section bs(*b, "indices.broadband");
        auto& v = c.indices.broadband;
        bs.get("nir", v.nir);
        bs.get("red", v.red);
        bs.get("green", v.green);
        bs.get("blue", v.blue);
      }
    }
    if (const auto* s = root.child("segments")) {
      Section sec(*s, "segments");
      sec.get("count", c.segments);
    }
    if (const auto* s = root.child("banding")) {
      Section sec(*s, "banding");
      sec.get("paper_sentinel", c.paper_sentinel);
    }
    if (const auto* s = root.child("embedding")) {
      Section sec(*s, "embedding");
      sec.get("embedding_dim", c.architecture.embedding_dim);
      sec.get("hidden", c.architecture.hidden);
      sec.get("leaky_slope", c.architecture.leaky_slope);
      sec.get("bias", c.architecture.bias);
      sec.get("epochs", c.training.epochs);
      sec.get("learning_rate", c.training.learning_rate);
      sec.get("dropout", c.training.dropout);
      sec.get("beta1", c.training.beta1);
      sec.get("beta2", c.training.beta2);
      sec.get("epsilon", c.training.epsilon);
      sec.get("init_scale", c.training.init_scale);
    }
    if (const auto* s = root.child("analysis")) {
      Section sec(*s, "analysis");
      auto& v = c.analysis;
      sec.get("clusters", v.clusters);
      sec.get("cluster_space", v.cluster_space);
      std::string classifier(classifier_name(v.classifier));
      sec.get("classifier", classifier);
      v.classifier = parse_classifier(classifier);
      sec.get("test_fractions", v.test_fractions);
      sec.get("repetitions", v.repetitions);
      sec.get("top_n", v.top_n);
      sec.get("neighbors", v.neighbors);
      sec.get("neighbor_metric", v.neighbor_metric);
      sec.get("neighbor_queries", v.neighbor_queries);
    }
  }
  validate(c);
  return c;
}

inline Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("config: cannot open " + path.string());
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(in, nullptr, true, true);
  } catch (const nlohmann::ordered_json::exception& e) {
    throw Error("config: " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace canopy
