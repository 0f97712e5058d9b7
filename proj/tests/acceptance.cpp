// Acceptance checks: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "canopy/pipeline.hpp"

using namespace canopy;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    path_ = fs::temp_directory_path() /
            ("canopy_accept_" + tag + "_" +
             std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
    fs::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::vector<SegmentProfile> random_profiles(int trees, int segments, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<SegmentProfile> ps;
  for (int id = 1; id <= trees; ++id) {
    SegmentProfile p;
    p.tree_id = id;
    p.pixel_counts.assign(static_cast<std::size_t>(segments), 10);
    p.means.resize(static_cast<std::size_t>(segments));
    for (auto& m : p.means)
      for (auto& v : m) v = g(rng);
    ps.push_back(p);
  }
  return ps;
}

double euclid(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

// 1
Outcome purity_reference() {
  const CountMatrix m{{0, 2, 15, 1}, {19, 1, 0, 0}, {3, 19, 2, 0}, {0, 3, 1, 15}};
  const double p = purity(m);
  return {p == 68.0 / 81.0 && std::abs(p - 0.84) <= 0.005, fmt("purity %.4f (68/81), |p - 0.84| = %.4f", p, std::abs(p - 0.84))};
}

// 2
Outcome dimensions() {
  const auto ps = random_profiles(9, kDefaultSegments, 2);
  const auto table = build_band_table(ps);
  const auto direct = direct_vectors(table);
  const auto contexts = band_contexts(table);
  const auto model = EmbeddingModel(Architecture{});
  const auto tv = tree_vector(table, model, 1);
  const bool ok = tv.values.size() == 6720 && tree_vector_length(5, 64) == 6720 &&
                  direct.dimension() == 105 && kVocabularySize == 84 &&
                  contexts.vocabulary() == 84 && table.context_count() == 9 * 5 &&
                  contexts.contexts() == 9 * 5;
  return {ok, fmt("tree vector %zu, direct %zu, vocabulary %zu, contexts %zu for 9 trees x 5 segments",
                  tv.values.size(), direct.dimension(), contexts.vocabulary(), contexts.contexts())};
}

// 3
Outcome gradients() {
  std::mt19937_64 rng(3);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Architecture a;
    a.vocabulary = 4 + rng() % 5;
    a.embedding_dim = 2 + rng() % 4;
    a.hidden = 3 + rng() % 8;
    const std::size_t i = rng() % a.vocabulary, j = rng() % a.vocabulary;
    EmbeddingModel m;
    // keep pre-activations clear of the leaky-ReLU kink
    for (std::uint64_t s = rng();; ++s) {
      m = EmbeddingModel::random(a, 0.5, s);
      const auto z = m.preactivation(i, j);
      if (std::all_of(z.begin(), z.end(), [](double v) { return std::abs(v) > 1e-3; })) break;
    }
    worst = std::max(worst, gradient_check(m, i, j, static_cast<double>(rng() % 100) / 100.0).max_relative_error);
  }
  return {worst < 1e-4, fmt("max relative error %.2e over 20 models", worst)};
}

// 4
Outcome toy_training() {
  const CooccurrenceTable toy({{0}, {0}, {1}}, 2);
  Architecture a;
  a.vocabulary = 3;
  TrainConfig cfg;
  cfg.seed = 1;
  const auto r = train_new(a, toy, cfg);
  const double f12 = r.model.forward(0, 1), f13 = r.model.forward(0, 2), f23 = r.model.forward(1, 2);
  const double ratio = r.loss_history.back() / r.initial_loss;
  return {ratio < 0.1 && f12 > f13 && f12 > f23,
          fmt("final/initial loss %.2e, forward(1,2) %.3f, (1,3) %.3f, (2,3) %.3f", ratio, f12, f13, f23)};
}

// 5: a-b and b-c share contexts, a-c never do; nine unrelated tokens in three
// co-occurring groups.
Outcome transitivity() {
  std::vector<std::vector<std::uint32_t>> sets(12);
  for (std::uint32_t k = 0; k < 5; ++k) sets[0].push_back(k), sets[1].push_back(k);
  for (std::uint32_t k = 5; k < 10; ++k) sets[1].push_back(k), sets[2].push_back(k);
  std::uint32_t ctx = 10;
  for (int g = 0; g < 3; ++g)
    for (int r = 0; r < 5; ++r, ++ctx)
      for (int m = 0; m < 3; ++m)
        if ((r + m) % 3) sets[static_cast<std::size_t>(3 + 3 * g + m)].push_back(ctx);
  const CooccurrenceTable table(sets, ctx);
  Architecture a;
  a.vocabulary = 12;
  int passing = 0;
  std::ostringstream detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    TrainConfig cfg;
    cfg.seed = seed;
    const auto r = train_new(a, table, cfg);
    std::vector<double> d;
    for (std::size_t i = 0; i < 12; ++i)
      for (std::size_t j = i + 1; j < 12; ++j) d.push_back(euclid(r.model.embedding(i), r.model.embedding(j)));
    std::sort(d.begin(), d.end());
    const double median = 0.5 * (d[d.size() / 2 - 1] + d[d.size() / 2]);
    const double ac = euclid(r.model.embedding(0), r.model.embedding(2));
    passing += ac < median;
    detail << (seed > 1 ? "; " : "") << fmt("%.3f/%.3f", ac, median);
  }
  return {passing >= 4, fmt("%d/5 seeds with d(a,c) < median (d/median: ", passing) + detail.str() + ")"};
}

// 6
Outcome recovery() {
  SceneSpec spec;  // defaults: ten crowns, full gradient, no noise
  const auto scene = generate_scene(spec);
  const auto trees = extract(scene.cube);
  double worst = 1.0;
  int monotone_ok = 0;
  std::set<int> used;
  for (const auto& crown : scene.crowns) {
    const std::set<Pixel> planted(crown.pixels.begin(), crown.pixels.end());
    double best = 0.0;
    const TreeRegion* match = nullptr;
    for (const auto& t : trees) {
      std::size_t inter = 0;
      for (const auto& p : t.pixels) inter += planted.count(p);
      const double j = static_cast<double>(inter) / static_cast<double>(planted.size() + t.pixels.size() - inter);
      if (j > best) best = j, match = &t;
    }
    worst = std::min(worst, best);
    if (!match || !used.insert(match->id).second) continue;
    const auto profile = profile_tree(*match, compute_all(scene.cube, *match));
    bool all = true;
    for (std::size_t j = 0; j < kIndexCount; ++j) all = all && monotone_run(profile, index_at(j)) == 5;
    monotone_ok += all;
  }
  return {trees.size() == 10 && worst >= 0.95 && monotone_ok == 10,
          fmt("%zu trees, worst crown Jaccard %.4f, %d/10 crowns with run 5 on all 21 indices",
              trees.size(), worst, monotone_ok)};
}

// 7
Outcome occupancy() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Column c(1000);
  for (auto& v : c) v = u(rng);
  const auto t = band_thresholds(c);
  std::array<int, 4> n{};
  for (const auto& v : c) ++n[static_cast<std::size_t>(assign_band(*v, t) - 1)];
  const bool ok = std::all_of(n.begin(), n.end(), [](int k) { return std::abs(k / 1000.0 - 0.25) <= 0.03; });
  return {ok, fmt("band occupancy %d/%d/%d/%d of 1000", n[0], n[1], n[2], n[3])};
}

// 8
Outcome oracles() {
  std::mt19937_64 rng(8);
  std::vector<std::string> failed;

  // confusion and purity against flat counting
  for (int trial = 0; trial < 30; ++trial) {
    const int k = 2 + static_cast<int>(rng() % 4);
    ClusterAssignment a, b;
    a.k = b.k = k;
    for (int t = 0; t < 50; ++t) {
      a.tree_ids.push_back(t);
      b.tree_ids.push_back(t);
      a.labels.push_back(1 + static_cast<int>(rng() % static_cast<unsigned>(k)));
      b.labels.push_back(1 + static_cast<int>(rng() % static_cast<unsigned>(k)));
    }
    std::size_t agree = 0;
    bool cells = true;
    const auto m = confusion(a, b);
    for (int i = 1; i <= k; ++i) {
      std::size_t best = 0;
      for (int j = 1; j <= k; ++j) {
        std::size_t n = 0;
        for (std::size_t t = 0; t < 50; ++t) n += a.labels[t] == i && b.labels[t] == j;
        cells = cells && m[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j - 1)] == n;
        best = std::max(best, n);
      }
      agree += best;
    }
    if (!cells || purity(m) != static_cast<double>(agree) / 50.0) {
      failed.push_back("confusion/purity");
      break;
    }
  }

  // quartiles and fences against sorted-order interpolation
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 4 + rng() % 50;
    Column c(n);
    std::vector<double> raw;
    std::lognormal_distribution<double> g(0.0, 1.0);
    for (auto& v : c) raw.push_back(*(v = g(rng)));
    std::sort(raw.begin(), raw.end());
    auto q = [&](double p) {
      const double pos = p * static_cast<double>(n - 1);
      const auto lo = static_cast<std::size_t>(pos);
      return lo + 1 < n ? raw[lo] + (pos - lo) * (raw[lo + 1] - raw[lo]) : raw[lo];
    };
    const auto s = detect_outliers(c);
    const double iqr = q(0.75) - q(0.25);
    bool ok = std::abs(s.fences.q1 - q(0.25)) < 1e-12 && std::abs(s.fences.q3 - q(0.75)) < 1e-12;
    for (std::size_t i = 0; i < n; ++i)
      ok = ok && s.outlier[i] == (*c[i] < q(0.25) - 1.5 * iqr || *c[i] > q(0.75) + 1.5 * iqr);
    if (!ok) {
      failed.push_back("quartile/fence");
      break;
    }
  }

  // co-occurrence neighbors against brute-force Jaccard
  {
    const auto table = build_band_table(random_profiles(12, 5, 9));
    const auto co = band_contexts(table);
    for (std::size_t qt = 0; qt < kVocabularySize; qt += 5) {
      std::vector<std::pair<double, std::size_t>> all;
      for (std::size_t t = 0; t < kVocabularySize; ++t) {
        if (t == qt) continue;
        std::size_t inter = 0, uni = 0;
        for (std::size_t row = 0; row < table.tree_count(); ++row)
          for (int s = 0; s < 5; ++s) {
            const auto has = [&](std::size_t tok) {
              const auto& cell = table.cell(row, s, tok / 4);
              return cell.valid() && cell.band() == static_cast<int>(tok % 4) + 1;
            };
            inter += has(qt) && has(t);
            uni += has(qt) || has(t);
          }
        all.emplace_back(uni ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0, t);
      }
      std::stable_sort(all.begin(), all.end(), [](auto& x, auto& y) { return x.first > y.first; });
      const auto nn = nearest_bands_direct(co, Token{qt}, 8);
      bool ok = true;
      for (std::size_t i = 0; i < 8; ++i) ok = ok && nn[i].token.id == all[i].second && nn[i].score == all[i].first;
      if (!ok) {
        failed.push_back("jaccard neighbors");
        break;
      }
    }
  }

  // k-means on separated blobs, and chance-level harness accuracy
  double blob_purity = 0.0, chance = 0.0;
  {
    std::normal_distribution<double> g(0.0, 0.3);
    FeatureSet f;
    ClusterAssignment truth;
    truth.k = 4;
    for (int c = 0; c < 4; ++c)
      for (int i = 0; i < 20; ++i) {
        f.rows.push_back({c * 10.0 + g(rng), (c % 2) * 10.0 + g(rng), g(rng)});
        f.tree_ids.push_back(c * 20 + i);
        truth.tree_ids.push_back(c * 20 + i);
        truth.labels.push_back(c + 1);
      }
    blob_purity = purity(kmeans(f, 4, 11), truth);
    if (blob_purity != 1.0) failed.push_back("k-means blobs");

    FeatureSet noise;
    std::vector<int> labels;
    for (int i = 0; i < 200; ++i) {
      noise.rows.push_back({g(rng), g(rng), g(rng)});
      noise.tree_ids.push_back(i);
      labels.push_back(1 + i % 4);
    }
    std::shuffle(labels.begin(), labels.end(), rng);
    HarnessOptions opts;
    opts.repetitions = 20;
    opts.seed = 12;
    const auto acc = classification_harness(noise, labels, ClassifierKind::gaussian_naive_bayes, opts);
    for (const auto& r : acc) chance += r.mean_accuracy / static_cast<double>(acc.size());
    if (std::abs(chance - 0.25) > 0.1) failed.push_back("chance accuracy");
  }

  std::string which;
  for (const auto& f : failed) which += " " + f;
  return {failed.empty(), fmt("blob purity %.3f, shuffled-label accuracy %.3f", blob_purity, chance) +
                              (failed.empty() ? "" : "; failed:" + which)};
}

// 9
Outcome determinism() {
  Config cfg;
  cfg.seed = 21;
  cfg.synth.width = 220;
  cfg.synth.height = 160;
  cfg.synth.tree_count = 6;
  cfg.synth.radius_min = 14;
  cfg.synth.radius_max = 18;
  cfg.synth.noise = 20;
  cfg.architecture.embedding_dim = 8;
  cfg.architecture.hidden = 32;
  cfg.training.epochs = 40;
  cfg.analysis.clusters = 2;
  cfg.analysis.repetitions = 5;
  ScratchDir a("a"), b("b");
  const auto ma = run_pipeline(cfg, a.path()).manifest;
  const auto mb = run_pipeline(cfg, b.path()).manifest;
  std::size_t files = 0, same = 0;
  for (std::size_t s = 0; s < ma["stages"].size(); ++s)
    for (const auto& [file, digest] : ma["stages"][s]["outputs"].items()) {
      ++files;
      same += mb["stages"][s]["outputs"].value(file, "") == digest.get<std::string>();
    }
  return {files > 0 && same == files && ma == mb, fmt("%zu/%zu artifact digests identical across two runs", same, files)};
}

}  // namespace

int main() {
  ScopedWarningHandler quiet([](const std::string&) {});
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"purity of the 81-tree reference matrix", purity_reference},
      {"dimensions", dimensions},
      {"gradient check", gradients},
      {"toy training", toy_training},
      {"contextual transitivity", transitivity},
      {"noise-free scene recovery", recovery},
      {"equal-frequency banding", occupancy},
      {"oracle equivalence", oracles},
      {"run determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !o.pass;
    std::printf("criterion %zu %s: %s (%s; %.1fs)\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first,
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
