#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "canopy/banding.hpp"
#include "canopy/embed.hpp"
#include "canopy/error.hpp"
#include "canopy/treevec.hpp"

namespace canopy {

/// Row-per-tree feature matrix with the tree id of every row.
struct FeatureSet {
  std::vector<int> tree_ids;
  std::vector<std::vector<double>> rows;

  std::size_t size() const { return rows.size(); }
  std::size_t dimension() const { return rows.empty() ? 0 : rows.front().size(); }
};

namespace detail {

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// k-means

struct ClusterAssignment {
  std::vector<int> tree_ids;
  std::vector<int> labels;  // 1..k, parallel to tree_ids
  int k = 0;
  std::uint64_t seed = 0;
  std::string space;  // "embedding" | "direct" | free-form
  double inertia = 0.0;
  int iterations = 0;
  std::vector<double> inertia_history;  // after each assignment step

  std::vector<int> members(int label) const {
    std::vector<int> ids;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == label) ids.push_back(tree_ids[i]);
    return ids;
  }
};

struct KMeansOptions {
  int max_iterations = 300;
  double tolerance = 1e-6;  // max centroid shift (Euclidean) to stop
};

/// Lloyd iterations after k-means++ seeding. Deterministic for a fixed seed.
/// An emptied cluster is re-seeded with the point farthest from its centroid.
inline ClusterAssignment kmeans(const FeatureSet& features, int k, std::uint64_t seed,
                                const KMeansOptions& opts = {}) {
  const std::size_t n = features.size();
  if (k < 1) throw Error("kmeans: k must be >= 1");
  if (n < static_cast<std::size_t>(k)) {
    throw Error("kmeans: " + std::to_string(n) + " points cannot form " + std::to_string(k) +
                " clusters");
  }
  const std::size_t dim = features.dimension();
  for (const auto& r : features.rows)
    if (r.size() != dim) throw Error("kmeans: ragged feature rows");
  {
    std::set<std::vector<double>> distinct(features.rows.begin(), features.rows.end());
    if (distinct.size() < static_cast<std::size_t>(k)) {
      throw Error("kmeans: fewer distinct points than clusters");
    }
  }

  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> centers;
  centers.push_back(features.rows[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)]);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  while (centers.size() < static_cast<std::size_t>(k)) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], detail::squared_distance(features.rows[i], centers.back()));
      total += d2[i];
    }
    double u = std::uniform_real_distribution<double>(0.0, total)(rng);
    std::size_t pick = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      pick = i;
      if (u < d2[i]) break;
      u -= d2[i];
    }
    centers.push_back(features.rows[pick]);
  }

  ClusterAssignment out;
  out.tree_ids = features.tree_ids;
  out.k = k;
  out.seed = seed;
  std::vector<std::size_t> label(n, 0);
  std::vector<double> dist(n, 0.0);
  for (int iter = 1; iter <= opts.max_iterations; ++iter) {
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = detail::squared_distance(features.rows[i], centers[0]);
      for (std::size_t c = 1; c < centers.size(); ++c) {
        const double d = detail::squared_distance(features.rows[i], centers[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      label[i] = best;
      dist[i] = best_d;
      inertia += best_d;
    }
    out.inertia_history.push_back(inertia);
    out.inertia = inertia;
    out.iterations = iter;

    std::vector<std::vector<double>> next(centers.size(), std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(centers.size(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[label[i]];
      for (std::size_t r = 0; r < dim; ++r) next[label[i]][r] += features.rows[i][r];
    }
    for (std::size_t c = 0; c < centers.size(); ++c) {
      if (counts[c] == 0) {
        const auto far = static_cast<std::size_t>(
            std::max_element(dist.begin(), dist.end()) - dist.begin());
        next[c] = features.rows[far];
        dist[far] = 0.0;
      } else {
        for (auto& v : next[c]) v /= static_cast<double>(counts[c]);
      }
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < centers.size(); ++c) {
      shift = std::max(shift, std::sqrt(detail::squared_distance(centers[c], next[c])));
    }
    centers = std::move(next);
    if (shift < opts.tolerance) break;
  }
  // Final labels against the final centers.
  out.labels.resize(n);
  double inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    double best_d = detail::squared_distance(features.rows[i], centers[0]);
    for (std::size_t c = 1; c < centers.size(); ++c) {
      const double d = detail::squared_distance(features.rows[i], centers[c]);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    out.labels[i] = static_cast<int>(best) + 1;
    inertia += best_d;
  }
  out.inertia = inertia;
  return out;
}

// ---------------------------------------------------------------------------
// Agreement between clusterings

using CountMatrix = std::vector<std::vector<std::size_t>>;

/// cell (i, j) = number of trees labeled i by `a` and j by `b`.
inline CountMatrix confusion(const ClusterAssignment& a, const ClusterAssignment& b) {
  if (a.tree_ids.size() != b.tree_ids.size()) throw Error("confusion: tree sets differ");
  std::map<int, int> b_label;
  for (std::size_t i = 0; i < b.tree_ids.size(); ++i) b_label[b.tree_ids[i]] = b.labels[i];
  if (b_label.size() != b.tree_ids.size()) throw Error("confusion: duplicate tree id");
  CountMatrix m(static_cast<std::size_t>(a.k), std::vector<std::size_t>(static_cast<std::size_t>(b.k), 0));
  for (std::size_t i = 0; i < a.tree_ids.size(); ++i) {
    auto it = b_label.find(a.tree_ids[i]);
    if (it == b_label.end()) throw Error("confusion: tree sets differ");
    const int la = a.labels[i], lb = it->second;
    if (la < 1 || la > a.k || lb < 1 || lb > b.k) throw Error("confusion: label out of range");
    ++m[static_cast<std::size_t>(la - 1)][static_cast<std::size_t>(lb - 1)];
  }
  return m;
}

/// Σ_i max_j m(i, j) / Σ m.
inline double purity(const CountMatrix& m) {
  std::size_t total = 0, agree = 0;
  for (const auto& row : m) {
    total += std::accumulate(row.begin(), row.end(), std::size_t{0});
    if (!row.empty()) agree += *std::max_element(row.begin(), row.end());
  }
  if (total == 0) throw Error("purity: empty confusion matrix");
  return static_cast<double>(agree) / static_cast<double>(total);
}

inline double purity(const ClusterAssignment& a, const ClusterAssignment& b) {
  return purity(confusion(a, b));
}

// ---------------------------------------------------------------------------
// Direct representation

/// Normalized segment means, segment-major then catalog order. Unusable
/// cells take the nearest valid segment's value (average of two at equal
/// distance); an index with no valid segment falls back to its band median.
inline FeatureSet direct_vectors(const BandTable& table) {
  if (!table.has_normalized()) throw Error("direct_vectors: band table lacks normalized values");
  FeatureSet out;
  const int S = table.segment_count();
  for (std::size_t row = 0; row < table.tree_count(); ++row) {
    const int id = table.tree_ids()[row];
    std::vector<double> v(static_cast<std::size_t>(S) * kIndexCount, 0.0);
    for (std::size_t j = 0; j < kIndexCount; ++j) {
      const auto valid = detail::valid_segments(table, row, j);
      for (int s = 0; s < S; ++s) {
        double& slot = v[static_cast<std::size_t>(s) * kIndexCount + j];
        if (valid[static_cast<std::size_t>(s)]) {
          slot = *table.normalized(row, s, j);
          continue;
        }
        const auto near = nearest_valid_segments(valid, s);
        if (near.inner && near.outer) {
          slot = 0.5 * (*table.normalized(row, *near.inner, j) + *table.normalized(row, *near.outer, j));
        } else if (near.found()) {
          slot = *table.normalized(row, near.inner ? *near.inner : *near.outer, j);
        } else {
          warn("tree " + std::to_string(id) + ": no valid segment for " +
               std::string(index_name(index_at(j))) + ", using the index median");
          slot = table.banding(j).thresholds[1];
        }
      }
    }
    out.tree_ids.push_back(id);
    out.rows.push_back(std::move(v));
  }
  return out;
}

inline FeatureSet embedding_features(const std::vector<TreeEmbedding>& vectors) {
  FeatureSet out;
  for (const auto& t : vectors) {
    out.tree_ids.push_back(t.tree_id);
    out.rows.push_back(t.values);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Classifiers

enum class ClassifierKind { gaussian_naive_bayes, multinomial_logistic };

inline ClassifierKind parse_classifier(std::string_view name) {
  const auto s = text::lower(name);
  if (s == "gaussian-naive-bayes" || s == "gnb" || s == "naive-bayes") {
    return ClassifierKind::gaussian_naive_bayes;
  }
  if (s == "multinomial-logistic" || s == "logistic") return ClassifierKind::multinomial_logistic;
  throw Error("unknown classifier '" + std::string(name) + "'");
}

inline std::string_view classifier_name(ClassifierKind k) {
  return k == ClassifierKind::gaussian_naive_bayes ? "gaussian-naive-bayes"
                                                   : "multinomial-logistic";
}

using Matrix = std::vector<std::vector<double>>;

class GaussianNaiveBayes {
 public:
  static constexpr double kVarianceFloor = 1e-9;

  void fit(const Matrix& x, std::span<const int> y) {
    classes_ = std::set<int>(y.begin(), y.end());
    const std::size_t d = x.front().size();
    means_.clear();
    vars_.clear();
    log_prior_.clear();
    double max_var = 0.0;
    for (int c : classes_) {
      std::vector<double> mean(d, 0.0), var(d, 0.0);
      std::size_t count = 0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (y[i] != c) continue;
        ++count;
        for (std::size_t r = 0; r < d; ++r) mean[r] += x[i][r];
      }
      for (auto& m : mean) m /= static_cast<double>(count);
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (y[i] != c) continue;
        for (std::size_t r = 0; r < d; ++r) {
          const double dv = x[i][r] - mean[r];
          var[r] += dv * dv;
        }
      }
      for (auto& v : var) {
        v /= static_cast<double>(count);
        max_var = std::max(max_var, v);
      }
      means_.push_back(std::move(mean));
      vars_.push_back(std::move(var));
      log_prior_.push_back(std::log(static_cast<double>(count) / static_cast<double>(x.size())));
    }
    const double smoothing = kVarianceFloor * max_var;
    for (auto& var : vars_)
      for (auto& v : var) v = std::max(v + smoothing, kVarianceFloor);
  }

  int predict(std::span<const double> x) const {
    int best_label = 0;
    double best = -std::numeric_limits<double>::infinity();
    std::size_t c = 0;
    for (int label : classes_) {
      double ll = log_prior_[c];
      for (std::size_t r = 0; r < x.size(); ++r) {
        const double dv = x[r] - means_[c][r];
        ll -= 0.5 * (std::log(2.0 * M_PI * vars_[c][r]) + dv * dv / vars_[c][r]);
      }
      if (ll > best) {
        best = ll;
        best_label = label;
      }
      ++c;
    }
    return best_label;
  }

 private:
  std::set<int> classes_;
  Matrix means_;
  Matrix vars_;
  std::vector<double> log_prior_;
};

/// Softmax regression on standardized features, full-batch gradient descent.
class MultinomialLogistic {
 public:
  int iterations = 200;
  double learning_rate = 0.5;
  double l2 = 1e-4;

  void fit(const Matrix& x, std::span<const int> y) {
    const std::set<int> unique(y.begin(), y.end());
    classes_.assign(unique.begin(), unique.end());
    const std::size_t n = x.size(), d = x.front().size(), k = classes_.size();
    mean_.assign(d, 0.0);
    scale_.assign(d, 1.0);
    for (const auto& r : x)
      for (std::size_t j = 0; j < d; ++j) mean_[j] += r[j];
    for (auto& m : mean_) m /= static_cast<double>(n);
    std::vector<double> var(d, 0.0);
    for (const auto& r : x)
      for (std::size_t j = 0; j < d; ++j) var[j] += (r[j] - mean_[j]) * (r[j] - mean_[j]);
    for (std::size_t j = 0; j < d; ++j) {
      const double sd = std::sqrt(var[j] / static_cast<double>(n));
      scale_[j] = sd > 1e-12 ? 1.0 / sd : 0.0;
    }
    Matrix z(n, std::vector<double>(d));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) z[i][j] = (x[i][j] - mean_[j]) * scale_[j];
    std::vector<std::size_t> target(n);
    for (std::size_t i = 0; i < n; ++i) {
      target[i] = static_cast<std::size_t>(
          std::lower_bound(classes_.begin(), classes_.end(), y[i]) - classes_.begin());
    }

    weights_.assign(k, std::vector<double>(d, 0.0));
    bias_.assign(k, 0.0);
    Matrix grad(k, std::vector<double>(d));
    std::vector<double> gbias(k), prob(k);
    for (int it = 0; it < iterations; ++it) {
      for (auto& g : grad) std::fill(g.begin(), g.end(), 0.0);
      std::fill(gbias.begin(), gbias.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        softmax(z[i], prob);
        for (std::size_t c = 0; c < k; ++c) {
          const double e = (prob[c] - (target[i] == c ? 1.0 : 0.0)) / static_cast<double>(n);
          gbias[c] += e;
          for (std::size_t j = 0; j < d; ++j) grad[c][j] += e * z[i][j];
        }
      }
      for (std::size_t c = 0; c < k; ++c) {
        bias_[c] -= learning_rate * gbias[c];
        for (std::size_t j = 0; j < d; ++j) {
          weights_[c][j] -= learning_rate * (grad[c][j] + l2 * weights_[c][j]);
        }
      }
    }
  }

  int predict(std::span<const double> x) const {
    std::vector<double> z(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) z[j] = (x[j] - mean_[j]) * scale_[j];
    std::vector<double> prob(classes_.size());
    softmax(z, prob);
    return classes_[static_cast<std::size_t>(std::max_element(prob.begin(), prob.end()) - prob.begin())];
  }

 private:
  void softmax(std::span<const double> z, std::vector<double>& prob) const {
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < classes_.size(); ++c) {
      double s = bias_[c];
      for (std::size_t j = 0; j < z.size(); ++j) s += weights_[c][j] * z[j];
      prob[c] = s;
      top = std::max(top, s);
    }
    double total = 0.0;
    for (auto& p : prob) {
      p = std::exp(p - top);
      total += p;
    }
    for (auto& p : prob) p /= total;
  }

  std::vector<int> classes_;
  std::vector<double> mean_;
  std::vector<double> scale_;
  Matrix weights_;
  std::vector<double> bias_;
};

inline std::vector<int> fit_predict(ClassifierKind kind, const Matrix& train_x,
                                    std::span<const int> train_y, const Matrix& test_x) {
  std::vector<int> out;
  if (kind == ClassifierKind::gaussian_naive_bayes) {
    GaussianNaiveBayes model;
    model.fit(train_x, train_y);
    for (const auto& r : test_x) out.push_back(model.predict(r));
  } else {
    MultinomialLogistic model;
    model.fit(train_x, train_y);
    for (const auto& r : test_x) out.push_back(model.predict(r));
  }
  return out;
}

struct HarnessOptions {
  std::vector<double> test_fractions = default_fractions();
  int repetitions = 100;
  std::uint64_t seed = 0;
  int max_resamples = 20;

  static std::vector<double> default_fractions() {
    std::vector<double> f;
    for (int i = 1; i <= 12; ++i) f.push_back(0.04 * i);
    return f;
  }
};

struct FractionAccuracy {
  double test_fraction = 0.0;
  std::size_t test_size = 0;
  double mean_accuracy = 0.0;
  int repetitions_used = 0;
  int skipped = 0;
};

/// Random train/test splits at each test fraction; mean test accuracy of the
/// chosen classifier per fraction. Splits that leave a class out of the
/// training part are redrawn up to `max_resamples` times, then skipped.
inline std::vector<FractionAccuracy> classification_harness(const FeatureSet& features,
                                                            std::span<const int> labels,
                                                            ClassifierKind kind,
                                                            const HarnessOptions& opts = {}) {
  const std::size_t n = features.size();
  if (labels.size() != n) throw Error("classification_harness: labels do not match features");
  if (n < 2) throw Error("classification_harness: need at least two samples");
  if (opts.repetitions < 1) throw Error("classification_harness: repetitions must be >= 1");
  const std::set<int> all_classes(labels.begin(), labels.end());

  std::vector<FractionAccuracy> results;
  for (double fraction : opts.test_fractions) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw Error("test fraction must lie in (0, 1)");
    FractionAccuracy fa;
    fa.test_fraction = fraction;
    fa.test_size = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))), 1, n - 1);
    double sum = 0.0;
    for (int rep = 0; rep < opts.repetitions; ++rep) {
      std::vector<std::size_t> order(n);
      bool ok = false;
      for (int attempt = 0; attempt <= opts.max_resamples && !ok; ++attempt) {
        std::iota(order.begin(), order.end(), 0);
        std::mt19937_64 rng(opts.seed + static_cast<std::uint64_t>(rep) +
                            7919ULL * static_cast<std::uint64_t>(attempt));
        std::shuffle(order.begin(), order.end(), rng);
        std::set<int> seen;
        for (std::size_t i = fa.test_size; i < n; ++i) seen.insert(labels[order[i]]);
        ok = seen == all_classes;
      }
      if (!ok) {
        ++fa.skipped;
        continue;
      }
      Matrix train_x, test_x;
      std::vector<int> train_y, test_y;
      for (std::size_t i = 0; i < n; ++i) {
        if (i < fa.test_size) {
          test_x.push_back(features.rows[order[i]]);
          test_y.push_back(labels[order[i]]);
        } else {
          train_x.push_back(features.rows[order[i]]);
          train_y.push_back(labels[order[i]]);
        }
      }
      const auto predicted = fit_predict(kind, train_x, train_y, test_x);
      std::size_t correct = 0;
      for (std::size_t i = 0; i < test_y.size(); ++i) correct += predicted[i] == test_y[i];
      sum += static_cast<double>(correct) / static_cast<double>(test_y.size());
      ++fa.repetitions_used;
    }
    if (fa.skipped > 0) {
      warn("classification_harness: " + std::to_string(fa.skipped) +
           " repetitions skipped at test fraction " + text::format_double(fraction));
    }
    fa.mean_accuracy = fa.repetitions_used > 0 ? sum / fa.repetitions_used
                                               : std::numeric_limits<double>::quiet_NaN();
    results.push_back(fa);
  }
  return results;
}

// ---------------------------------------------------------------------------
// Cluster characterization

struct CoordinateRank {
  std::size_t coordinate = 0;  // position in the direct vector
  int segment = 1;             // 1-based
  VegIndex index = VegIndex::ARI1;
  int band = 1;
  double deviation = 0.0;  // mean squared deviation from the centroid
  double centroid = 0.0;

  std::string name() const {
    return std::string(band_name(band)) + " " + std::string(index_name(index));
  }
};

/// Ranks direct-vector coordinates of a cluster by ascending mean squared
/// deviation from the cluster centroid (ties keep coordinate order) and names
/// each by the members' majority band.
inline std::vector<CoordinateRank> characterize_cluster(std::span<const int> members,
                                                        const FeatureSet& direct,
                                                        const BandTable& table,
                                                        std::size_t top_n) {
  if (members.empty()) throw Error("characterize_cluster: empty cluster");
  std::map<int, std::size_t> row_of;
  for (std::size_t i = 0; i < direct.tree_ids.size(); ++i) row_of[direct.tree_ids[i]] = i;
  const std::size_t dim = direct.dimension();
  const int S = table.segment_count();
  if (dim != static_cast<std::size_t>(S) * kIndexCount) {
    throw Error("characterize_cluster: direct vectors do not match the band table layout");
  }

  std::vector<double> centroid(dim, 0.0), dev(dim, 0.0);
  std::vector<const std::vector<double>*> rows;
  for (int id : members) {
    auto it = row_of.find(id);
    if (it == row_of.end()) throw Error("characterize_cluster: unknown tree " + std::to_string(id));
    rows.push_back(&direct.rows[it->second]);
  }
  for (const auto* r : rows)
    for (std::size_t c = 0; c < dim; ++c) centroid[c] += (*r)[c];
  for (auto& c : centroid) c /= static_cast<double>(rows.size());
  for (const auto* r : rows)
    for (std::size_t c = 0; c < dim; ++c) dev[c] += ((*r)[c] - centroid[c]) * ((*r)[c] - centroid[c]);
  for (auto& d : dev) d /= static_cast<double>(rows.size());

  std::vector<std::size_t> order(dim);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dev[a] < dev[b]; });

  std::vector<CoordinateRank> out;
  for (std::size_t r = 0; r < std::min(top_n, dim); ++r) {
    const std::size_t c = order[r];
    CoordinateRank cr;
    cr.coordinate = c;
    cr.segment = static_cast<int>(c / kIndexCount) + 1;
    cr.index = index_at(c % kIndexCount);
    cr.deviation = dev[c];
    cr.centroid = centroid[c];
    std::array<std::size_t, kBandsPerIndex> votes{};
    for (int id : members) {
      if (!table.has_tree(id)) continue;
      const auto& cell = table.cell(table.row_of(id), cr.segment - 1, c % kIndexCount);
      if (cell.valid()) ++votes[static_cast<std::size_t>(cell.band() - 1)];
    }
    const auto top = std::max_element(votes.begin(), votes.end());
    cr.band = *top > 0 ? static_cast<int>(top - votes.begin()) + 1
                       : assign_band(centroid[c], table.banding(c % kIndexCount).thresholds);
    out.push_back(cr);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Nearest vegetation-index bands

struct Neighbor {
  Token token;
  double score = 0.0;  // distance (embedding) or Jaccard similarity (direct)
};

enum class EmbeddingMetric { euclidean, cosine };

inline std::vector<Neighbor> nearest_bands_embedding(const EmbeddingModel& model, Token token,
                                                     std::size_t n,
                                                     EmbeddingMetric metric = EmbeddingMetric::euclidean) {
  const auto V = model.architecture().vocabulary;
  const auto q = model.embedding(token.id);
  std::vector<Neighbor> all;
  for (std::size_t t = 0; t < V; ++t) {
    if (t == token.id) continue;
    const auto e = model.embedding(t);
    double score;
    if (metric == EmbeddingMetric::euclidean) {
      score = std::sqrt(detail::squared_distance(q, e));
    } else {
      double dot = 0.0, nq = 0.0, ne = 0.0;
      for (std::size_t r = 0; r < q.size(); ++r) {
        dot += q[r] * e[r];
        nq += q[r] * q[r];
        ne += e[r] * e[r];
      }
      score = (nq > 0.0 && ne > 0.0) ? 1.0 - dot / std::sqrt(nq * ne) : 1.0;
    }
    all.push_back({Token{t}, score});
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const Neighbor& a, const Neighbor& b) { return a.score < b.score; });
  all.resize(std::min(n, all.size()));
  return all;
}

inline std::vector<Neighbor> nearest_bands_direct(const CooccurrenceTable& contexts, Token token,
                                                  std::size_t n) {
  if (token.id >= contexts.vocabulary()) throw Error("nearest_bands_direct: token out of range");
  std::vector<Neighbor> all;
  for (std::size_t t = 0; t < contexts.vocabulary(); ++t) {
    if (t == token.id) continue;
    all.push_back({Token{t}, contexts.jaccard(token.id, t)});
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const Neighbor& a, const Neighbor& b) { return a.score > b.score; });
  all.resize(std::min(n, all.size()));
  return all;
}

}  // namespace canopy
