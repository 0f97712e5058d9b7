#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "canopy/banding.hpp"
#include "canopy/error.hpp"

namespace canopy {

// ---------------------------------------------------------------------------
// Co-occurrence targets

/// |a ∩ b| / |a ∪ b| over sorted context-id sets; 0 when both are empty.
inline double jaccard_similarity(std::span<const std::uint32_t> a,
                                 std::span<const std::uint32_t> b) {
  std::size_t i = 0, j = 0, inter = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) {
      ++inter;
      ++i;
      ++j;
    } else if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  const std::size_t uni = a.size() + b.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// For every token, the contexts it appears in, and the symmetric Jaccard
/// matrix between tokens.
class CooccurrenceTable {
 public:
  CooccurrenceTable() = default;

  /// `sets[t]` lists the context ids of token t; ids must be < `contexts`.
  CooccurrenceTable(std::vector<std::vector<std::uint32_t>> sets, std::size_t contexts)
      : sets_(std::move(sets)), contexts_(contexts) {
    const std::size_t v = sets_.size();
    for (auto& s : sets_) {
      std::sort(s.begin(), s.end());
      s.erase(std::unique(s.begin(), s.end()), s.end());
      if (!s.empty() && s.back() >= contexts_) throw Error("context id out of range");
    }
    jaccard_.assign(v * v, 0.0);
    for (std::size_t i = 0; i < v; ++i) {
      for (std::size_t j = i; j < v; ++j) {
        const double sim = jaccard_similarity(sets_[i], sets_[j]);
        jaccard_[i * v + j] = sim;
        jaccard_[j * v + i] = sim;
      }
    }
  }

  std::size_t vocabulary() const { return sets_.size(); }
  std::size_t contexts() const { return contexts_; }
  std::span<const std::uint32_t> contexts_of(std::size_t token) const { return sets_.at(token); }
  double jaccard(std::size_t i, std::size_t j) const {
    if (i >= vocabulary() || j >= vocabulary()) throw Error("token out of range");
    return jaccard_[i * vocabulary() + j];
  }

 private:
  std::vector<std::vector<std::uint32_t>> sets_;
  std::size_t contexts_ = 0;
  std::vector<double> jaccard_;
};

/// Token (j, b) occurs in context (tree, segment) iff that cell carries band
/// b; screened or missing cells contribute nothing.
inline CooccurrenceTable band_contexts(const BandTable& table) {
  if (table.tree_count() == 0) throw Error("band_contexts: empty band table");
  std::vector<std::vector<std::uint32_t>> sets(kVocabularySize);
  for (std::size_t row = 0; row < table.tree_count(); ++row) {
    for (int s = 0; s < table.segment_count(); ++s) {
      const auto ctx = static_cast<std::uint32_t>(table.context_of(row, s));
      for (std::size_t j = 0; j < kIndexCount; ++j) {
        const auto& cell = table.cell(row, s, j);
        if (cell.valid()) sets[Token::of(index_at(j), cell.band()).id].push_back(ctx);
      }
    }
  }
  return CooccurrenceTable(std::move(sets), table.context_count());
}

// ---------------------------------------------------------------------------
// Model

struct Architecture {
  std::size_t vocabulary = kVocabularySize;
  std::size_t embedding_dim = 64;
  std::size_t hidden = 600;
  double leaky_slope = 0.01;
  bool bias = false;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

struct TrainConfig {
  int epochs = 2000;
  double learning_rate = 1e-3;
  double dropout = 0.2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double init_scale = 0.05;
  std::uint64_t seed = 0;
};

/// Pair-input network: embedding lookup of two tokens, concatenation, one
/// leaky-ReLU hidden layer, linear scalar output. All parameters live in one
/// flat buffer:
///   E   vocabulary x dim     (token-major: one contiguous column per token)
///   W_h (2 dim) x hidden     (row-major; rows [0, dim) see token i, [dim, 2 dim) token j)
///   w_o hidden
///   b_h hidden, b_o 1        (only when architecture().bias)
class EmbeddingModel {
 public:
  EmbeddingModel() = default;

  explicit EmbeddingModel(const Architecture& arch) : arch_(arch) {
    if (arch.vocabulary < 2 || arch.embedding_dim == 0 || arch.hidden == 0) {
      throw Error("EmbeddingModel: degenerate architecture");
    }
    params_.assign(parameter_count(arch), 0.0);
  }

  static std::size_t parameter_count(const Architecture& a) {
    return a.vocabulary * a.embedding_dim + 2 * a.embedding_dim * a.hidden + a.hidden +
           (a.bias ? a.hidden + 1 : 0);
  }

  /// Weights drawn uniformly from [-scale, scale].
  static EmbeddingModel random(const Architecture& arch, double scale, std::uint64_t seed) {
    EmbeddingModel m(arch);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (auto& p : m.params_) p = dist(rng);
    return m;
  }

  const Architecture& architecture() const { return arch_; }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  std::span<const double> embedding(std::size_t token) const {
    check_token(token);
    return {params_.data() + token * arch_.embedding_dim, arch_.embedding_dim};
  }
  std::span<double> embedding(std::size_t token) {
    check_token(token);
    return {params_.data() + token * arch_.embedding_dim, arch_.embedding_dim};
  }
  std::span<const double> hidden_weights() const {
    return {params_.data() + hidden_offset(), 2 * arch_.embedding_dim * arch_.hidden};
  }
  std::span<double> hidden_weights() {
    return {params_.data() + hidden_offset(), 2 * arch_.embedding_dim * arch_.hidden};
  }
  std::span<const double> output_weights() const {
    return {params_.data() + output_offset(), arch_.hidden};
  }
  std::span<double> output_weights() {
    return {params_.data() + output_offset(), arch_.hidden};
  }
  std::span<const double> hidden_bias() const {
    if (!arch_.bias) return {};
    return {params_.data() + output_offset() + arch_.hidden, arch_.hidden};
  }
  double output_bias() const { return arch_.bias ? params_.back() : 0.0; }

  std::size_t hidden_offset() const { return arch_.vocabulary * arch_.embedding_dim; }
  std::size_t output_offset() const {
    return hidden_offset() + 2 * arch_.embedding_dim * arch_.hidden;
  }

  /// Hidden pre-activations W_h^T [E_i; E_j] (+ b_h).
  std::vector<double> preactivation(std::size_t i, std::size_t j) const {
    const auto d = arch_.embedding_dim, H = arch_.hidden;
    const auto ei = embedding(i), ej = embedding(j);
    const auto w = hidden_weights();
    std::vector<double> z(H, 0.0);
    if (arch_.bias) std::copy(hidden_bias().begin(), hidden_bias().end(), z.begin());
    for (std::size_t r = 0; r < d; ++r) {
      const double* top = w.data() + r * H;
      const double* bot = w.data() + (d + r) * H;
      for (std::size_t k = 0; k < H; ++k) z[k] += ei[r] * top[k] + ej[r] * bot[k];
    }
    return z;
  }

  /// Predicted similarity of the ordered pair (i, j) with dropout disabled.
  double forward(std::size_t i, std::size_t j) const {
    const auto z = preactivation(i, j);
    const auto wo = output_weights();
    double out = output_bias();
    for (std::size_t k = 0; k < z.size(); ++k) out += activate(z[k]) * wo[k];
    return out;
  }

  double activate(double z) const { return z > 0.0 ? z : arch_.leaky_slope * z; }
  double activation_slope(double z) const { return z > 0.0 ? 1.0 : arch_.leaky_slope; }

  friend bool operator==(const EmbeddingModel&, const EmbeddingModel&) = default;

 private:
  void check_token(std::size_t token) const {
    if (token >= arch_.vocabulary) {
      throw Error("token " + std::to_string(token) + " outside vocabulary of " +
                  std::to_string(arch_.vocabulary));
    }
  }

  Architecture arch_;
  std::vector<double> params_;
};

/// One regression example: ordered token pair and its target similarity.
struct PairTarget {
  std::uint32_t i = 0;
  std::uint32_t j = 0;
  double target = 0.0;
};

/// All strict upper-triangular pairs (i < j) with their Jaccard targets.
inline std::vector<PairTarget> training_pairs(const CooccurrenceTable& table) {
  std::vector<PairTarget> pairs;
  const auto v = table.vocabulary();
  pairs.reserve(v * (v - 1) / 2);
  for (std::size_t i = 0; i < v; ++i)
    for (std::size_t j = i + 1; j < v; ++j)
      pairs.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j),
                       table.jaccard(i, j)});
  return pairs;
}

/// Inverted-dropout mask source: each hidden unit is kept with probability
/// 1 - rate and scaled by 1 / (1 - rate).
class DropoutMasks {
 public:
  DropoutMasks(double rate, std::uint64_t seed) : rng_(seed) {
    if (rate < 0.0 || rate >= 1.0) throw Error("dropout rate must be in [0, 1)");
    keep_scale_ = 1.0 / (1.0 - rate);
    threshold_ = static_cast<std::uint64_t>(std::llround((1.0 - rate) * 4294967296.0));
  }

  void fill(std::span<double> mask) {
    for (std::size_t k = 0; k < mask.size(); k += 2) {
      const std::uint64_t bits = rng_();
      mask[k] = (bits & 0xffffffffu) < threshold_ ? keep_scale_ : 0.0;
      if (k + 1 < mask.size()) mask[k + 1] = (bits >> 32) < threshold_ ? keep_scale_ : 0.0;
    }
  }

 private:
  std::mt19937_64 rng_;
  double keep_scale_ = 1.0;
  std::uint64_t threshold_ = 0;
};

/// scale * Σ (forward(i, j) - target)^2 over `pairs`. When `gradient` is
/// non-empty it receives the gradient w.r.t. every parameter (overwritten).
/// With `dropout` set, hidden activations are masked per pair.
///
/// The hidden pre-activation of a pair splits as A[i] + B[j] with
/// A[t] = W_top^T E_t and B[t] = W_bot^T E_t, so both the forward pass and
/// the weight gradients are computed per token rather than per pair.
inline double pair_objective(const EmbeddingModel& model, std::span<const PairTarget> pairs,
                             double scale, std::span<double> gradient = {},
                             DropoutMasks* dropout = nullptr) {
  const auto& arch = model.architecture();
  const std::size_t V = arch.vocabulary, d = arch.embedding_dim, H = arch.hidden;
  const auto W = model.hidden_weights();
  const auto wo = model.output_weights();
  const auto bh = model.hidden_bias();
  const double bo = model.output_bias();
  const bool want_grad = !gradient.empty();
  if (want_grad && gradient.size() != model.parameters().size()) {
    throw Error("pair_objective: gradient buffer has wrong size");
  }

  std::vector<double> A(V * H, 0.0), B(V * H, 0.0);
  for (std::size_t t = 0; t < V; ++t) {
    const auto e = model.embedding(t);
    double* a = A.data() + t * H;
    double* b = B.data() + t * H;
    for (std::size_t r = 0; r < d; ++r) {
      const double* top = W.data() + r * H;
      const double* bot = W.data() + (d + r) * H;
      const double er = e[r];
      for (std::size_t k = 0; k < H; ++k) {
        a[k] += er * top[k];
        b[k] += er * bot[k];
      }
    }
  }

  std::vector<double> GA, GB, g_wo, g_bh;
  double g_bo = 0.0;
  if (want_grad) {
    GA.assign(V * H, 0.0);
    GB.assign(V * H, 0.0);
    g_wo.assign(H, 0.0);
    g_bh.assign(H, 0.0);
  }
  std::vector<double> z(H), h(H), mask(H, 1.0);
  double loss = 0.0;

  for (const auto& pair : pairs) {
    if (pair.i >= V || pair.j >= V) throw Error("pair_objective: token out of range");
    const double* a = A.data() + pair.i * H;
    const double* b = B.data() + pair.j * H;
    if (dropout) dropout->fill(mask);
    double out = bo;
    for (std::size_t k = 0; k < H; ++k) {
      z[k] = a[k] + b[k] + (bh.empty() ? 0.0 : bh[k]);
      h[k] = model.activate(z[k]) * mask[k];
      out += h[k] * wo[k];
    }
    const double residual = out - pair.target;
    loss += residual * residual;
    if (!want_grad) continue;
    const double c = 2.0 * scale * residual;
    double* ga = GA.data() + pair.i * H;
    double* gb = GB.data() + pair.j * H;
    for (std::size_t k = 0; k < H; ++k) {
      g_wo[k] += c * h[k];
      const double dz = c * wo[k] * mask[k] * model.activation_slope(z[k]);
      ga[k] += dz;
      gb[k] += dz;
      g_bh[k] += dz;
    }
    g_bo += c;
  }

  if (want_grad) {
    std::fill(gradient.begin(), gradient.end(), 0.0);
    double* gW = gradient.data() + model.hidden_offset();
    for (std::size_t t = 0; t < V; ++t) {
      const auto e = model.embedding(t);
      const double* ga = GA.data() + t * H;
      const double* gb = GB.data() + t * H;
      double* gE = gradient.data() + t * d;
      for (std::size_t r = 0; r < d; ++r) {
        const double* top = W.data() + r * H;
        const double* bot = W.data() + (d + r) * H;
        double* gtop = gW + r * H;
        double* gbot = gW + (d + r) * H;
        const double er = e[r];
        double acc = 0.0;
        for (std::size_t k = 0; k < H; ++k) {
          gtop[k] += er * ga[k];
          gbot[k] += er * gb[k];
          acc += top[k] * ga[k] + bot[k] * gb[k];
        }
        gE[r] = acc;
      }
    }
    std::copy(g_wo.begin(), g_wo.end(), gradient.begin() + static_cast<long>(model.output_offset()));
    if (arch.bias) {
      std::copy(g_bh.begin(), g_bh.end(),
                gradient.begin() + static_cast<long>(model.output_offset() + H));
      gradient.back() = g_bo;
    }
  }
  return scale * loss;
}

/// Mean squared error between forward(i, j) and J(i, j) over all i < j,
/// dropout disabled.
inline double final_loss(const EmbeddingModel& model, const CooccurrenceTable& table) {
  if (table.vocabulary() != model.architecture().vocabulary) {
    throw Error("final_loss: table vocabulary does not match model");
  }
  const auto pairs = training_pairs(table);
  return pair_objective(model, pairs, 1.0 / static_cast<double>(pairs.size()));
}

struct TrainResult {
  EmbeddingModel model;
  double initial_loss = 0.0;
  std::vector<double> loss_history;  // FinalLoss after each epoch
};

/// Full-batch Adam on FinalLoss. Dropout masks come from `cfg.seed`, so a
/// run is bit-reproducible for a fixed seed.
inline TrainResult train(EmbeddingModel model, const CooccurrenceTable& table,
                         const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw Error("train: epochs must be >= 1");
  if (table.vocabulary() != model.architecture().vocabulary) {
    throw Error("train: table vocabulary does not match model");
  }
  const auto pairs = training_pairs(table);
  const double scale = 1.0 / static_cast<double>(pairs.size());
  const std::size_t n = model.parameters().size();
  std::vector<double> grad(n), m(n, 0.0), v(n, 0.0);
  DropoutMasks masks(cfg.dropout, cfg.seed);
  DropoutMasks* dropout = cfg.dropout > 0.0 ? &masks : nullptr;

  TrainResult result;
  result.initial_loss = pair_objective(model, pairs, scale);
  result.loss_history.reserve(static_cast<std::size_t>(cfg.epochs));
  double b1t = 1.0, b2t = 1.0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double train_loss = pair_objective(model, pairs, scale, grad, dropout);
    if (!std::isfinite(train_loss)) {
      throw Error("train: loss diverged (non-finite) at epoch " + std::to_string(epoch));
    }
    b1t *= cfg.beta1;
    b2t *= cfg.beta2;
    auto params = model.parameters();
    for (std::size_t p = 0; p < n; ++p) {
      m[p] = cfg.beta1 * m[p] + (1.0 - cfg.beta1) * grad[p];
      v[p] = cfg.beta2 * v[p] + (1.0 - cfg.beta2) * grad[p] * grad[p];
      const double m_hat = m[p] / (1.0 - b1t);
      const double v_hat = v[p] / (1.0 - b2t);
      params[p] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
    const double eval = pair_objective(model, pairs, scale);
    if (!std::isfinite(eval)) {
      throw Error("train: loss diverged (non-finite) at epoch " + std::to_string(epoch));
    }
    result.loss_history.push_back(eval);
  }
  result.model = std::move(model);
  return result;
}

/// Random initialization plus training, both driven by `cfg.seed`.
inline TrainResult train_new(const Architecture& arch, const CooccurrenceTable& table,
                             const TrainConfig& cfg) {
  auto model = EmbeddingModel::random(arch, cfg.init_scale, cfg.seed);
  TrainConfig dropout_cfg = cfg;
  dropout_cfg.seed = cfg.seed ^ 0x9e3779b97f4a7c15ULL;
  return train(std::move(model), table, dropout_cfg);
}

struct GradientCheck {
  double max_relative_error = 0.0;
  std::size_t worst_parameter = 0;
  std::vector<double> analytic;
};

/// Compares the analytic gradient of (forward(i, j) - target)^2 with central
/// finite differences for every parameter. Relative error uses
/// max(|analytic|, |numeric|, 1e-6) as denominator.
inline GradientCheck gradient_check(const EmbeddingModel& model, std::size_t i, std::size_t j,
                                    double target, double step = 1e-5) {
  const PairTarget pair{static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), target};
  const std::span<const PairTarget> pairs(&pair, 1);
  GradientCheck result;
  result.analytic.assign(model.parameters().size(), 0.0);
  pair_objective(model, pairs, 1.0, result.analytic);
  EmbeddingModel probe = model;
  auto params = probe.parameters();
  for (std::size_t p = 0; p < params.size(); ++p) {
    const double original = params[p];
    params[p] = original + step;
    const double up = pair_objective(probe, pairs, 1.0);
    params[p] = original - step;
    const double down = pair_objective(probe, pairs, 1.0);
    params[p] = original;
    const double numeric = (up - down) / (2.0 * step);
    const double a = result.analytic[p];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
    const double rel = std::abs(a - numeric) / denom;
    if (rel > result.max_relative_error) {
      result.max_relative_error = rel;
      result.worst_parameter = p;
    }
  }
  return result;
}

}  // namespace canopy
