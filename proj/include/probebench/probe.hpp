#pragma once

// Linear probing under repeated random train/test splits.
//
// One scalar linear regressor per (embedding, task, split), trained with
// minibatch AdamW on MSE over standardized inputs, then scored by R^2 on the
// held-out rows. All randomness derives from (base_seed + split index), so a
// run is reproducible bit for bit and splits can be trained concurrently.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "probebench/detail/parallel.hpp"
#include "probebench/detail/text.hpp"
#include "probebench/error.hpp"
#include "probebench/metrics.hpp"
#include "probebench/rng.hpp"

namespace probebench {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline constexpr double kScaleFloor = 1e-8;

// Philox stream ids; the seed selects the split, the stream the purpose.
inline constexpr std::uint64_t kSplitStream = 0;
inline constexpr std::uint64_t kBatchStream = 1;

struct ProbeConfig {
  double learning_rate = 1e-3;
  int epochs = 20;
  int batch_size = 64;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adaptive_eps = 1e-8;
  double train_fraction = 0.8;
  bool standardize_features = true;
  bool standardize_target = true;
  std::uint64_t base_seed = 0;

  void validate() const {
    if (!(learning_rate > 0.0)) throw InvariantError("probe config: learning_rate must be > 0");
    if (epochs < 1) throw InvariantError("probe config: epochs must be >= 1");
    if (batch_size < 1) throw InvariantError("probe config: batch_size must be >= 1");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
      throw InvariantError("probe config: train_fraction must be in (0, 1)");
    if (weight_decay < 0.0) throw InvariantError("probe config: weight_decay must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
      throw InvariantError("probe config: beta1/beta2 must be in [0, 1)");
    if (!(adaptive_eps > 0.0)) throw InvariantError("probe config: adaptive_eps must be > 0");
  }
};

// ---------------------------------------------------------------------------
// Split plans

struct Split {
  std::vector<std::size_t> train;  // ascending
  std::vector<std::size_t> test;   // ascending
};

struct SplitPlan {
  std::size_t n = 0;
  double train_fraction = 0.0;
  std::uint64_t base_seed = 0;
  std::vector<Split> splits;

  std::size_t k() const { return splits.size(); }

  std::string fingerprint() const {
    std::uint64_t h = detail::fnv1a("splitplan");
    for (const auto& s : splits) {
      for (auto i : s.train) h = detail::fnv1a(std::to_string(i) + ",", h);
      h = detail::fnv1a("|", h);
      for (auto i : s.test) h = detail::fnv1a(std::to_string(i) + ",", h);
      h = detail::fnv1a(";", h);
    }
    return detail::hex64(h);
  }
};

inline std::size_t train_size(std::size_t n, double train_fraction) {
  return static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
}

// Split k is a Fisher-Yates shuffle of 0..n-1 driven by Philox(base_seed + k);
// the first round(train_fraction * n) positions train, the rest test.
inline SplitPlan make_splits(std::size_t n, std::size_t k, double train_fraction, std::uint64_t base_seed) {
  if (n < 2) throw InvariantError("make_splits: need n >= 2 samples");
  if (k < 1) throw InvariantError("make_splits: need K >= 1");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw InvariantError("make_splits: train_fraction must be in (0, 1)");
  const auto n_train = train_size(n, train_fraction);
  if (n_train < 1 || n_train >= n)
    throw InvariantError("make_splits: n=" + std::to_string(n) + " with train_fraction " +
                         detail::fmt_sig9(train_fraction) + " leaves an empty train or test set");

  SplitPlan plan{n, train_fraction, base_seed, {}};
  plan.splits.reserve(k);
  for (std::size_t s = 0; s < k; ++s) {
    Philox rng(base_seed + s, kSplitStream);
    const auto perm = random_permutation(n, rng);
    Split split;
    split.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    plan.splits.push_back(std::move(split));
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Standardization

struct Standardization {
  Vector feature_mean;
  Vector feature_scale;
  double target_mean = 0.0;
  double target_scale = 1.0;

  static Standardization identity(Eigen::Index dim) {
    return {Vector::Zero(dim), Vector::Ones(dim), 0.0, 1.0};
  }
};

namespace detail {

// Population mean and standard deviation, the std floored at kScaleFloor.
// A constant column gets its exact value as mean so it standardizes to zeros.
template <typename Vec>
std::pair<double, double> column_stats(const Vec& col) {
  const auto n = static_cast<double>(col.size());
  const double first = col(0);
  bool constant = true;
  double mean = 0.0;
  for (Eigen::Index i = 0; i < col.size(); ++i) {
    mean += col(i);
    constant = constant && col(i) == first;
  }
  if (constant) return {first, kScaleFloor};
  mean /= n;
  double ss = 0.0;
  for (Eigen::Index i = 0; i < col.size(); ++i) ss += (col(i) - mean) * (col(i) - mean);
  return {mean, std::max(std::sqrt(ss / n), kScaleFloor)};
}

}  // namespace detail

inline Standardization fit_standardizer(const Matrix& x_train, const Vector& y_train, bool features = true,
                                        bool target = true) {
  if (x_train.rows() != y_train.size()) throw InvariantError("fit_standardizer: row count mismatch");
  if (x_train.rows() < 2) throw InvariantError("fit_standardizer: need at least 2 training rows");
  auto st = Standardization::identity(x_train.cols());
  if (features)
    for (Eigen::Index j = 0; j < x_train.cols(); ++j)
      std::tie(st.feature_mean(j), st.feature_scale(j)) = detail::column_stats(x_train.col(j));
  if (target) std::tie(st.target_mean, st.target_scale) = detail::column_stats(y_train);
  return st;
}

inline Matrix standardize_features(const Matrix& x, const Standardization& st) {
  return ((x.rowwise() - st.feature_mean.transpose()).array().rowwise() / st.feature_scale.transpose().array())
      .matrix();
}

// ---------------------------------------------------------------------------
// Model, training, prediction

struct LinearModel {
  Vector weights;  // in standardized feature space
  double bias = 0.0;
  Standardization stats;

  Eigen::Index dim() const { return weights.size(); }
};

inline Vector predict(const LinearModel& model, const Matrix& x) {
  if (x.cols() != model.dim())
    throw InvariantError("predict: input has " + std::to_string(x.cols()) + " columns, model expects " +
                         std::to_string(model.dim()));
  const Vector z = (standardize_features(x, model.stats) * model.weights).array() + model.bias;
  return (z.array() * model.stats.target_scale + model.stats.target_mean).matrix();
}

// Minibatch AdamW on the mean squared error. Weights start at zero. Each
// epoch visits the training rows in a fresh seeded order; the last partial
// batch is kept. Weight decay is decoupled and applied to weights only.
inline LinearModel train_linear_probe(const Matrix& x_train, const Vector& y_train, const ProbeConfig& cfg,
                                      std::uint64_t seed) {
  cfg.validate();
  const auto n = x_train.rows();
  const auto d = x_train.cols();
  if (y_train.size() != n) throw InvariantError("train_linear_probe: row count mismatch");
  if (n < 1) throw InvariantError("train_linear_probe: no training rows");
  if (!x_train.allFinite() || !y_train.allFinite()) throw InvariantError("train_linear_probe: non-finite input");

  LinearModel model;
  model.stats = (cfg.standardize_features || cfg.standardize_target)
                    ? fit_standardizer(x_train, y_train, cfg.standardize_features, cfg.standardize_target)
                    : Standardization::identity(d);
  const Matrix xs = standardize_features(x_train, model.stats);
  const Vector ys = ((y_train.array() - model.stats.target_mean) / model.stats.target_scale).matrix();

  Vector& w = model.weights = Vector::Zero(d);
  double& b = model.bias;
  Vector m_w = Vector::Zero(d), v_w = Vector::Zero(d), g_w(d);
  double m_b = 0.0, v_b = 0.0;

  Philox rng(seed, kBatchStream);
  const auto batch = static_cast<Eigen::Index>(cfg.batch_size);
  double beta1_t = 1.0, beta2_t = 1.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = random_permutation(static_cast<std::size_t>(n), rng);
    for (Eigen::Index start = 0, batch_idx = 0; start < n; start += batch, ++batch_idx) {
      const Eigen::Index stop = std::min(n, start + batch);
      const auto size = static_cast<double>(stop - start);

      g_w.setZero();
      double g_b = 0.0, loss = 0.0;
      for (Eigen::Index p = start; p < stop; ++p) {
        const auto i = static_cast<Eigen::Index>(order[static_cast<std::size_t>(p)]);
        const double r = xs.row(i).dot(w) + b - ys(i);
        loss += r * r;
        g_w.noalias() += r * xs.row(i).transpose();
        g_b += r;
      }
      loss /= size;
      if (!std::isfinite(loss))
        throw UndefinedScore("train_linear_probe: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch_idx));
      g_w *= 2.0 / size;
      g_b *= 2.0 / size;

      beta1_t *= cfg.beta1;
      beta2_t *= cfg.beta2;
      const double c1 = 1.0 - beta1_t;
      const double c2 = 1.0 - beta2_t;

      w *= 1.0 - cfg.learning_rate * cfg.weight_decay;
      m_w = cfg.beta1 * m_w + (1.0 - cfg.beta1) * g_w;
      v_w = cfg.beta2 * v_w + (1.0 - cfg.beta2) * g_w.cwiseAbs2();
      w.array() -= cfg.learning_rate * (m_w.array() / c1) / ((v_w.array() / c2).sqrt() + cfg.adaptive_eps);

      m_b = cfg.beta1 * m_b + (1.0 - cfg.beta1) * g_b;
      v_b = cfg.beta2 * v_b + (1.0 - cfg.beta2) * g_b * g_b;
      b -= cfg.learning_rate * (m_b / c1) / (std::sqrt(v_b / c2) + cfg.adaptive_eps);
    }
  }
  return model;
}

// ---------------------------------------------------------------------------
// Cross-validation

inline Matrix gather_rows(const Matrix& x, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(rows[r]));
  return out;
}

inline Vector gather(const Vector& y, std::span<const std::size_t> rows) {
  Vector out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) out(static_cast<Eigen::Index>(r)) = y(static_cast<Eigen::Index>(rows[r]));
  return out;
}

// Score of one split: train on split.train, R^2 on split.test.
inline double evaluate_split(const Matrix& x, const Vector& y, const Split& split, const ProbeConfig& cfg,
                             std::uint64_t seed) {
  const auto model = train_linear_probe(gather_rows(x, split.train), gather(y, split.train), cfg, seed);
  const Vector y_test = gather(y, split.test);
  const Vector y_hat = predict(model, gather_rows(x, split.test));
  return split_score(std::span<const double>(y_test.data(), static_cast<std::size_t>(y_test.size())),
                     std::span<const double>(y_hat.data(), static_cast<std::size_t>(y_hat.size())));
}

// Returns the K held-out R^2 scores s_k. Split k trains with seed
// plan.base_seed + k; `threads` only changes wall time, never results.
inline std::vector<double> run_cv(const Matrix& x, const Vector& y, const SplitPlan& plan, const ProbeConfig& cfg,
                                  unsigned threads = 1) {
  cfg.validate();
  if (static_cast<std::size_t>(x.rows()) != plan.n || static_cast<std::size_t>(y.size()) != plan.n)
    throw InvariantError("run_cv: plan covers " + std::to_string(plan.n) + " samples but data has " +
                         std::to_string(x.rows()) + " rows and " + std::to_string(y.size()) + " targets");
  std::vector<double> scores(plan.k());
  detail::parallel_for(plan.k(), threads, [&](std::size_t k) {
    scores[k] = evaluate_split(x, y, plan.splits[k], cfg, plan.base_seed + k);
  });
  return scores;
}

}  // namespace probebench
