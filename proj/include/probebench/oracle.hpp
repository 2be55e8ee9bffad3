#pragma once

// Ground truth for validating the probe and the pipeline: a closed-form
// least-squares solver and deterministic synthetic datasets whose achievable
// R^2 is known by construction.

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "probebench/aggregate.hpp"
#include "probebench/error.hpp"
#include "probebench/probe.hpp"
#include "probebench/rng.hpp"
#include "probebench/store.hpp"

namespace probebench::oracle {

// Least squares with an unpenalized intercept, ridge penalty on the weights.
// Solved as the augmented system [Xc; sqrt(ridge) I] w = [yc; 0] by
// column-pivoted Householder QR, never through the normal equations.
inline LinearModel ols_closed_form(const Matrix& x, const Vector& y, double ridge = 0.0) {
  if (ridge < 0.0) throw InvariantError("ols_closed_form: ridge must be >= 0");
  if (x.rows() != y.size()) throw InvariantError("ols_closed_form: row count mismatch");
  if (x.rows() < 1) throw InvariantError("ols_closed_form: no rows");
  if (!x.allFinite() || !y.allFinite()) throw InvariantError("ols_closed_form: non-finite input");
  const auto n = x.rows(), d = x.cols();

  const Eigen::RowVectorXd x_mean = x.colwise().mean();
  const double y_mean = y.mean();

  Eigen::MatrixXd a(n + (ridge > 0.0 ? d : 0), d);
  a.topRows(n) = x.rowwise() - x_mean;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(a.rows());
  rhs.head(n) = y.array() - y_mean;
  if (ridge > 0.0) a.bottomRows(d) = std::sqrt(ridge) * Eigen::MatrixXd::Identity(d, d);

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < d) throw InvariantError("ols_closed_form: singular system (rank " + std::to_string(qr.rank()) +
                                          " < " + std::to_string(d) + ")");
  LinearModel model;
  model.stats = Standardization::identity(d);
  model.weights = qr.solve(rhs);
  model.bias = y_mean - x_mean.dot(model.weights);
  return model;
}

// Held-out R^2 of the closed-form solution on one split.
inline double ols_split_score(const Matrix& x, const Vector& y, const Split& split, double ridge = 0.0) {
  const auto model = ols_closed_form(gather_rows(x, split.train), gather(y, split.train), ridge);
  const Vector y_test = gather(y, split.test);
  const Vector y_hat = predict(model, gather_rows(x, split.test));
  return r2(std::span<const double>(y_test.data(), static_cast<std::size_t>(y_test.size())),
            std::span<const double>(y_hat.data(), static_cast<std::size_t>(y_hat.size())));
}

// ---------------------------------------------------------------------------
// Synthetic data

enum class Structure { FlatVector, GridSignalInMean, TwoTaskComplementary };

struct SyntheticSpec {
  std::size_t n_samples = 500;
  std::size_t dim = 32;
  double noise_std = 0.0;
  double signal_var = 1.0;  // |w*|^2, the variance of the noise-free target
  std::uint64_t weight_seed = 1;
  std::uint64_t noise_seed = 2;
  Structure structure = Structure::FlatVector;

  // GridSignalInMean
  std::vector<GridShape> grid_layers{{8, 4, 4}};
  std::uint32_t seasons = 4;
  double cell_noise_std = 2.0;

  // TwoTaskComplementary
  std::size_t extra_noise_dims = 0;
  bool redundant = false;  // B is a copy of A

  void validate() const {
    if (n_samples < dim + 2) throw InvariantError("synthetic spec: n_samples must be >= dim + 2");
    if (dim < 1) throw InvariantError("synthetic spec: dim must be >= 1");
    if (noise_std < 0.0 || signal_var < 0.0) throw InvariantError("synthetic spec: negative variance");
  }
};

// Stream ids under weight_seed / noise_seed.
namespace streams {
inline constexpr std::uint64_t kWeights = 100;
inline constexpr std::uint64_t kFeatures = 101;
inline constexpr std::uint64_t kFeaturesB = 102;
inline constexpr std::uint64_t kWeightsB = 103;
inline constexpr std::uint64_t kExtra = 104;
inline constexpr std::uint64_t kTargetNoise = 200;
inline constexpr std::uint64_t kTargetNoiseB = 201;
inline constexpr std::uint64_t kCellNoise = 202;
}  // namespace streams

inline std::string sample_name(std::size_t i) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "s%05zu", i);
  return buf;
}

inline std::vector<std::string> sample_names(std::size_t n) {
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(sample_name(i));
  return out;
}

inline double expected_r2(double signal_var, double noise_std) {
  const double total = signal_var + noise_std * noise_std;
  if (total == 0.0) throw InvariantError("synthetic spec: constant targets (no signal and no noise)");
  return signal_var / total;
}

inline Matrix normal_matrix(std::size_t rows, std::size_t cols, Philox& rng) {
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = standard_normal(rng);
  return m;
}

// Random direction scaled to squared norm `signal_var`.
inline Vector planted_weights(std::size_t dim, double signal_var, Philox& rng) {
  Vector w(static_cast<Eigen::Index>(dim));
  for (auto& v : w) v = standard_normal(rng);
  if (signal_var == 0.0) return Vector::Zero(w.size());
  return w * (std::sqrt(signal_var) / w.norm());
}

inline Vector add_noise(const Vector& clean, double noise_std, Philox& rng) {
  Vector y = clean;
  if (noise_std > 0.0)
    for (auto& v : y) v += noise_std * standard_normal(rng);
  return y;
}

struct LinearDataset {
  Matrix x;
  Vector y;
  Vector true_weights;
  double expected_r2 = 0.0;
};

// X has iid standard normal entries and y = X w* + noise, so the best
// achievable R^2 is signal_var / (signal_var + noise_std^2).
inline LinearDataset synth_linear_dataset(const SyntheticSpec& spec) {
  spec.validate();
  LinearDataset ds;
  ds.expected_r2 = expected_r2(spec.signal_var, spec.noise_std);
  Philox w_rng(spec.weight_seed, streams::kWeights);
  Philox x_rng(spec.weight_seed, streams::kFeatures);
  Philox n_rng(spec.noise_seed, streams::kTargetNoise);
  ds.true_weights = planted_weights(spec.dim, spec.signal_var, w_rng);
  ds.x = normal_matrix(spec.n_samples, spec.dim, x_rng);
  ds.y = add_noise(ds.x * ds.true_weights, spec.noise_std, n_rng);
  return ds;
}

inline EmbeddingArchive to_archive(const Matrix& x, std::string method_id, std::vector<std::string> sample_ids) {
  EmbeddingArchive a;
  a.method_id = std::move(method_id);
  a.sample_ids = std::move(sample_ids);
  a.dim = static_cast<std::size_t>(x.cols());
  a.values.assign(x.data(), x.data() + x.size());
  a.provenance.encoder_id = "synthetic";
  a.provenance.layer_tag = "flat";
  a.provenance.temporal = Temporal::mean_over_seasons();
  a.provenance.dim = a.dim;
  return a;
}

inline TaskTable to_task_table(const Vector& y, std::string task_id, const std::vector<std::string>& sample_ids) {
  TaskTable t{std::move(task_id), {}};
  for (std::size_t i = 0; i < sample_ids.size(); ++i) t.targets[sample_ids[i]] = y(static_cast<Eigen::Index>(i));
  return t;
}

// ---------------------------------------------------------------------------
// Pooling study: channel 0 of every layer has spatial mean equal to a latent
// signal; each cell adds zero-mean noise of cell_noise_std, so per-cell
// extremes are dominated by noise. The target is the signal plus noise_std.

struct PoolingStudy {
  Manifest manifest;  // in-memory; feature_files is left empty
  std::map<FeatureKey, FeatureTensor> tensors;
  TaskTable task;
  std::string encoder_id = "synthgrid";

  FeatureSource source() const {
    return [this](const FeatureKey& key) {
      const auto it = tensors.find(key);
      if (it == tensors.end()) throw InvariantError("no synthetic tensor for " + key.str());
      return it->second;
    };
  }
};

inline std::string layer_tag(std::size_t i) { return "stage" + std::to_string(i + 1); }

inline PoolingStudy synth_pooling_study(const SyntheticSpec& spec) {
  if (spec.structure != Structure::GridSignalInMean)
    throw InvariantError("synth_pooling_study: spec structure must be GRID_SIGNAL_IN_MEAN");
  if (spec.n_samples < 2) throw InvariantError("synth_pooling_study: need n_samples >= 2");
  if (spec.grid_layers.empty() || spec.seasons < 1) throw InvariantError("synth_pooling_study: empty geometry");
  expected_r2(spec.signal_var, spec.noise_std);  // rejects constant targets

  PoolingStudy study;
  auto& m = study.manifest;
  m.dataset_name = "synthetic-pooling-study";
  m.sample_ids = sample_names(spec.n_samples);
  m.seasons_per_sample = spec.seasons;
  EncoderDescriptor enc{study.encoder_id, Family::Grid, {}, "synthetic"};
  for (std::size_t l = 0; l < spec.grid_layers.size(); ++l) {
    check_layout_nonempty(spec.grid_layers[l], "synth_pooling_study");
    enc.layers.push_back({layer_tag(l), spec.grid_layers[l]});
  }
  m.encoders.push_back(enc);
  m.tasks.push_back({"target", "tasks/target.tsv"});

  Philox signal_rng(spec.weight_seed, streams::kWeights);
  Philox target_rng(spec.noise_seed, streams::kTargetNoise);
  Philox cell_rng(spec.noise_seed, streams::kCellNoise);
  study.task.task_id = "target";

  const double amplitude = std::sqrt(spec.signal_var);
  for (std::size_t i = 0; i < spec.n_samples; ++i) {
    const double signal = amplitude * standard_normal(signal_rng);
    study.task.targets[m.sample_ids[i]] = signal + spec.noise_std * standard_normal(target_rng);
    for (std::size_t l = 0; l < enc.layers.size(); ++l) {
      const auto& g = std::get<GridShape>(enc.layers[l].layout);
      const std::size_t cells = std::size_t{g.height} * g.width;
      for (std::uint32_t s = 0; s < spec.seasons; ++s) {
        FeatureTensor t{m.sample_ids[i], s, enc.layers[l].tag, g, std::vector<float>(g.channels * cells)};
        std::vector<double> noise(cells);
        for (std::uint32_t c = 0; c < g.channels; ++c) {
          double mean = 0.0;
          for (auto& v : noise) {
            v = spec.cell_noise_std * standard_normal(cell_rng);
            mean += v;
          }
          mean /= static_cast<double>(cells);
          // channel 0 carries the signal with its noise re-centred to zero mean
          const double offset = c == 0 ? signal - mean : 0.0;
          for (std::size_t p = 0; p < cells; ++p) t.values[c * cells + p] = static_cast<float>(noise[p] + offset);
        }
        study.tensors.emplace(FeatureKey{study.encoder_id, enc.layers[l].tag, m.sample_ids[i], s}, std::move(t));
      }
    }
  }
  return study;
}

// ---------------------------------------------------------------------------
// Complementary pair: archive A linearly explains task 1 only, archive B
// explains task 2 only. With `redundant`, B is A and both tasks come from A.

struct ComplementaryPair {
  Matrix a;
  Matrix b;
  Vector task1;
  Vector task2;
  double expected_r2 = 0.0;
};

inline ComplementaryPair synth_complementary_pair(const SyntheticSpec& spec) {
  if (spec.structure != Structure::TwoTaskComplementary)
    throw InvariantError("synth_complementary_pair: spec structure must be TWO_TASK_COMPLEMENTARY");
  spec.validate();
  ComplementaryPair pair;
  pair.expected_r2 = expected_r2(spec.signal_var, spec.noise_std);
  Philox xa_rng(spec.weight_seed, streams::kFeatures);
  Philox xb_rng(spec.weight_seed, streams::kFeaturesB);
  Philox wa_rng(spec.weight_seed, streams::kWeights);
  Philox wb_rng(spec.weight_seed, streams::kWeightsB);
  Philox na_rng(spec.noise_seed, streams::kTargetNoise);
  Philox nb_rng(spec.noise_seed, streams::kTargetNoiseB);
  Philox extra_rng(spec.noise_seed, streams::kExtra);

  const Matrix core_a = normal_matrix(spec.n_samples, spec.dim, xa_rng);
  const Matrix core_b = spec.redundant ? core_a : normal_matrix(spec.n_samples, spec.dim, xb_rng);
  pair.task1 = add_noise(core_a * planted_weights(spec.dim, spec.signal_var, wa_rng), spec.noise_std, na_rng);
  pair.task2 = add_noise(core_b * planted_weights(spec.dim, spec.signal_var, wb_rng), spec.noise_std, nb_rng);

  auto widen = [&](const Matrix& core) {
    if (spec.extra_noise_dims == 0) return core;
    Matrix out(core.rows(), core.cols() + static_cast<Eigen::Index>(spec.extra_noise_dims));
    out.leftCols(core.cols()) = core;
    out.rightCols(static_cast<Eigen::Index>(spec.extra_noise_dims)) =
        normal_matrix(spec.n_samples, spec.extra_noise_dims, extra_rng);
    return out;
  };
  pair.a = widen(core_a);
  pair.b = spec.redundant ? pair.a : widen(core_b);
  return pair;
}

}  // namespace probebench::oracle
