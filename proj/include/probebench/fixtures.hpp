#pragma once

// Writes oracle datasets as complete on-disk stores (manifest, feature files,
// task tables) plus a ready-to-run config, so the whole CLI pipeline can run
// without a real encoder.

#include <cmath>
#include <filesystem>
#include <string>

#include "probebench/oracle.hpp"
#include "probebench/pipeline.hpp"
#include "probebench/store.hpp"

namespace probebench::fixtures {

enum class Kind { Linear, Pooling, Complementary };

inline Kind parse_kind(std::string_view s) {
  if (s == "linear") return Kind::Linear;
  if (s == "pooling") return Kind::Pooling;
  if (s == "complementary") return Kind::Complementary;
  throw FormatError("unknown fixture kind '" + std::string(s) + "' (expected linear, pooling or complementary)");
}

struct FixtureOptions {
  std::uint64_t seed = 1;
  std::size_t n_samples = 0;  // 0: kind default
  std::size_t k = 50;
};

namespace detail {

inline std::filesystem::path feature_rel(const FeatureKey& k) {
  return std::filesystem::path("features") / k.encoder_id / k.layer_tag /
         (k.sample_id + "_s" + std::to_string(k.season) + ".pbft");
}

inline void put(Manifest& m, const std::filesystem::path& dir, const std::string& encoder, FeatureTensor t) {
  FeatureKey key{encoder, t.layer_tag, t.sample_id, t.season_index};
  const auto rel = feature_rel(key);
  write_feature(t, dir / rel);
  m.feature_files[key] = rel;
}

inline MethodSpec method(std::string id, std::string enc, std::string layer, Pooling p,
                         std::optional<std::size_t> resize = {}) {
  return {std::move(id), std::move(enc), std::move(layer), p, Temporal::mean_over_seasons(), {}, resize};
}

inline MethodSpec concat_of(std::string id, std::vector<std::string> parts) {
  return {std::move(id), {}, {}, Pooling::Mean, Temporal::mean_over_seasons(), std::move(parts), {}};
}

}  // namespace detail

// GRID encoder, one 1x1 layer: mean pooling returns the planted feature vector.
inline RunConfig write_linear(const std::filesystem::path& dir, const FixtureOptions& opt) {
  oracle::SyntheticSpec spec;
  spec.n_samples = opt.n_samples ? opt.n_samples : 500;
  spec.dim = 32;
  spec.signal_var = 9.0;
  spec.noise_std = 1.0;
  spec.weight_seed = 2 * opt.seed + 1;
  spec.noise_seed = 2 * opt.seed + 2;
  const auto ds = oracle::synth_linear_dataset(spec);

  Manifest m;
  m.dataset_name = "synthetic-linear";
  m.sample_ids = oracle::sample_names(spec.n_samples);
  m.seasons_per_sample = 1;
  m.encoders.push_back({"flat", Family::Grid, {{"final", GridShape{static_cast<std::uint32_t>(spec.dim), 1, 1}}}, "synthetic"});
  m.tasks.push_back({"y", "tasks/y.tsv"});
  for (std::size_t i = 0; i < spec.n_samples; ++i) {
    FeatureTensor t{m.sample_ids[i], 0, "final", GridShape{static_cast<std::uint32_t>(spec.dim), 1, 1}, {}};
    for (Eigen::Index j = 0; j < ds.x.cols(); ++j) t.values.push_back(static_cast<float>(ds.x(static_cast<Eigen::Index>(i), j)));
    detail::put(m, dir, "flat", std::move(t));
  }
  save_task_table(oracle::to_task_table(ds.y, "y", m.sample_ids), dir / "tasks/y.tsv");
  save_manifest(m, dir / "manifest.json");

  RunConfig c;
  c.base_dir = dir;
  c.k = opt.k;
  c.probe.base_seed = opt.seed;
  c.methods.push_back(detail::method("flat_mean", "flat", "final", Pooling::Mean));
  return c;
}

// Two GRID stages whose channel 0 carries the target in its spatial mean.
inline RunConfig write_pooling(const std::filesystem::path& dir, const FixtureOptions& opt) {
  oracle::SyntheticSpec spec;
  spec.structure = oracle::Structure::GridSignalInMean;
  spec.n_samples = opt.n_samples ? opt.n_samples : 300;
  spec.noise_std = 0.3;
  spec.cell_noise_std = 2.0;
  spec.grid_layers = {{4, 8, 8}, {8, 4, 4}};
  spec.seasons = 4;
  spec.weight_seed = 2 * opt.seed + 1;
  spec.noise_seed = 2 * opt.seed + 2;
  auto study = oracle::synth_pooling_study(spec);

  Manifest m = study.manifest;
  for (auto& [key, tensor] : study.tensors) detail::put(m, dir, key.encoder_id, tensor);
  save_task_table(study.task, dir / "tasks/target.tsv");
  save_manifest(m, dir / "manifest.json");

  const auto& enc = study.encoder_id;
  RunConfig c;
  c.base_dir = dir;
  c.k = opt.k;
  c.probe.base_seed = opt.seed;
  c.methods = {detail::method("stage1_mean", enc, "stage1", Pooling::Mean),
               detail::method("stage2_mean", enc, "stage2", Pooling::Mean),
               detail::method("stage2_max", enc, "stage2", Pooling::Max),
               detail::method("stage2_min", enc, "stage2", Pooling::Min),
               detail::method("stage2_mean_to4", enc, "stage2", Pooling::Mean, 4)};
  c.layer_curves = {{"synthgrid_mean", {"stage1_mean", "stage2_mean"}},
                    {"synthgrid_final_resized", {"stage2_mean_to4", "stage2_mean"}}};
  return c;
}

// Two TOKENS encoders with a CLS token. Patch tokens of encoder A average to
// a vector that explains task1; encoder B likewise explains task2.
inline RunConfig write_complementary(const std::filesystem::path& dir, const FixtureOptions& opt) {
  oracle::SyntheticSpec spec;
  spec.structure = oracle::Structure::TwoTaskComplementary;
  spec.n_samples = opt.n_samples ? opt.n_samples : 400;
  spec.dim = 16;
  spec.noise_std = 0.1;
  spec.weight_seed = 2 * opt.seed + 1;
  spec.noise_seed = 2 * opt.seed + 2;
  const auto pair = oracle::synth_complementary_pair(spec);

  Manifest m;
  m.dataset_name = "synthetic-complementary";
  m.sample_ids = oracle::sample_names(spec.n_samples);
  m.seasons_per_sample = 1;
  const auto d = static_cast<std::uint32_t>(spec.dim);
  const TokenShape shape{3, d, true};
  m.encoders.push_back({"enc_a", Family::Tokens, {{"block12", shape}}, "synthetic-a"});
  m.encoders.push_back({"enc_b", Family::Tokens, {{"block12", shape}}, "synthetic-b"});
  m.tasks = {{"task1", "tasks/task1.tsv"}, {"task2", "tasks/task2.tsv"}};

  Philox spread(spec.noise_seed, 300);
  for (const auto& [enc, x] : {std::pair{"enc_a", &pair.a}, std::pair{"enc_b", &pair.b}}) {
    for (std::size_t i = 0; i < spec.n_samples; ++i) {
      FeatureTensor t{m.sample_ids[i], 0, "block12", shape, std::vector<float>(3 * d)};
      for (std::uint32_t j = 0; j < d; ++j) {
        const double v = (*x)(static_cast<Eigen::Index>(i), j);
        const double delta = standard_normal(spread);
        t.values[j] = static_cast<float>(0.5 * v + standard_normal(spread));  // CLS: noisy partial view
        t.values[d + j] = static_cast<float>(v + delta);
        t.values[2 * d + j] = static_cast<float>(v - delta);
      }
      detail::put(m, dir, enc, std::move(t));
    }
  }
  save_task_table(oracle::to_task_table(pair.task1, "task1", m.sample_ids), dir / "tasks/task1.tsv");
  save_task_table(oracle::to_task_table(pair.task2, "task2", m.sample_ids), dir / "tasks/task2.tsv");
  save_manifest(m, dir / "manifest.json");

  RunConfig c;
  c.base_dir = dir;
  c.k = opt.k;
  c.probe.base_seed = opt.seed;
  c.methods = {detail::method("a_mean", "enc_a", "block12", Pooling::Mean),
               detail::method("a_cls", "enc_a", "block12", Pooling::Cls),
               detail::method("b_mean", "enc_b", "block12", Pooling::Mean),
               detail::concat_of("a_mean_cls", {"a_mean", "a_cls"}),
               detail::concat_of("ab_mean", {"a_mean", "b_mean"})};
  c.deltas = {{"a_mean_cls", "a_mean", "a_cls"}, {"ab_mean", "a_mean", "b_mean"}};
  return c;
}

// Writes the fixture store and config.json into `dir`; returns the config path.
inline std::filesystem::path write_fixture(Kind kind, const std::filesystem::path& dir, const FixtureOptions& opt) {
  std::filesystem::create_directories(dir);
  RunConfig c;
  switch (kind) {
    case Kind::Linear: c = write_linear(dir, opt); break;
    case Kind::Pooling: c = write_pooling(dir, opt); break;
    case Kind::Complementary: c = write_complementary(dir, opt); break;
  }
  const auto path = dir / "config.json";
  save_config(c, path);
  return path;
}

}  // namespace probebench::fixtures
