#pragma once

// Batch pipeline behind the command-line tool: run configuration, and the
// validate / embed / evaluate / report stages wired from store through
// aggregation, probing and metrics to the report bundle.

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "probebench/aggregate.hpp"
#include "probebench/detail/parallel.hpp"
#include "probebench/detail/text.hpp"
#include "probebench/error.hpp"
#include "probebench/metrics.hpp"
#include "probebench/probe.hpp"
#include "probebench/report.hpp"
#include "probebench/store.hpp"

namespace probebench {

namespace fs = std::filesystem;

struct MethodSpec {
  std::string id;
  // single-source methods
  std::string encoder_id;
  std::string layer_tag;
  Pooling pooling = Pooling::Mean;
  Temporal temporal = Temporal::mean_over_seasons();
  // concatenation of earlier methods, in order
  std::vector<std::string> concat;
  std::optional<std::size_t> resize;

  bool is_concat() const { return !concat.empty(); }
};

struct RunConfig {
  std::string manifest_ref = "manifest.json";  // as written, relative to the config file
  std::string output_ref = "out";
  fs::path base_dir;                            // directory of the config file

  std::vector<std::string> tasks;  // empty: every manifest task
  std::vector<MethodSpec> methods;
  ProbeConfig probe;
  std::size_t k = 50;
  SigmaEstimator sigma = SigmaEstimator::Population;
  double epsilon = kQualityEpsilon;
  std::vector<Metric> metrics{Metric::MeanR2, Metric::QScore};
  std::vector<LayerCurveSpec> layer_curves;
  std::vector<DeltaSpec> deltas;
  RawInputSpec raw;
  std::uint64_t embedding_bytes_per_element = 4;

  fs::path manifest_path() const { return base_dir / manifest_ref; }
  fs::path output_dir() const { return base_dir / output_ref; }
  fs::path archive_path(const std::string& method_id) const { return output_dir() / "embeddings" / (method_id + ".pbev"); }

  const MethodSpec* find_method(std::string_view id) const {
    for (const auto& m : methods)
      if (m.id == id) return &m;
    return nullptr;
  }
};

// ---------------------------------------------------------------------------
// Config (de)serialization

inline std::string temporal_text(const Temporal& t) {
  return t.is_mean() ? "MEAN_OVER_SEASONS" : "PER_SEASON(" + std::to_string(*t.season) + ")";
}

inline Temporal parse_temporal(const std::string& s) {
  if (s == "MEAN_OVER_SEASONS") return Temporal::mean_over_seasons();
  if (s.starts_with("PER_SEASON(") && s.ends_with(")")) {
    const auto inner = s.substr(11, s.size() - 12);
    if (!inner.empty() && inner.find_first_not_of("0123456789") == std::string::npos)
      return Temporal::per_season(static_cast<std::uint32_t>(std::stoul(inner)));
  }
  throw FormatError("bad temporal '" + s + "' (expected MEAN_OVER_SEASONS or PER_SEASON(i))");
}

inline Metric parse_metric(std::string_view s) {
  if (s == "r2") return Metric::MeanR2;
  if (s == "q") return Metric::QScore;
  throw FormatError("unknown metric '" + std::string(s) + "' (expected r2 or q)");
}

inline nlohmann::json probe_to_json(const ProbeConfig& p) {
  return {{"learning_rate", p.learning_rate},         {"epochs", p.epochs},
          {"batch_size", p.batch_size},               {"weight_decay", p.weight_decay},
          {"beta1", p.beta1},                         {"beta2", p.beta2},
          {"adaptive_eps", p.adaptive_eps},           {"train_fraction", p.train_fraction},
          {"standardize_features", p.standardize_features}, {"standardize_target", p.standardize_target},
          {"base_seed", p.base_seed}};
}

inline ProbeConfig probe_from_json(const nlohmann::json& j) {
  ProbeConfig p;
  try {
    p.learning_rate = j.value("learning_rate", p.learning_rate);
    p.epochs = j.value("epochs", p.epochs);
    p.batch_size = j.value("batch_size", p.batch_size);
    p.weight_decay = j.value("weight_decay", p.weight_decay);
    p.beta1 = j.value("beta1", p.beta1);
    p.beta2 = j.value("beta2", p.beta2);
    p.adaptive_eps = j.value("adaptive_eps", p.adaptive_eps);
    p.train_fraction = j.value("train_fraction", p.train_fraction);
    p.standardize_features = j.value("standardize_features", p.standardize_features);
    p.standardize_target = j.value("standardize_target", p.standardize_target);
    p.base_seed = j.value("base_seed", p.base_seed);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("config.probe: ") + e.what());
  }
  p.validate();
  return p;
}

inline nlohmann::json config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["manifest"] = c.manifest_ref;
  j["output_dir"] = c.output_ref;
  j["tasks"] = c.tasks;
  j["k"] = c.k;
  j["sigma_estimator"] = sigma_name(c.sigma);
  j["epsilon"] = c.epsilon;
  j["metrics"] = nlohmann::json::array();
  for (auto m : c.metrics) j["metrics"].push_back(metric_name(m));
  j["probe"] = probe_to_json(c.probe);
  auto& methods = j["methods"] = nlohmann::json::array();
  for (const auto& m : c.methods) {
    nlohmann::json jm{{"id", m.id}};
    if (m.is_concat()) {
      jm["concat"] = m.concat;
    } else {
      jm["encoder"] = m.encoder_id;
      jm["layer"] = m.layer_tag;
      jm["pooling"] = pooling_name(m.pooling);
      jm["temporal"] = temporal_text(m.temporal);
    }
    if (m.resize) jm["resize"] = *m.resize;
    methods.push_back(jm);
  }
  auto& curves = j["layer_curves"] = nlohmann::json::array();
  for (const auto& l : c.layer_curves) curves.push_back({{"name", l.name}, {"methods", l.method_ids}});
  auto& deltas = j["deltas"] = nlohmann::json::array();
  for (const auto& d : c.deltas) deltas.push_back({{"concat", d.concat_id}, {"a", d.a_id}, {"b", d.b_id}});
  j["raw_input"] = {{"timesteps", c.raw.timesteps}, {"bands", c.raw.bands},       {"height", c.raw.height},
                    {"width", c.raw.width},         {"bytes_per_element", c.raw.bytes_per_element}};
  j["embedding_bytes_per_element"] = c.embedding_bytes_per_element;
  return j;
}

inline RunConfig config_from_json(const nlohmann::json& j, const fs::path& base_dir) {
  using detail::require;
  const std::string ctx = "config";
  RunConfig c;
  c.base_dir = base_dir;
  try {
    c.manifest_ref = require<std::string>(j, "manifest", ctx);
    c.output_ref = require<std::string>(j, "output_dir", ctx);
    c.tasks = j.value("tasks", std::vector<std::string>{});
    c.k = j.value("k", c.k);
    c.sigma = parse_sigma(j.value("sigma_estimator", std::string("population")));
    c.epsilon = j.value("epsilon", c.epsilon);
    if (j.contains("metrics")) {
      c.metrics.clear();
      for (const auto& m : j.at("metrics")) c.metrics.push_back(parse_metric(m.get<std::string>()));
      if (c.metrics.empty()) throw InvariantError("config: metrics must not be empty");
    }
    c.probe = probe_from_json(j.value("probe", nlohmann::json::object()));
    for (const auto& jm : require<nlohmann::json>(j, "methods", ctx)) {
      MethodSpec m;
      m.id = require<std::string>(jm, "id", ctx + ".methods");
      const std::string mctx = ctx + ".methods[" + m.id + "]";
      if (jm.contains("concat")) {
        m.concat = jm.at("concat").get<std::vector<std::string>>();
      } else {
        m.encoder_id = require<std::string>(jm, "encoder", mctx);
        m.layer_tag = require<std::string>(jm, "layer", mctx);
        m.pooling = parse_pooling(jm.value("pooling", std::string("MEAN")));
        m.temporal = parse_temporal(jm.value("temporal", std::string("MEAN_OVER_SEASONS")));
      }
      if (jm.contains("resize")) m.resize = jm.at("resize").get<std::size_t>();
      c.methods.push_back(std::move(m));
    }
    for (const auto& jl : j.value("layer_curves", nlohmann::json::array()))
      c.layer_curves.push_back({require<std::string>(jl, "name", ctx + ".layer_curves"),
                                require<std::vector<std::string>>(jl, "methods", ctx + ".layer_curves")});
    for (const auto& jd : j.value("deltas", nlohmann::json::array()))
      c.deltas.push_back({require<std::string>(jd, "concat", ctx + ".deltas"), require<std::string>(jd, "a", ctx + ".deltas"),
                          require<std::string>(jd, "b", ctx + ".deltas")});
    if (j.contains("raw_input")) {
      const auto& r = j.at("raw_input");
      c.raw = {r.value("timesteps", c.raw.timesteps), r.value("bands", c.raw.bands), r.value("height", c.raw.height),
               r.value("width", c.raw.width), r.value("bytes_per_element", c.raw.bytes_per_element)};
    }
    c.embedding_bytes_per_element = j.value("embedding_bytes_per_element", c.embedding_bytes_per_element);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(ctx + ": " + e.what());
  }
  c.raw.validate();
  if (c.k < 1) throw InvariantError("config: k must be >= 1");
  if (!(c.epsilon > 0.0)) throw InvariantError("config: epsilon must be > 0");
  if (c.embedding_bytes_per_element < 1) throw InvariantError("config: embedding_bytes_per_element must be >= 1");
  return c;
}

inline RunConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("config not found: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_file_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

inline void save_config(const RunConfig& c, const fs::path& path) {
  detail::write_file_text(path, config_to_json(c).dump(2) + "\n");
}

inline std::string config_hash(const RunConfig& c) { return detail::hex64(detail::fnv1a(config_to_json(c).dump())); }

inline std::vector<std::string> resolved_tasks(const RunConfig& c, const Manifest& m) {
  if (!c.tasks.empty()) return c.tasks;
  std::vector<std::string> out;
  for (const auto& t : m.tasks) out.push_back(t.task_id);
  return out;
}

// Every reference in the config resolves against the manifest and earlier methods.
inline void validate_config(const RunConfig& c, const Manifest& m) {
  if (c.methods.empty()) throw InvariantError("config: no methods");
  std::set<std::string> ids;
  for (const auto& meth : c.methods) {
    const std::string ctx = "config: method '" + meth.id + "'";
    if (meth.id.empty() || meth.id.find_first_of("/\\\t\n ") != std::string::npos)
      throw InvariantError(ctx + ": ids must be non-empty without whitespace or slashes");
    if (meth.is_concat()) {
      if (meth.concat.size() < 2) throw InvariantError(ctx + ": concat needs at least 2 methods");
      for (const auto& child : meth.concat)
        if (!ids.contains(child)) throw InvariantError(ctx + ": concat part '" + child + "' must be defined earlier");
    } else {
      const auto* enc = m.find_encoder(meth.encoder_id);
      if (!enc) throw InvariantError(ctx + ": unknown encoder '" + meth.encoder_id + "'");
      if (!enc->find_layer(meth.layer_tag)) throw InvariantError(ctx + ": unknown layer '" + meth.layer_tag + "'");
      if (meth.temporal.season && *meth.temporal.season >= m.seasons_per_sample)
        throw InvariantError(ctx + ": season index out of range");
    }
    if (!ids.insert(meth.id).second) throw InvariantError("config: duplicate method id '" + meth.id + "'");
  }
  const auto tasks = resolved_tasks(c, m);
  if (tasks.empty()) throw InvariantError("config: no tasks");
  std::set<std::string> seen;
  for (const auto& t : tasks) {
    if (!m.find_task(t)) throw InvariantError("config: task '" + t + "' is not in the manifest");
    if (!seen.insert(t).second) throw InvariantError("config: task '" + t + "' listed twice");
  }
  for (const auto& l : c.layer_curves) {
    if (l.method_ids.empty()) throw InvariantError("config: layer curve '" + l.name + "' is empty");
    for (const auto& id : l.method_ids)
      if (!ids.contains(id)) throw InvariantError("config: layer curve '" + l.name + "' references unknown method '" + id + "'");
  }
  for (const auto& d : c.deltas)
    for (const auto* id : {&d.concat_id, &d.a_id, &d.b_id})
      if (!ids.contains(*id)) throw InvariantError("config: delta references unknown method '" + *id + "'");
}

// ---------------------------------------------------------------------------
// Embedding

// Per sample: pool every season, then average over seasons (or keep the one
// requested season), then optionally resize.
inline EmbeddingVector embed_sample(const MethodSpec& spec, const Manifest& m, const FeatureSource& source,
                                    const std::string& sample_id) {
  auto load = [&](std::uint32_t season) {
    return pool(source(FeatureKey{spec.encoder_id, spec.layer_tag, sample_id, season}), spec.pooling, spec.encoder_id);
  };
  EmbeddingVector e;
  if (spec.temporal.is_mean()) {
    std::vector<EmbeddingVector> seasons;
    for (std::uint32_t s = 0; s < m.seasons_per_sample; ++s) seasons.push_back(load(s));
    e = temporal_mean(seasons);
  } else {
    e = load(*spec.temporal.season);
  }
  return spec.resize ? resize_channelwise(e, *spec.resize) : e;
}

// Builds one archive per method, rows in manifest sample order. Errors are
// rethrown with the offending method id.
inline std::map<std::string, EmbeddingArchive> build_archives(const RunConfig& c, const Manifest& m,
                                                              const FeatureSource& source, unsigned threads = 1) {
  validate_config(c, m);
  std::map<std::string, EmbeddingArchive> out;
  const auto n = m.sample_ids.size();
  for (const auto& spec : c.methods) {
    try {
      std::vector<EmbeddingVector> rows(n);
      if (spec.is_concat()) {
        for (std::size_t i = 0; i < n; ++i) {
          std::vector<EmbeddingVector> parts;
          for (const auto& child : spec.concat) {
            const auto& a = out.at(child);
            parts.push_back({std::vector<double>(a.row(i).begin(), a.row(i).end()), a.provenance});
          }
          rows[i] = concat(parts);
          if (spec.resize) rows[i] = resize_channelwise(rows[i], *spec.resize);
        }
      } else {
        detail::parallel_for(n, threads, [&](std::size_t i) { rows[i] = embed_sample(spec, m, source, m.sample_ids[i]); });
      }
      EmbeddingArchive a;
      a.method_id = spec.id;
      a.provenance = rows.front().provenance;
      a.sample_ids = m.sample_ids;
      a.dim = rows.front().dim();
      a.values.reserve(n * a.dim);
      for (const auto& r : rows) a.values.insert(a.values.end(), r.values.begin(), r.values.end());
      out.emplace(spec.id, std::move(a));
    } catch (const Error& e) {
      throw InvariantError("method '" + spec.id + "': " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

inline Matrix archive_matrix(const EmbeddingArchive& a) {
  return Eigen::Map<const Matrix>(a.values.data(), static_cast<Eigen::Index>(a.count()),
                                  static_cast<Eigen::Index>(a.dim));
}

// Targets aligned with the archive's row order.
inline Vector aligned_targets(const EmbeddingArchive& a, const TaskTable& task) {
  Vector y(static_cast<Eigen::Index>(a.count()));
  for (std::size_t i = 0; i < a.count(); ++i) {
    const auto it = task.targets.find(a.sample_ids[i]);
    if (it == task.targets.end())
      throw InvariantError("task '" + task.task_id + "' has no target for sample '" + a.sample_ids[i] + "'");
    y(static_cast<Eigen::Index>(i)) = it->second;
  }
  return y;
}

inline std::vector<double> run_cv(const EmbeddingArchive& a, const TaskTable& task, const SplitPlan& plan,
                                  const ProbeConfig& cfg, unsigned threads = 1) {
  if (a.count() != plan.n)
    throw InvariantError("run_cv: archive '" + a.method_id + "' has " + std::to_string(a.count()) +
                         " rows, split plan expects " + std::to_string(plan.n));
  return run_cv(archive_matrix(a), aligned_targets(a, task), plan, cfg, threads);
}

inline SplitPlan shared_plan(const RunConfig& c, std::size_t n) {
  return make_splits(n, c.k, c.probe.train_fraction, c.probe.base_seed);
}

// Scores every (method, task) pair over one shared split plan. Units of work
// are individual splits; results land in fixed slots, so thread count never
// changes the output.
inline std::vector<ScoreSummary> evaluate_archives(const RunConfig& c, const std::vector<std::string>& method_order,
                                                   const std::map<std::string, EmbeddingArchive>& archives,
                                                   const std::vector<TaskTable>& tasks, unsigned threads = 1) {
  if (archives.empty() || method_order.empty()) throw InvariantError("evaluate: no archives");
  const auto n = archives.at(method_order.front()).count();
  const auto& ids = archives.at(method_order.front()).sample_ids;
  for (const auto& id : method_order) {
    const auto& a = archives.at(id);
    if (a.count() != n || a.sample_ids != ids)
      throw InvariantError("evaluate: archive '" + id + "' sample rows differ from '" + method_order.front() + "'");
  }
  const auto plan = shared_plan(c, n);

  struct Unit {
    Matrix x;
    Vector y;
  };
  std::vector<Unit> units;
  for (const auto& id : method_order)
    for (const auto& t : tasks) units.push_back({archive_matrix(archives.at(id)), aligned_targets(archives.at(id), t)});

  const std::size_t k = plan.k();
  std::vector<double> scores(units.size() * k);
  detail::parallel_for(scores.size(), threads, [&](std::size_t i) {
    const auto& u = units[i / k];
    const auto split = i % k;
    scores[i] = evaluate_split(u.x, u.y, plan.splits[split], c.probe, plan.base_seed + split);
  });

  std::vector<ScoreSummary> out;
  for (std::size_t mi = 0; mi < method_order.size(); ++mi)
    for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
      const auto u = mi * tasks.size() + ti;
      std::vector<double> s(scores.begin() + static_cast<std::ptrdiff_t>(u * k),
                            scores.begin() + static_cast<std::ptrdiff_t>((u + 1) * k));
      out.push_back(make_summary(tasks[ti].task_id, method_order[mi], std::move(s), c.sigma, c.epsilon));
    }
  return out;
}

inline nlohmann::json run_meta(const RunConfig& c, const Manifest& m) {
  const auto plan = shared_plan(c, m.sample_ids.size());
  nlohmann::json j;
  j["tool"] = "probebench";
  j["format_version"] = kFormatVersion;
  j["config_hash"] = config_hash(c);
  j["dataset_name"] = m.dataset_name;
  j["n_samples"] = m.sample_ids.size();
  j["base_seed"] = c.probe.base_seed;
  j["k"] = c.k;
  j["sigma_estimator"] = sigma_name(c.sigma);
  j["train_fraction"] = c.probe.train_fraction;
  j["epsilon"] = c.epsilon;
  j["probe"] = probe_to_json(c.probe);
  j["split_plan"] = {{"shared_across_methods", true},
                     {"n", plan.n},
                     {"train_size", plan.splits.front().train.size()},
                     {"test_size", plan.splits.front().test.size()},
                     {"generator", "Philox4x32-10 Fisher-Yates, seed = base_seed + split_index"},
                     {"fingerprint", plan.fingerprint()}};
  j["tasks"] = resolved_tasks(c, m);
  j["methods"] = nlohmann::json::array();
  for (const auto& meth : c.methods) j["methods"].push_back(meth.id);
  j["config"] = config_to_json(c);
  return j;
}

inline std::vector<MethodInfo> method_infos(const RunConfig& c, const std::map<std::string, EmbeddingArchive>& archives) {
  std::vector<MethodInfo> out;
  for (const auto& m : c.methods) {
    const auto it = archives.find(m.id);
    if (it == archives.end()) throw InvariantError("missing archive for method '" + m.id + "'");
    out.push_back({m.id, m.is_concat() ? std::string() : m.layer_tag, it->second.dim});
  }
  return out;
}

inline ReportBundle make_bundle(const RunConfig& c, const Manifest& m, const std::map<std::string, EmbeddingArchive>& archives,
                                std::vector<ScoreSummary> summaries) {
  ReportBundle b;
  b.meta = run_meta(c, m);
  b.task_order = resolved_tasks(c, m);
  b.methods = method_infos(c, archives);
  b.summaries = std::move(summaries);
  b.layer_curves = c.layer_curves;
  b.deltas = c.deltas;
  b.raw = c.raw;
  b.embedding_bytes_per_element = c.embedding_bytes_per_element;
  b.metrics = c.metrics;
  return b;
}

// ---------------------------------------------------------------------------
// Commands

struct CommandResult {
  int exit_code = 0;
  std::string message;
};

inline CommandResult cmd_validate(const fs::path& manifest_path) {
  const auto m = load_manifest(manifest_path);
  const auto report = validate_store(m);
  return {report.pass() ? 0 : 1, report.to_text()};
}

inline std::map<std::string, EmbeddingArchive> load_archives(const RunConfig& c) {
  std::map<std::string, EmbeddingArchive> out;
  for (const auto& meth : c.methods) {
    const auto path = c.archive_path(meth.id);
    if (!fs::exists(path)) throw IoError("missing archive for method '" + meth.id + "': " + path.string() + " (run embed first)");
    auto a = read_archive(path);
    if (a.method_id != meth.id) throw FormatError(path.string() + ": archive belongs to method '" + a.method_id + "'");
    out.emplace(meth.id, std::move(a));
  }
  return out;
}

inline CommandResult cmd_embed(const RunConfig& c, unsigned threads = 1) {
  const auto m = load_manifest(c.manifest_path());
  const auto archives = build_archives(c, m, disk_source(m), threads);
  for (const auto& [id, a] : archives) write_archive(a, c.archive_path(id));
  return {0, "wrote " + std::to_string(archives.size()) + " archives to " + (c.output_dir() / "embeddings").string() + "\n"};
}

inline CommandResult cmd_evaluate(const RunConfig& c, unsigned threads = 1) {
  const auto m = load_manifest(c.manifest_path());
  validate_config(c, m);
  const auto archives = load_archives(c);
  for (const auto& [id, a] : archives)
    if (a.sample_ids != m.sample_ids)
      throw InvariantError("archive '" + id + "' has " + std::to_string(a.count()) + " rows that do not match the manifest's " +
                           std::to_string(m.sample_ids.size()) + " samples");
  std::vector<TaskTable> tasks;
  for (const auto& t : resolved_tasks(c, m)) tasks.push_back(load_task_table(m, t));
  std::vector<std::string> order;
  for (const auto& meth : c.methods) order.push_back(meth.id);
  auto summaries = evaluate_archives(c, order, archives, tasks, threads);
  const auto bundle = make_bundle(c, m, archives, std::move(summaries));
  detail::write_file_text(c.output_dir() / "scores_raw.tsv", render_scores_raw(bundle));
  detail::write_file_text(c.output_dir() / "summaries.tsv", render_summaries_tsv(bundle));
  return {0, "evaluated " + std::to_string(order.size()) + " methods x " + std::to_string(tasks.size()) + " tasks x " +
                 std::to_string(c.k) + " splits\n"};
}

namespace detail {

inline std::vector<std::vector<std::string>> read_tsv_rows(const fs::path& path, const std::string& header) {
  if (!fs::exists(path)) throw IoError("missing " + path.string() + " (run evaluate first)");
  std::istringstream in(read_file_text(path));
  std::string line;
  bool seen_header = false;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line.starts_with("#")) continue;
    if (!seen_header) {
      if (line != header) throw FormatError(path.string() + ": unexpected header");
      seen_header = true;
      continue;
    }
    rows.push_back(split(line, '\t'));
    if (rows.back().size() != split(header, '\t').size()) throw FormatError(path.string() + ": wrong column count");
  }
  if (!seen_header) throw FormatError(path.string() + ": no header");
  return rows;
}

inline double parse_real(const std::string& s, const fs::path& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw FormatError(path.string() + ": bad number '" + s + "'");
}

}  // namespace detail

// Rebuilds summaries from the evaluate outputs.
inline std::vector<ScoreSummary> load_summaries(const RunConfig& c) {
  const auto raw_path = c.output_dir() / "scores_raw.tsv";
  const auto sum_path = c.output_dir() / "summaries.tsv";
  std::map<std::pair<std::string, std::string>, std::vector<double>> raw;
  for (const auto& r : detail::read_tsv_rows(raw_path, "task_id\tmethod_id\tsplit_index\tr2")) {
    auto& v = raw[{r[1], r[0]}];
    if (std::stoul(r[2]) != v.size()) throw FormatError(raw_path.string() + ": split indices out of order");
    v.push_back(detail::parse_real(r[3], raw_path));
  }
  std::vector<ScoreSummary> out;
  for (const auto& r : detail::read_tsv_rows(sum_path, "task_id\tmethod_id\tmean_r2\tstd\tq_score\tK\tepsilon")) {
    ScoreSummary s;
    s.task_id = r[0];
    s.method_id = r[1];
    s.mean_r2 = detail::parse_real(r[2], sum_path);
    s.std = detail::parse_real(r[3], sum_path);
    s.q_score = detail::parse_real(r[4], sum_path);
    s.epsilon = detail::parse_real(r[6], sum_path);
    const auto it = raw.find({s.method_id, s.task_id});
    if (it == raw.end() || it->second.size() != std::stoul(r[5]))
      throw FormatError(sum_path.string() + ": no matching raw scores for " + s.method_id + "/" + s.task_id);
    s.scores = it->second;
    out.push_back(std::move(s));
  }
  if (out.empty()) throw InvariantError("no summaries in " + sum_path.string());
  return out;
}

inline CommandResult cmd_report(const RunConfig& c) {
  const auto m = load_manifest(c.manifest_path());
  validate_config(c, m);
  const auto archives = load_archives(c);
  const auto bundle = make_bundle(c, m, archives, load_summaries(c));
  const auto files = emit_report(bundle, c.output_dir());
  return {0, "wrote " + std::to_string(files.size()) + " report files to " + c.output_dir().string() + "\n"};
}

inline RunConfig default_config() {
  RunConfig c;
  c.methods.push_back({"vit_mean", "vit_small", "block12", Pooling::Mean, Temporal::mean_over_seasons(), {}, {}});
  c.methods.push_back({"vit_cls", "vit_small", "block12", Pooling::Cls, Temporal::mean_over_seasons(), {}, {}});
  c.methods.push_back({"vit_mean_cls", {}, {}, Pooling::Mean, {}, {"vit_mean", "vit_cls"}, {}});
  c.deltas.push_back({"vit_mean_cls", "vit_mean", "vit_cls"});
  return c;
}

}  // namespace probebench
