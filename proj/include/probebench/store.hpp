#pragma once

// Feature store: a manifest (JSON) that declares the dataset shape, the
// encoders with their per-layer output geometry, the task target tables and
// one binary feature file per (encoder, layer, sample, season).
//
// Feature file layout (all integers little-endian):
//
//   offset  size  field
//   0       4     magic "PBFT"
//   4       4     format_version (u32, currently 1)
//   8       1     layout (u8: 0 = GRID, 1 = TOKENS)
//   9       12    dims, 3 x u32: GRID -> C, H, W; TOKENS -> N, D, has_cls (0/1)
//   21      4*n   values, IEEE-754 binary32, row-major (C*H*W or N*D)
//
// The file length must equal 21 + 4*n exactly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "probebench/detail/binary.hpp"
#include "probebench/detail/text.hpp"
#include "probebench/error.hpp"

namespace probebench {

inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::string_view kFeatureMagic = "PBFT";
inline constexpr std::size_t kFeatureHeaderBytes = 21;

enum class Family { Grid, Tokens };

struct GridShape {
  std::uint32_t channels = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  friend bool operator==(const GridShape&, const GridShape&) = default;
};

struct TokenShape {
  std::uint32_t tokens = 0;
  std::uint32_t dim = 0;
  bool has_cls = false;
  friend bool operator==(const TokenShape&, const TokenShape&) = default;
};

using Layout = std::variant<GridShape, TokenShape>;

inline std::size_t element_count(const Layout& layout) {
  return std::visit(
      [](const auto& s) -> std::size_t {
        if constexpr (std::is_same_v<std::decay_t<decltype(s)>, GridShape>)
          return std::size_t{s.channels} * s.height * s.width;
        else
          return std::size_t{s.tokens} * s.dim;
      },
      layout);
}

inline std::string describe(const Layout& layout) {
  std::ostringstream os;
  if (const auto* g = std::get_if<GridShape>(&layout))
    os << "GRID(C=" << g->channels << ",H=" << g->height << ",W=" << g->width << ")";
  else {
    const auto& t = std::get<TokenShape>(layout);
    os << "TOKENS(N=" << t.tokens << ",D=" << t.dim << ",cls=" << (t.has_cls ? 1 : 0) << ")";
  }
  return os.str();
}

struct LayerSpec {
  std::string tag;
  Layout layout;
};

struct EncoderDescriptor {
  std::string encoder_id;
  Family family = Family::Grid;
  std::vector<LayerSpec> layers;  // ordered by depth
  std::string ssl_objective;

  const LayerSpec* find_layer(std::string_view tag) const {
    for (const auto& l : layers)
      if (l.tag == tag) return &l;
    return nullptr;
  }
};

struct FeatureKey {
  std::string encoder_id;
  std::string layer_tag;
  std::string sample_id;
  std::uint32_t season = 0;

  friend auto operator<=>(const FeatureKey&, const FeatureKey&) = default;

  std::string str() const {
    return encoder_id + "/" + layer_tag + "/" + sample_id + "/s" + std::to_string(season);
  }
};

struct TaskSource {
  std::string task_id;
  std::filesystem::path path;  // relative to the manifest directory
};

struct Manifest {
  std::uint32_t format_version = kFormatVersion;
  std::string dataset_name;
  std::vector<std::string> sample_ids;
  std::uint32_t seasons_per_sample = 1;
  std::vector<EncoderDescriptor> encoders;
  std::vector<TaskSource> tasks;
  std::map<FeatureKey, std::filesystem::path> feature_files;
  std::filesystem::path base_dir;  // set by load_manifest; not serialized

  const EncoderDescriptor* find_encoder(std::string_view id) const {
    for (const auto& e : encoders)
      if (e.encoder_id == id) return &e;
    return nullptr;
  }

  const TaskSource* find_task(std::string_view id) const {
    for (const auto& t : tasks)
      if (t.task_id == id) return &t;
    return nullptr;
  }

  std::filesystem::path resolve(const std::filesystem::path& p) const {
    return p.is_absolute() ? p : base_dir / p;
  }
};

struct FeatureTensor {
  std::string sample_id;
  std::uint32_t season_index = 0;
  std::string layer_tag;
  Layout layout;
  std::vector<float> values;
};

struct TaskTable {
  std::string task_id;
  std::map<std::string, double> targets;
};

// ---------------------------------------------------------------------------
// Tensors

inline void check_layout_nonempty(const Layout& layout, const std::string& ctx) {
  if (const auto* g = std::get_if<GridShape>(&layout)) {
    if (g->channels == 0 || g->height == 0 || g->width == 0)
      throw InvariantError(ctx + ": GRID dims must be >= 1, got " + describe(layout));
  } else {
    const auto& t = std::get<TokenShape>(layout);
    if (t.tokens == 0 || t.dim == 0)
      throw InvariantError(ctx + ": TOKENS dims must be >= 1, got " + describe(layout));
    if (t.has_cls && t.tokens < 2)
      throw InvariantError(ctx + ": TOKENS with a CLS token need N >= 2, got " + describe(layout));
  }
}

inline void validate_tensor(const FeatureTensor& t, const std::string& ctx = "tensor") {
  check_layout_nonempty(t.layout, ctx);
  const auto expected = element_count(t.layout);
  if (t.values.size() != expected)
    throw InvariantError(ctx + ": " + std::to_string(t.values.size()) + " values but layout " +
                         describe(t.layout) + " needs " + std::to_string(expected));
  for (std::size_t i = 0; i < t.values.size(); ++i)
    if (!std::isfinite(t.values[i]))
      throw InvariantError(ctx + ": non-finite value at index " + std::to_string(i));
}

inline std::vector<char> encode_feature(const FeatureTensor& t) {
  validate_tensor(t);
  detail::ByteWriter w;
  w.bytes(kFeatureMagic);
  w.uint<std::uint32_t>(kFormatVersion);
  if (const auto* g = std::get_if<GridShape>(&t.layout)) {
    w.uint<std::uint8_t>(0);
    w.uint<std::uint32_t>(g->channels);
    w.uint<std::uint32_t>(g->height);
    w.uint<std::uint32_t>(g->width);
  } else {
    const auto& s = std::get<TokenShape>(t.layout);
    w.uint<std::uint8_t>(1);
    w.uint<std::uint32_t>(s.tokens);
    w.uint<std::uint32_t>(s.dim);
    w.uint<std::uint32_t>(s.has_cls ? 1 : 0);
  }
  for (float v : t.values) w.f32(v);
  return w.data();
}

struct DecodedFeature {
  Layout layout;
  std::vector<float> values;
};

inline Layout decode_feature_header(detail::ByteReader& r, const std::string& ctx) {
  if (r.bytes(4) != kFeatureMagic) throw FormatError(ctx + ": bad magic (expected PBFT)");
  const auto version = r.uint<std::uint32_t>();
  if (version != kFormatVersion)
    throw FormatError(ctx + ": unsupported format_version " + std::to_string(version));
  const auto kind = r.uint<std::uint8_t>();
  const auto d0 = r.uint<std::uint32_t>();
  const auto d1 = r.uint<std::uint32_t>();
  const auto d2 = r.uint<std::uint32_t>();
  Layout layout;
  if (kind == 0) {
    layout = GridShape{d0, d1, d2};
  } else if (kind == 1) {
    if (d2 > 1) throw FormatError(ctx + ": has_cls flag must be 0 or 1");
    layout = TokenShape{d0, d1, d2 == 1};
  } else {
    throw FormatError(ctx + ": unknown layout code " + std::to_string(kind));
  }
  try {
    check_layout_nonempty(layout, ctx);
  } catch (const InvariantError& e) {
    throw FormatError(e.what());
  }
  return layout;
}

inline DecodedFeature decode_feature(std::span<const char> bytes, const std::string& ctx) {
  detail::ByteReader r(bytes, ctx);
  DecodedFeature out{decode_feature_header(r, ctx), {}};
  const auto n = element_count(out.layout);
  if (r.remaining() != 4 * n)
    throw FormatError(ctx + ": payload is " + std::to_string(r.remaining()) + " bytes, header implies " +
                      std::to_string(4 * n));
  out.values.resize(n);
  for (auto& v : out.values) {
    v = r.f32();
    if (!std::isfinite(v)) throw FormatError(ctx + ": non-finite value in payload");
  }
  return out;
}

inline void write_feature(const FeatureTensor& tensor, const std::filesystem::path& path) {
  const auto bytes = encode_feature(tensor);
  detail::write_file_bytes(path, bytes);
}

inline DecodedFeature read_feature_file(const std::filesystem::path& path) {
  const auto bytes = detail::read_file_bytes(path);
  return decode_feature(bytes, path.string());
}

inline const Layout& declared_layout(const Manifest& m, std::string_view encoder_id, std::string_view layer_tag) {
  const auto* enc = m.find_encoder(encoder_id);
  if (!enc) throw InvariantError("unknown encoder '" + std::string(encoder_id) + "'");
  const auto* layer = enc->find_layer(layer_tag);
  if (!layer)
    throw InvariantError("encoder '" + std::string(encoder_id) + "' has no layer '" + std::string(layer_tag) + "'");
  return layer->layout;
}

inline FeatureTensor read_feature(const Manifest& m, const FeatureKey& key) {
  const auto it = m.feature_files.find(key);
  if (it == m.feature_files.end()) throw InvariantError("no feature file for key " + key.str());
  const auto& expected = declared_layout(m, key.encoder_id, key.layer_tag);
  auto decoded = read_feature_file(m.resolve(it->second));
  if (!(decoded.layout == expected))
    throw DimensionMismatch(key.str() + ": manifest declares " + describe(expected) + " but file has " +
                            describe(decoded.layout));
  return FeatureTensor{key.sample_id, key.season, key.layer_tag, decoded.layout, std::move(decoded.values)};
}

inline FeatureTensor read_feature(const Manifest& m, std::string_view encoder_id, std::string_view layer_tag,
                                  std::string_view sample_id, std::uint32_t season) {
  return read_feature(m, FeatureKey{std::string(encoder_id), std::string(layer_tag), std::string(sample_id), season});
}

// Anything that can hand out feature tensors by key: the on-disk store or an
// in-memory fixture.
using FeatureSource = std::function<FeatureTensor(const FeatureKey&)>;

inline FeatureSource disk_source(const Manifest& m) {
  return [&m](const FeatureKey& key) { return read_feature(m, key); };
}

// ---------------------------------------------------------------------------
// Manifest (JSON)

namespace detail {

inline std::string family_name(Family f) { return f == Family::Grid ? "GRID" : "TOKENS"; }

inline nlohmann::json layer_to_json(const LayerSpec& l) {
  nlohmann::json j;
  j["tag"] = l.tag;
  if (const auto* g = std::get_if<GridShape>(&l.layout)) {
    j["grid"] = {g->channels, g->height, g->width};
  } else {
    const auto& t = std::get<TokenShape>(l.layout);
    j["tokens"] = {{"n", t.tokens}, {"d", t.dim}, {"has_cls", t.has_cls}};
  }
  return j;
}

template <typename T>
T require(const nlohmann::json& j, const char* key, const std::string& ctx) {
  if (!j.is_object() || !j.contains(key)) throw FormatError(ctx + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw FormatError(ctx + ": field '" + key + "' has the wrong type");
  }
}

}  // namespace detail

inline nlohmann::json manifest_to_json(const Manifest& m) {
  nlohmann::json j;
  j["format_version"] = m.format_version;
  j["dataset_name"] = m.dataset_name;
  j["sample_ids"] = m.sample_ids;
  j["seasons_per_sample"] = m.seasons_per_sample;
  auto& encs = j["encoders"] = nlohmann::json::array();
  for (const auto& e : m.encoders) {
    nlohmann::json je;
    je["encoder_id"] = e.encoder_id;
    je["family"] = detail::family_name(e.family);
    je["ssl_objective"] = e.ssl_objective;
    je["layers"] = nlohmann::json::array();
    for (const auto& l : e.layers) je["layers"].push_back(detail::layer_to_json(l));
    encs.push_back(je);
  }
  auto& tasks = j["tasks"] = nlohmann::json::array();
  for (const auto& t : m.tasks) tasks.push_back({{"task_id", t.task_id}, {"path", t.path.generic_string()}});
  auto& files = j["feature_files"] = nlohmann::json::array();
  for (const auto& [k, p] : m.feature_files)
    files.push_back({{"encoder", k.encoder_id},
                     {"layer", k.layer_tag},
                     {"sample", k.sample_id},
                     {"season", k.season},
                     {"path", p.generic_string()}});
  return j;
}

inline void validate_manifest(const Manifest& m) {
  if (m.format_version != kFormatVersion)
    throw InvariantError("manifest: unsupported format_version " + std::to_string(m.format_version));
  if (m.sample_ids.empty()) throw InvariantError("manifest: sample_ids is empty");
  std::set<std::string_view> samples;
  for (const auto& s : m.sample_ids) {
    if (s.empty()) throw InvariantError("manifest: empty sample id");
    if (!samples.insert(s).second) throw InvariantError("manifest: duplicate sample_id '" + s + "'");
  }
  if (m.seasons_per_sample < 1) throw InvariantError("manifest: seasons_per_sample must be >= 1");

  std::set<std::string_view> encoders;
  for (const auto& e : m.encoders) {
    const std::string ctx = "manifest: encoder '" + e.encoder_id + "'";
    if (e.encoder_id.empty()) throw InvariantError("manifest: empty encoder_id");
    if (!encoders.insert(e.encoder_id).second) throw InvariantError(ctx + " declared twice");
    if (e.layers.empty()) throw InvariantError(ctx + " declares no layers");
    std::set<std::string_view> tags;
    for (const auto& l : e.layers) {
      if (!tags.insert(l.tag).second) throw InvariantError(ctx + ": duplicate layer_tag '" + l.tag + "'");
      const bool grid = std::holds_alternative<GridShape>(l.layout);
      if (grid != (e.family == Family::Grid))
        throw InvariantError(ctx + ": layer '" + l.tag + "' layout does not match family " +
                             detail::family_name(e.family));
      check_layout_nonempty(l.layout, ctx + " layer '" + l.tag + "'");
    }
  }

  std::set<std::string_view> tasks;
  for (const auto& t : m.tasks)
    if (t.task_id.empty() || !tasks.insert(t.task_id).second)
      throw InvariantError("manifest: duplicate or empty task_id '" + t.task_id + "'");

  for (const auto& [k, p] : m.feature_files) {
    const auto* enc = m.find_encoder(k.encoder_id);
    if (!enc) throw InvariantError("manifest: feature file " + k.str() + " references undeclared encoder '" + k.encoder_id + "'");
    if (!enc->find_layer(k.layer_tag))
      throw InvariantError("manifest: feature file " + k.str() + " references undeclared layer_tag '" + k.layer_tag + "'");
    if (!samples.contains(k.sample_id))
      throw InvariantError("manifest: feature file " + k.str() + " references undeclared sample '" + k.sample_id + "'");
    if (k.season >= m.seasons_per_sample)
      throw InvariantError("manifest: feature file " + k.str() + " has season index out of range");
  }
}

inline Manifest manifest_from_json(const nlohmann::json& j, const std::string& ctx = "manifest") {
  using detail::require;
  Manifest m;
  m.format_version = require<std::uint32_t>(j, "format_version", ctx);
  m.dataset_name = require<std::string>(j, "dataset_name", ctx);
  m.sample_ids = require<std::vector<std::string>>(j, "sample_ids", ctx);
  m.seasons_per_sample = require<std::uint32_t>(j, "seasons_per_sample", ctx);

  for (const auto& je : require<nlohmann::json>(j, "encoders", ctx)) {
    EncoderDescriptor e;
    e.encoder_id = require<std::string>(je, "encoder_id", ctx + ".encoders");
    const std::string ectx = ctx + ".encoders[" + e.encoder_id + "]";
    const auto family = require<std::string>(je, "family", ectx);
    if (family == "GRID")
      e.family = Family::Grid;
    else if (family == "TOKENS")
      e.family = Family::Tokens;
    else
      throw FormatError(ectx + ": unknown family '" + family + "'");
    e.ssl_objective = je.value("ssl_objective", "");
    for (const auto& jl : require<nlohmann::json>(je, "layers", ectx)) {
      LayerSpec l;
      l.tag = require<std::string>(jl, "tag", ectx + ".layers");
      const std::string lctx = ectx + ".layers[" + l.tag + "]";
      if (jl.contains("grid")) {
        const auto d = require<std::vector<std::uint32_t>>(jl, "grid", lctx);
        if (d.size() != 3) throw FormatError(lctx + ": grid must be [C, H, W]");
        l.layout = GridShape{d[0], d[1], d[2]};
      } else if (jl.contains("tokens")) {
        const auto& t = jl.at("tokens");
        l.layout = TokenShape{require<std::uint32_t>(t, "n", lctx), require<std::uint32_t>(t, "d", lctx),
                              require<bool>(t, "has_cls", lctx)};
      } else {
        throw FormatError(lctx + ": needs either 'grid' or 'tokens'");
      }
      e.layers.push_back(std::move(l));
    }
    m.encoders.push_back(std::move(e));
  }

  for (const auto& jt : require<nlohmann::json>(j, "tasks", ctx))
    m.tasks.push_back({require<std::string>(jt, "task_id", ctx + ".tasks"),
                       std::filesystem::path(require<std::string>(jt, "path", ctx + ".tasks"))});

  for (const auto& jf : require<nlohmann::json>(j, "feature_files", ctx)) {
    const std::string fctx = ctx + ".feature_files";
    FeatureKey k{require<std::string>(jf, "encoder", fctx), require<std::string>(jf, "layer", fctx),
                 require<std::string>(jf, "sample", fctx), require<std::uint32_t>(jf, "season", fctx)};
    auto path = require<std::string>(jf, "path", fctx);
    if (!m.feature_files.emplace(k, path).second)
      throw InvariantError("manifest: duplicate feature file key " + k.str());
  }

  validate_manifest(m);
  return m;
}

inline Manifest load_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("manifest not found: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_file_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  Manifest m = manifest_from_json(j, path.filename().string());
  m.base_dir = path.parent_path();
  return m;
}

inline void save_manifest(const Manifest& m, const std::filesystem::path& path) {
  validate_manifest(m);
  detail::write_file_text(path, manifest_to_json(m).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Task tables: tab-separated "sample_id<TAB>target" with that header line.

inline TaskTable load_task_table(const Manifest& m, std::string_view task_id) {
  const auto* src = m.find_task(task_id);
  if (!src) throw InvariantError("task '" + std::string(task_id) + "' is not declared in the manifest");
  const auto path = m.resolve(src->path);
  std::istringstream in(detail::read_file_text(path));
  std::string line;
  if (!std::getline(in, line) || line != "sample_id\ttarget")
    throw FormatError(path.string() + ": expected header 'sample_id<TAB>target'");
  std::set<std::string_view> declared(m.sample_ids.begin(), m.sample_ids.end());
  TaskTable table{std::string(task_id), {}};
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cols = detail::split(line, '\t');
    const std::string ctx = path.string() + ":" + std::to_string(lineno);
    if (cols.size() != 2) throw FormatError(ctx + ": expected 2 columns");
    double v;
    try {
      std::size_t used = 0;
      v = std::stod(cols[1], &used);
      if (used != cols[1].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw FormatError(ctx + ": target '" + cols[1] + "' is not a number");
    }
    if (!std::isfinite(v)) throw InvariantError(ctx + ": non-finite target");
    if (!declared.contains(cols[0])) throw InvariantError(ctx + ": sample '" + cols[0] + "' not in manifest");
    if (!table.targets.emplace(cols[0], v).second) throw InvariantError(ctx + ": duplicate sample '" + cols[0] + "'");
  }
  return table;
}

inline void save_task_table(const TaskTable& t, const std::filesystem::path& path) {
  std::string out = "sample_id\ttarget\n";
  for (const auto& [id, v] : t.targets) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += id + "\t" + buf + "\n";
  }
  detail::write_file_text(path, out);
}

// ---------------------------------------------------------------------------
// Store validation

enum class FileStatus { Ok, Unmapped, Missing, Corrupt, HeaderMismatch };

inline std::string_view status_name(FileStatus s) {
  switch (s) {
    case FileStatus::Ok: return "ok";
    case FileStatus::Unmapped: return "unmapped";
    case FileStatus::Missing: return "missing";
    case FileStatus::Corrupt: return "corrupt";
    case FileStatus::HeaderMismatch: return "header-mismatch";
  }
  return "?";
}

struct FileCheck {
  FeatureKey key;
  FileStatus status = FileStatus::Ok;
  std::string detail;
};

struct ValidationReport {
  std::vector<FileCheck> entries;  // one per expected (encoder, layer, sample, season)

  bool pass() const {
    return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.status == FileStatus::Ok; });
  }

  std::vector<FileCheck> findings() const {
    std::vector<FileCheck> out;
    std::copy_if(entries.begin(), entries.end(), std::back_inserter(out),
                 [](const auto& e) { return e.status != FileStatus::Ok; });
    return out;
  }

  std::string to_text() const {
    std::string out;
    std::size_t ok = 0;
    for (const auto& e : entries) {
      if (e.status == FileStatus::Ok) {
        ++ok;
        continue;
      }
      out += std::string(status_name(e.status)) + "\t" + e.key.str();
      if (!e.detail.empty()) out += "\t" + e.detail;
      out += "\n";
    }
    out += (pass() ? "PASS" : "FAIL") + std::string(": ") + std::to_string(ok) + "/" +
           std::to_string(entries.size()) + " feature files consistent\n";
    return out;
  }
};

// Checks that every (encoder, layer, sample, season) tuple resolves to a
// readable file whose header matches the declared dims. Never throws for
// store problems; they become report entries.
inline ValidationReport validate_store(const Manifest& m) {
  ValidationReport report;
  for (const auto& enc : m.encoders)
    for (const auto& layer : enc.layers)
      for (const auto& sample : m.sample_ids)
        for (std::uint32_t s = 0; s < m.seasons_per_sample; ++s) {
          FileCheck check{FeatureKey{enc.encoder_id, layer.tag, sample, s}, FileStatus::Ok, {}};
          const auto it = m.feature_files.find(check.key);
          if (it == m.feature_files.end()) {
            check.status = FileStatus::Unmapped;
          } else if (const auto path = m.resolve(it->second); !std::filesystem::exists(path)) {
            check.status = FileStatus::Missing;
            check.detail = path.string();
          } else {
            try {
              const auto decoded = read_feature_file(path);
              if (!(decoded.layout == layer.layout)) {
                check.status = FileStatus::HeaderMismatch;
                check.detail = "expected " + describe(layer.layout) + " found " + describe(decoded.layout);
              }
            } catch (const Error& e) {
              check.status = FileStatus::Corrupt;
              check.detail = e.what();
            }
          }
          report.entries.push_back(std::move(check));
        }
  return report;
}

}  // namespace probebench
