#pragma once

// Turning feature tensors into fixed-size embeddings: spatial/token pooling,
// CLS selection, temporal mean over seasons, channel-wise resizing and
// concatenation. Every result carries a provenance record describing exactly
// how it was derived.
//
// Embedding archive layout (little-endian):
//
//   "PBEV" | format_version u32 | dim u64 | count u64 | meta_len u64 |
//   meta (JSON, meta_len bytes) | count*dim binary64 values, row-major
//
// The JSON meta block holds the method id, the provenance tree and the sample
// ids in row order.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "probebench/detail/binary.hpp"
#include "probebench/error.hpp"
#include "probebench/store.hpp"

namespace probebench {

enum class Pooling { Mean, Min, Max, Cls };

inline std::string_view pooling_name(Pooling p) {
  switch (p) {
    case Pooling::Mean: return "MEAN";
    case Pooling::Min: return "MIN";
    case Pooling::Max: return "MAX";
    case Pooling::Cls: return "CLS";
  }
  return "?";
}

inline Pooling parse_pooling(std::string_view s) {
  if (s == "MEAN") return Pooling::Mean;
  if (s == "MIN") return Pooling::Min;
  if (s == "MAX") return Pooling::Max;
  if (s == "CLS") return Pooling::Cls;
  throw FormatError("unknown pooling '" + std::string(s) + "' (expected MEAN, MIN, MAX or CLS)");
}

// PER_SEASON(index) when `season` is set, MEAN_OVER_SEASONS otherwise.
struct Temporal {
  std::optional<std::uint32_t> season;

  static Temporal per_season(std::uint32_t i) { return {i}; }
  static Temporal mean_over_seasons() { return {}; }
  bool is_mean() const { return !season.has_value(); }
  friend bool operator==(const Temporal&, const Temporal&) = default;
};

struct ProvenanceRecord {
  std::string encoder_id;
  std::string layer_tag;
  Pooling pooling = Pooling::Mean;
  Temporal temporal;
  std::optional<std::size_t> resized_to;
  std::vector<ProvenanceRecord> children;  // non-empty => concatenation, in order
  std::size_t dim = 0;

  bool is_concat() const { return !children.empty(); }
  friend bool operator==(const ProvenanceRecord&, const ProvenanceRecord&) = default;
};

struct EmbeddingVector {
  std::vector<double> values;
  ProvenanceRecord provenance;

  std::size_t dim() const { return values.size(); }
};

inline nlohmann::json provenance_to_json(const ProvenanceRecord& p) {
  nlohmann::json j;
  j["dim"] = p.dim;
  if (p.is_concat()) {
    j["concat"] = nlohmann::json::array();
    for (const auto& c : p.children) j["concat"].push_back(provenance_to_json(c));
  } else {
    j["encoder"] = p.encoder_id;
    j["layer"] = p.layer_tag;
    j["pooling"] = pooling_name(p.pooling);
    if (p.temporal.is_mean())
      j["temporal"] = "MEAN_OVER_SEASONS";
    else
      j["temporal"] = "PER_SEASON(" + std::to_string(*p.temporal.season) + ")";
  }
  if (p.resized_to) j["resized"] = *p.resized_to;
  return j;
}

inline ProvenanceRecord provenance_from_json(const nlohmann::json& j) {
  using detail::require;
  ProvenanceRecord p;
  p.dim = require<std::size_t>(j, "dim", "provenance");
  if (j.contains("concat")) {
    for (const auto& c : j.at("concat")) p.children.push_back(provenance_from_json(c));
  } else {
    p.encoder_id = require<std::string>(j, "encoder", "provenance");
    p.layer_tag = require<std::string>(j, "layer", "provenance");
    p.pooling = parse_pooling(require<std::string>(j, "pooling", "provenance"));
    const auto t = require<std::string>(j, "temporal", "provenance");
    if (t == "MEAN_OVER_SEASONS") {
      p.temporal = Temporal::mean_over_seasons();
    } else if (t.starts_with("PER_SEASON(") && t.ends_with(")")) {
      p.temporal = Temporal::per_season(static_cast<std::uint32_t>(std::stoul(t.substr(11, t.size() - 12))));
    } else {
      throw FormatError("provenance: bad temporal '" + t + "'");
    }
  }
  if (j.contains("resized")) p.resized_to = j.at("resized").get<std::size_t>();
  return p;
}

// ---------------------------------------------------------------------------
// Pooling

namespace detail {

inline void check_finite(std::span<const double> v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw InvariantError(std::string(what) + ": non-finite value");
}

}  // namespace detail

// GRID: one value per channel over its H*W cells. TOKENS: one value per
// coordinate over the patch tokens; a CLS token (index 0) is never pooled.
inline EmbeddingVector pool_spatial(const FeatureTensor& t, Pooling mode, std::string_view encoder_id = {}) {
  if (mode == Pooling::Cls) throw InvariantError("pool_spatial: CLS is a selection, use select_cls");
  validate_tensor(t, "pool_spatial");

  std::size_t outputs, first, count, stride_item, stride_out;
  if (const auto* g = std::get_if<GridShape>(&t.layout)) {
    outputs = g->channels;
    first = 0;
    count = std::size_t{g->height} * g->width;
    stride_item = 1;      // cells of one channel are contiguous
    stride_out = count;   // channel-major
  } else {
    const auto& s = std::get<TokenShape>(t.layout);
    outputs = s.dim;
    first = s.has_cls ? 1 : 0;
    count = s.tokens - first;
    stride_item = s.dim;  // token-major
    stride_out = 1;
    if (count == 0) throw InvariantError("pool_spatial: no patch tokens left after excluding CLS");
  }

  EmbeddingVector out;
  out.values.resize(outputs);
  for (std::size_t o = 0; o < outputs; ++o) {
    const float* base = t.values.data() + o * stride_out + first * stride_item;
    double acc = base[0];
    for (std::size_t i = 1; i < count; ++i) {
      const double v = base[i * stride_item];
      switch (mode) {
        case Pooling::Mean: acc += v; break;
        case Pooling::Min: acc = std::min(acc, v); break;
        case Pooling::Max: acc = std::max(acc, v); break;
        case Pooling::Cls: break;
      }
    }
    out.values[o] = mode == Pooling::Mean ? acc / static_cast<double>(count) : acc;
  }
  out.provenance = {std::string(encoder_id), t.layer_tag, mode, Temporal::per_season(t.season_index), {}, {}, outputs};
  return out;
}

inline EmbeddingVector select_cls(const FeatureTensor& t, std::string_view encoder_id = {}) {
  const auto* s = std::get_if<TokenShape>(&t.layout);
  if (!s) throw InvariantError("select_cls: GRID tensors have no CLS token");
  if (!s->has_cls) throw InvariantError("select_cls: tensor declares no CLS token");
  validate_tensor(t, "select_cls");
  EmbeddingVector out;
  out.values.assign(t.values.begin(), t.values.begin() + s->dim);
  out.provenance = {std::string(encoder_id), t.layer_tag, Pooling::Cls, Temporal::per_season(t.season_index), {}, {}, s->dim};
  return out;
}

inline EmbeddingVector pool(const FeatureTensor& t, Pooling mode, std::string_view encoder_id = {}) {
  return mode == Pooling::Cls ? select_cls(t, encoder_id) : pool_spatial(t, mode, encoder_id);
}

// ---------------------------------------------------------------------------
// Temporal aggregation, resizing, concatenation

inline EmbeddingVector temporal_mean(std::span<const EmbeddingVector> per_season) {
  if (per_season.empty()) throw InvariantError("temporal_mean: empty list");
  const auto dim = per_season.front().dim();
  auto reference = per_season.front().provenance;
  reference.temporal = Temporal::mean_over_seasons();

  EmbeddingVector out;
  out.values.assign(dim, 0.0);
  for (const auto& e : per_season) {
    if (e.dim() != dim)
      throw InvariantError("temporal_mean: dim mismatch (" + std::to_string(e.dim()) + " vs " + std::to_string(dim) + ")");
    if (e.provenance.temporal.is_mean()) throw InvariantError("temporal_mean: input is already season-averaged");
    auto p = e.provenance;
    p.temporal = Temporal::mean_over_seasons();
    if (!(p == reference)) throw InvariantError("temporal_mean: provenance differs beyond the season index");
    detail::check_finite(e.values, "temporal_mean");
    for (std::size_t i = 0; i < dim; ++i) out.values[i] += e.values[i];
  }
  const auto n = static_cast<double>(per_season.size());
  for (auto& v : out.values) v /= n;
  out.provenance = std::move(reference);
  return out;
}

// Output j is the mean of source entries [j*g, (j+1)*g) with g = dim / target_dim.
inline EmbeddingVector resize_channelwise(const EmbeddingVector& e, std::size_t target_dim) {
  if (target_dim == 0 || e.dim() % target_dim != 0)
    throw InvariantError("resize_channelwise: target " + std::to_string(target_dim) + " does not divide dim " +
                         std::to_string(e.dim()));
  detail::check_finite(e.values, "resize_channelwise");
  const std::size_t group = e.dim() / target_dim;
  EmbeddingVector out;
  out.values.resize(target_dim);
  for (std::size_t j = 0; j < target_dim; ++j) {
    double acc = 0.0;
    for (std::size_t i = j * group; i < (j + 1) * group; ++i) acc += e.values[i];
    out.values[j] = acc / static_cast<double>(group);
  }
  out.provenance = e.provenance;
  out.provenance.resized_to = target_dim;
  out.provenance.dim = target_dim;
  return out;
}

inline EmbeddingVector concat(std::span<const EmbeddingVector> parts) {
  if (parts.size() < 2) throw InvariantError("concat: needs at least 2 parts");
  EmbeddingVector out;
  for (const auto& p : parts) {
    detail::check_finite(p.values, "concat");
    out.values.insert(out.values.end(), p.values.begin(), p.values.end());
    out.provenance.children.push_back(p.provenance);
  }
  out.provenance.dim = out.values.size();
  return out;
}

// Offsets of each concatenated child inside the parent vector, plus the end.
inline std::vector<std::size_t> child_offsets(const ProvenanceRecord& p) {
  std::vector<std::size_t> offsets{0};
  for (const auto& c : p.children) offsets.push_back(offsets.back() + c.dim);
  return offsets;
}

// ---------------------------------------------------------------------------
// Embedding archives: one row per sample, in manifest order.

inline constexpr std::string_view kArchiveMagic = "PBEV";

struct EmbeddingArchive {
  std::string method_id;
  ProvenanceRecord provenance;
  std::vector<std::string> sample_ids;
  std::size_t dim = 0;
  std::vector<double> values;  // sample_ids.size() x dim, row-major

  std::size_t count() const { return sample_ids.size(); }
  std::span<const double> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
};

inline std::vector<char> encode_archive(const EmbeddingArchive& a) {
  if (a.dim == 0) throw InvariantError("archive '" + a.method_id + "': dim must be >= 1");
  if (a.values.size() != a.count() * a.dim)
    throw InvariantError("archive '" + a.method_id + "': value count does not match rows x dim");
  detail::check_finite(a.values, "archive");
  nlohmann::json meta;
  meta["method_id"] = a.method_id;
  meta["provenance"] = provenance_to_json(a.provenance);
  meta["sample_ids"] = a.sample_ids;
  const std::string meta_text = meta.dump();

  detail::ByteWriter w;
  w.bytes(kArchiveMagic);
  w.uint<std::uint32_t>(kFormatVersion);
  w.uint<std::uint64_t>(a.dim);
  w.uint<std::uint64_t>(a.count());
  w.uint<std::uint64_t>(meta_text.size());
  w.bytes(meta_text);
  for (double v : a.values) w.f64(v);
  return w.data();
}

inline EmbeddingArchive decode_archive(std::span<const char> bytes, const std::string& ctx) {
  detail::ByteReader r(bytes, ctx);
  if (r.bytes(4) != kArchiveMagic) throw FormatError(ctx + ": bad magic (expected PBEV)");
  if (const auto v = r.uint<std::uint32_t>(); v != kFormatVersion)
    throw FormatError(ctx + ": unsupported format_version " + std::to_string(v));
  EmbeddingArchive a;
  a.dim = r.uint<std::uint64_t>();
  const auto count = r.uint<std::uint64_t>();
  const auto meta_len = r.uint<std::uint64_t>();
  if (meta_len > r.remaining()) throw FormatError(ctx + ": truncated meta block");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(r.bytes(meta_len));
    a.method_id = meta.at("method_id").get<std::string>();
    a.provenance = provenance_from_json(meta.at("provenance"));
    a.sample_ids = meta.at("sample_ids").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(ctx + ": bad meta block: " + e.what());
  }
  if (a.sample_ids.size() != count) throw FormatError(ctx + ": header count disagrees with sample ids");
  if (r.remaining() != count * a.dim * 8)
    throw FormatError(ctx + ": payload is " + std::to_string(r.remaining()) + " bytes, header implies " +
                      std::to_string(count * a.dim * 8));
  a.values.resize(count * a.dim);
  for (auto& v : a.values) v = r.f64();
  return a;
}

inline void write_archive(const EmbeddingArchive& a, const std::filesystem::path& path) {
  detail::write_file_bytes(path, encode_archive(a));
}

inline EmbeddingArchive read_archive(const std::filesystem::path& path) {
  return decode_archive(detail::read_file_bytes(path), path.string());
}

}  // namespace probebench
