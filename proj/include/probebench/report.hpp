#pragma once

// Leaderboards, layer curves, concatenation deltas, compression accounting
// and the deterministic report bundle writer.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "probebench/detail/binary.hpp"
#include "probebench/detail/text.hpp"
#include "probebench/error.hpp"
#include "probebench/metrics.hpp"

namespace probebench {

// ---------------------------------------------------------------------------
// Compression accounting

struct RawInputSpec {
  std::uint64_t timesteps = 4;
  std::uint64_t bands = 13;
  std::uint64_t height = 264;
  std::uint64_t width = 264;
  std::uint64_t bytes_per_element = 2;

  void validate() const {
    if (timesteps < 1 || bands < 1 || height < 1 || width < 1 || bytes_per_element < 1)
      throw InvariantError("raw input spec: all fields must be >= 1");
  }
  std::uint64_t total_bytes() const { return timesteps * bands * height * width * bytes_per_element; }
};

inline double compression_ratio(const RawInputSpec& raw, std::uint64_t embedding_dim,
                                std::uint64_t embedding_bytes_per_element) {
  raw.validate();
  if (embedding_dim < 1 || embedding_bytes_per_element < 1)
    throw InvariantError("compression_ratio: embedding size must be positive");
  return static_cast<double>(raw.total_bytes()) / static_cast<double>(embedding_dim * embedding_bytes_per_element);
}

// Typical fixed-size EO embeddings land between roughly 500x and beyond
// 2000x; "roughly" is taken as a 10% allowance below the lower edge.
inline constexpr double kTypicalCompressionLow = 500.0;
inline constexpr double kTypicalCompressionHigh = 2000.0;

inline bool within_typical_compression(double ratio) { return ratio >= 0.9 * kTypicalCompressionLow; }

// ---------------------------------------------------------------------------
// Leaderboards

enum class Mark { None, Best, Second };

struct MethodScores {
  std::string method_id;
  std::map<std::string, double> per_task;
};

struct LeaderboardRow {
  std::string method_id;
  std::vector<double> scores;  // in Leaderboard::tasks order
  double avg = 0.0;
  std::vector<Mark> marks;
  Mark avg_mark = Mark::None;
};

struct Leaderboard {
  std::vector<std::string> tasks;
  std::vector<LeaderboardRow> rows;  // ascending by avg, ties by method id
};

namespace detail {

// Ranking happens on values as displayed (3 decimals), so equal printed
// values share a mark. Best is the top distinct value, second the next one.
inline std::vector<Mark> rank_marks(const std::vector<double>& column) {
  std::vector<double> shown;
  for (double v : column) shown.push_back(std::round(v * 1000.0) / 1000.0);
  std::vector<double> distinct = shown;
  std::sort(distinct.begin(), distinct.end(), std::greater<>());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::vector<Mark> marks(column.size(), Mark::None);
  for (std::size_t i = 0; i < shown.size(); ++i) {
    if (shown[i] == distinct[0])
      marks[i] = Mark::Best;
    else if (distinct.size() > 1 && shown[i] == distinct[1])
      marks[i] = Mark::Second;
  }
  return marks;
}

}  // namespace detail

// `task_order` fixes column order; empty means the methods' (sorted) task set.
inline Leaderboard leaderboard(const std::vector<MethodScores>& methods, std::vector<std::string> task_order = {}) {
  if (methods.empty()) throw InvariantError("leaderboard: no methods");
  std::set<std::string> task_set;
  for (const auto& [t, v] : methods.front().per_task) task_set.insert(t);
  if (task_set.empty()) throw InvariantError("leaderboard: no tasks");
  for (const auto& m : methods) {
    std::set<std::string> mine;
    for (const auto& [t, v] : m.per_task) mine.insert(t);
    if (mine != task_set) throw InvariantError("leaderboard: method '" + m.method_id + "' has a different task set");
  }
  if (task_order.empty()) task_order.assign(task_set.begin(), task_set.end());
  if (std::set<std::string>(task_order.begin(), task_order.end()) != task_set || task_order.size() != task_set.size())
    throw InvariantError("leaderboard: task order does not match the task set");

  Leaderboard lb{task_order, {}};
  std::set<std::string> ids;
  for (const auto& m : methods) {
    if (!ids.insert(m.method_id).second) throw InvariantError("leaderboard: duplicate method '" + m.method_id + "'");
    LeaderboardRow row{m.method_id, {}, task_average(m.per_task, false), {}, Mark::None};
    for (const auto& t : task_order) row.scores.push_back(m.per_task.at(t));
    lb.rows.push_back(std::move(row));
  }
  std::sort(lb.rows.begin(), lb.rows.end(), [](const auto& a, const auto& b) {
    return a.avg != b.avg ? a.avg < b.avg : a.method_id < b.method_id;
  });

  for (auto& r : lb.rows) r.marks.assign(task_order.size(), Mark::None);
  for (std::size_t c = 0; c <= task_order.size(); ++c) {
    std::vector<double> column;
    for (const auto& r : lb.rows) column.push_back(c < task_order.size() ? r.scores[c] : r.avg);
    const auto marks = detail::rank_marks(column);
    for (std::size_t i = 0; i < lb.rows.size(); ++i)
      (c < task_order.size() ? lb.rows[i].marks[c] : lb.rows[i].avg_mark) = marks[i];
  }
  return lb;
}

inline std::string render_leaderboard_markdown(const Leaderboard& lb, std::string_view title,
                                               const std::vector<std::string>& header_lines = {}) {
  auto cell = [](double v, Mark m) {
    const auto s = detail::fmt_fixed3(v);
    if (m == Mark::Best) return "**" + s + "**";
    if (m == Mark::Second) return "<u>" + s + "</u>";
    return s;
  };
  std::ostringstream os;
  os << "# " << title << "\n\n";
  for (const auto& h : header_lines) os << "<!-- " << h << " -->\n";
  if (!header_lines.empty()) os << "\n";
  os << "Sorted ascending by Avg. **bold** = best per column, <u>underlined</u> = second best.\n\n";
  os << "| Method |";
  for (const auto& t : lb.tasks) os << " " << t << " |";
  os << " Avg |\n|---|";
  for (std::size_t i = 0; i < lb.tasks.size(); ++i) os << "---:|";
  os << "---:|\n";
  for (const auto& r : lb.rows) {
    os << "| " << r.method_id << " |";
    for (std::size_t i = 0; i < r.scores.size(); ++i) os << " " << cell(r.scores[i], r.marks[i]) << " |";
    os << " " << cell(r.avg, r.avg_mark) << " |\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Layer curves

struct LayerScores {
  std::string layer_tag;
  std::string method_id;
  std::map<std::string, double> per_task;
};

struct CurvePoint {
  std::string layer_tag;
  std::string method_id;
  double value = 0.0;
};

// One point per layer: the task average, each task clipped at zero first
// when `clip` is set. Input order (shallow to deep) is preserved.
inline std::vector<CurvePoint> layer_curve(const std::vector<LayerScores>& layers, bool clip = true) {
  if (layers.empty()) throw InvariantError("layer_curve: no layers");
  std::vector<CurvePoint> out;
  for (const auto& l : layers) out.push_back({l.layer_tag, l.method_id, task_average(l.per_task, clip)});
  return out;
}

// ---------------------------------------------------------------------------
// Report bundle

struct LayerCurveSpec {
  std::string name;
  std::vector<std::string> method_ids;  // shallow to deep
};

struct DeltaSpec {
  std::string concat_id;
  std::string a_id;
  std::string b_id;
};

struct MethodInfo {
  std::string method_id;
  std::string layer_tag;  // empty for concatenations
  std::size_t dim = 0;
};

struct ReportBundle {
  nlohmann::json meta;                  // run metadata, emitted verbatim (keys sorted)
  std::vector<std::string> task_order;  // canonical task order
  std::vector<MethodInfo> methods;      // canonical method order
  std::vector<ScoreSummary> summaries;  // one per (method, task), any order
  std::vector<LayerCurveSpec> layer_curves;
  std::vector<DeltaSpec> deltas;
  RawInputSpec raw;
  std::uint64_t embedding_bytes_per_element = 4;
  std::vector<Metric> metrics{Metric::MeanR2, Metric::QScore};  // leaderboards and radar matrices
};

enum ReportFormat : unsigned {
  kDelimitedText = 1u << 0,  // *.tsv
  kStructuredText = 1u << 1, // *.json
  kPlainTable = 1u << 2,     // *.md, compression.txt
  kAllFormats = kDelimitedText | kStructuredText | kPlainTable,
};

namespace detail {

inline std::vector<std::string> meta_header_lines(const nlohmann::json& meta) {
  std::vector<std::string> lines;
  for (const char* key : {"config_hash", "base_seed", "k", "sigma_estimator", "train_fraction", "epsilon"})
    if (meta.contains(key)) lines.push_back(std::string(key) + "=" + (meta[key].is_string() ? meta[key].get<std::string>() : meta[key].dump()));
  return lines;
}

inline std::string comment_block(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += "# " + l + "\n";
  return out;
}

}  // namespace detail

// Canonical lookup: method order x task order.
class SummaryIndex {
public:
  explicit SummaryIndex(const ReportBundle& b) {
    for (const auto& s : b.summaries) {
      if (!by_key_.emplace(std::pair{s.method_id, s.task_id}, &s).second)
        throw InvariantError("report: duplicate summary for " + s.method_id + "/" + s.task_id);
    }
    for (const auto& m : b.methods)
      for (const auto& t : b.task_order)
        if (!by_key_.contains({m.method_id, t}))
          throw InvariantError("report: missing summary for " + m.method_id + "/" + t);
  }

  const ScoreSummary& at(const std::string& method, const std::string& task) const {
    const auto it = by_key_.find({method, task});
    if (it == by_key_.end()) throw InvariantError("report: no summary for " + method + "/" + task);
    return *it->second;
  }

  TaskSummaries for_method(const std::string& method, const std::vector<std::string>& tasks) const {
    TaskSummaries out;
    for (const auto& t : tasks) out[t] = at(method, t);
    return out;
  }

private:
  std::map<std::pair<std::string, std::string>, const ScoreSummary*> by_key_;
};

inline std::string render_scores_raw(const ReportBundle& b) {
  SummaryIndex idx(b);
  std::string out = detail::comment_block(detail::meta_header_lines(b.meta));
  out += "task_id\tmethod_id\tsplit_index\tr2\n";
  for (const auto& m : b.methods)
    for (const auto& t : b.task_order) {
      const auto& s = idx.at(m.method_id, t);
      for (std::size_t k = 0; k < s.scores.size(); ++k)
        out += t + "\t" + m.method_id + "\t" + std::to_string(k) + "\t" + detail::fmt_sig9(s.scores[k]) + "\n";
    }
  return out;
}

inline std::string render_summaries_tsv(const ReportBundle& b) {
  SummaryIndex idx(b);
  std::string out = detail::comment_block(detail::meta_header_lines(b.meta));
  out += "task_id\tmethod_id\tmean_r2\tstd\tq_score\tK\tepsilon\n";
  for (const auto& m : b.methods)
    for (const auto& t : b.task_order) {
      const auto& s = idx.at(m.method_id, t);
      out += t + "\t" + m.method_id + "\t" + detail::fmt_sig9(s.mean_r2) + "\t" + detail::fmt_sig9(s.std) + "\t" +
             detail::fmt_sig9(s.q_score) + "\t" + std::to_string(s.scores.size()) + "\t" +
             detail::fmt_sig9(s.epsilon) + "\n";
    }
  return out;
}

inline std::string render_summaries_json(const ReportBundle& b) {
  SummaryIndex idx(b);
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& m : b.methods)
    for (const auto& t : b.task_order) {
      const auto& s = idx.at(m.method_id, t);
      rows.push_back({{"task_id", t},
                      {"method_id", m.method_id},
                      {"mean_r2", detail::fmt_sig9(s.mean_r2)},
                      {"std", detail::fmt_sig9(s.std)},
                      {"q_score", detail::fmt_sig9(s.q_score)},
                      {"K", s.scores.size()},
                      {"epsilon", detail::fmt_sig9(s.epsilon)}});
    }
  return nlohmann::json{{"summaries", rows}}.dump(2) + "\n";
}

inline Leaderboard bundle_leaderboard(const ReportBundle& b, Metric metric) {
  SummaryIndex idx(b);
  std::vector<MethodScores> rows;
  for (const auto& m : b.methods) rows.push_back({m.method_id, metric_by_task(idx.for_method(m.method_id, b.task_order), metric)});
  return leaderboard(rows, b.task_order);
}

// Wide method x task matrices with negatives clipped, ready for radar plots.
inline std::string render_radar_tsv(const ReportBundle& b, Metric metric) {
  SummaryIndex idx(b);
  auto lines = detail::meta_header_lines(b.meta);
  lines.push_back("metric=" + std::string(metric_name(metric)));
  lines.push_back("negative values clipped to 0");
  std::string out = detail::comment_block(lines);
  out += "method_id";
  for (const auto& t : b.task_order) out += "\t" + t;
  out += "\n";
  for (const auto& m : b.methods) {
    out += m.method_id;
    for (const auto& t : b.task_order) out += "\t" + detail::fmt_sig9(clip_nonneg(metric_value(idx.at(m.method_id, t), metric)));
    out += "\n";
  }
  return out;
}

inline std::string render_layer_curves(const ReportBundle& b) {
  SummaryIndex idx(b);
  std::map<std::string, const MethodInfo*> info;
  for (const auto& m : b.methods) info[m.method_id] = &m;
  auto lines = detail::meta_header_lines(b.meta);
  lines.push_back("task averages with negative task values clipped to 0");
  std::string out = detail::comment_block(lines);
  out += "series\tpoint\tlayer_tag\tmethod_id\tdim\tr2_clipped_avg\tq_clipped_avg\n";
  for (const auto& spec : b.layer_curves) {
    std::vector<LayerScores> r2_layers, q_layers;
    for (const auto& id : spec.method_ids) {
      if (!info.contains(id)) throw InvariantError("layer curve '" + spec.name + "': unknown method '" + id + "'");
      const auto summaries = idx.for_method(id, b.task_order);
      r2_layers.push_back({info[id]->layer_tag, id, metric_by_task(summaries, Metric::MeanR2)});
      q_layers.push_back({info[id]->layer_tag, id, metric_by_task(summaries, Metric::QScore)});
    }
    const auto r2_curve = layer_curve(r2_layers, true);
    const auto q_curve = layer_curve(q_layers, true);
    for (std::size_t i = 0; i < r2_curve.size(); ++i)
      out += spec.name + "\t" + std::to_string(i) + "\t" + r2_curve[i].layer_tag + "\t" + r2_curve[i].method_id + "\t" +
             std::to_string(info[r2_curve[i].method_id]->dim) + "\t" + detail::fmt_sig9(r2_curve[i].value) + "\t" +
             detail::fmt_sig9(q_curve[i].value) + "\n";
  }
  return out;
}

inline std::string render_deltas(const ReportBundle& b) {
  SummaryIndex idx(b);
  auto lines = detail::meta_header_lines(b.meta);
  lines.push_back("delta = concat - max(a, b); AVG rows compare unclipped task averages");
  std::string out = detail::comment_block(lines);
  out += "concat_id\ta_id\tb_id\tmetric\ttask_id\tconcat\tbaseline\tdelta\n";
  for (const auto& d : b.deltas) {
    const auto c = idx.for_method(d.concat_id, b.task_order);
    const auto a = idx.for_method(d.a_id, b.task_order);
    const auto bb = idx.for_method(d.b_id, b.task_order);
    const auto delta = delta_vs_stronger(c, a, bb);
    for (const auto metric : {Metric::MeanR2, Metric::QScore}) {
      const auto& md = metric == Metric::MeanR2 ? delta.mean_r2 : delta.q_score;
      const auto cv = metric_by_task(c, metric), av = metric_by_task(a, metric), bv = metric_by_task(bb, metric);
      const std::string prefix = d.concat_id + "\t" + d.a_id + "\t" + d.b_id + "\t" + std::string(metric_name(metric)) + "\t";
      for (const auto& t : b.task_order)
        out += prefix + t + "\t" + detail::fmt_sig9(cv.at(t)) + "\t" + detail::fmt_sig9(std::max(av.at(t), bv.at(t))) +
               "\t" + detail::fmt_sig9(md.per_task.at(t)) + "\n";
      const double cavg = task_average(cv, false);
      out += prefix + "AVG\t" + detail::fmt_sig9(cavg) + "\t" +
             detail::fmt_sig9(std::max(task_average(av, false), task_average(bv, false))) + "\t" +
             detail::fmt_sig9(md.overall) + "\n";
    }
  }
  return out;
}

inline std::string render_compression(const ReportBundle& b) {
  std::ostringstream os;
  const auto& r = b.raw;
  os << "Compression accounting\n\n"
     << "Assumptions:\n"
     << "  raw input: " << r.timesteps << " timesteps x " << r.bands << " bands x " << r.height << " x " << r.width
     << " pixels x " << r.bytes_per_element << " bytes = " << r.total_bytes() << " bytes per sample\n"
     << "  embedding: " << b.embedding_bytes_per_element << " bytes per element\n"
     << "  typical band for fixed-size EO embeddings: roughly " << kTypicalCompressionLow << "x to over "
     << kTypicalCompressionHigh << "x\n\n";
  os << "method_id\tdim\tembedding_bytes\tratio\twithin_typical_band\n";
  for (const auto& m : b.methods) {
    const double ratio = compression_ratio(r, m.dim, b.embedding_bytes_per_element);
    os << m.method_id << "\t" << m.dim << "\t" << m.dim * b.embedding_bytes_per_element << "\t"
       << detail::fmt_sig9(ratio) << "\t" << (within_typical_compression(ratio) ? "yes" : "no") << "\n";
  }
  return os.str();
}

// Writes every report file into `dir`. Output bytes depend only on the bundle.
inline std::vector<std::filesystem::path> emit_report(const ReportBundle& b, const std::filesystem::path& dir,
                                                      unsigned formats = kAllFormats) {
  if (b.summaries.empty() || b.methods.empty() || b.task_order.empty())
    throw InvariantError("emit_report: empty bundle");
  if (formats == 0) throw InvariantError("emit_report: no output format selected");
  std::vector<std::pair<std::string, std::string>> files;
  const auto header = detail::meta_header_lines(b.meta);
  if (formats & kDelimitedText) {
    files.emplace_back("scores_raw.tsv", render_scores_raw(b));
    files.emplace_back("summaries.tsv", render_summaries_tsv(b));
    files.emplace_back("layer_curves.tsv", render_layer_curves(b));
    files.emplace_back("deltas.tsv", render_deltas(b));
    for (const auto m : b.metrics)
      files.emplace_back("radar_" + std::string(metric_name(m)) + ".tsv", render_radar_tsv(b, m));
  }
  if (formats & kStructuredText) {
    files.emplace_back("run_meta.json", b.meta.dump(2) + "\n");
    files.emplace_back("summaries.json", render_summaries_json(b));
  }
  if (formats & kPlainTable) {
    for (const auto m : b.metrics)
      files.emplace_back("leaderboard_" + std::string(metric_name(m)) + ".md",
                         render_leaderboard_markdown(bundle_leaderboard(b, m),
                                                     m == Metric::MeanR2 ? "Leaderboard: mean R^2" : "Leaderboard: Q-score",
                                                     header));
    files.emplace_back("compression.txt", render_compression(b));
  }
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  for (const auto& [name, text] : files) {
    detail::write_file_text(dir / name, text);
    written.push_back(dir / name);
  }
  return written;
}

}  // namespace probebench
