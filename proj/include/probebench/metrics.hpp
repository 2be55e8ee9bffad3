#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "probebench/error.hpp"

namespace probebench {

inline constexpr double kQualityEpsilon = 0.02;

enum class SigmaEstimator { Population, Sample };

inline std::string_view sigma_name(SigmaEstimator s) {
  return s == SigmaEstimator::Population ? "population" : "sample";
}

inline SigmaEstimator parse_sigma(std::string_view s) {
  if (s == "population") return SigmaEstimator::Population;
  if (s == "sample") return SigmaEstimator::Sample;
  throw FormatError("unknown sigma estimator '" + std::string(s) + "' (expected population or sample)");
}

// Coefficient of determination on one held-out vector. Throws
// UndefinedScore when y_true is constant, since 1 - SS_res/0 has no value.
inline double r2(std::span<const double> y_true, std::span<const double> y_pred) {
  if (y_true.size() != y_pred.size()) throw InvariantError("r2: length mismatch");
  if (y_true.size() < 2) throw InvariantError("r2: needs at least 2 values");
  double mean = 0.0;
  for (double y : y_true) mean += y;
  mean /= static_cast<double>(y_true.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const double r = y_true[i] - y_pred[i];
    const double c = y_true[i] - mean;
    ss_res += r * r;
    ss_tot += c * c;
  }
  if (ss_tot == 0.0) throw UndefinedScore("r2: constant y_true (SS_tot = 0)");
  return 1.0 - ss_res / ss_tot;
}

// Same as r2, except that a constant test vector predicted exactly scores 1.
// Anything else on a constant vector is left undefined and throws.
inline double split_score(std::span<const double> y_true, std::span<const double> y_pred) {
  try {
    return r2(y_true, y_pred);
  } catch (const UndefinedScore&) {
    for (std::size_t i = 0; i < y_true.size(); ++i)
      if (y_true[i] != y_pred[i]) throw;
    return 1.0;
  }
}

// Written as 100 * mean * (eps / (std + eps)) so that std = 0 yields exactly
// 100 * mean in floating point.
inline double quality_score(double mean_r2, double std, double epsilon = kQualityEpsilon) {
  if (!(epsilon > 0.0) || std < 0.0) throw InvariantError("quality_score: need epsilon > 0 and std >= 0");
  return 100.0 * mean_r2 * (epsilon / (std + epsilon));
}

struct ScoreSummary {
  std::string task_id;
  std::string method_id;
  std::vector<double> scores;
  double mean_r2 = 0.0;
  double std = 0.0;
  double q_score = 0.0;
  double epsilon = kQualityEpsilon;
};

struct SummaryStats {
  double mean = 0.0;
  double std = 0.0;
  double q = 0.0;
};

inline SummaryStats summarize(std::span<const double> scores, SigmaEstimator sigma = SigmaEstimator::Population,
                              double epsilon = kQualityEpsilon) {
  if (scores.empty()) throw InvariantError("summarize: empty score list");
  const auto k = static_cast<double>(scores.size());
  // shifted by the first score: exact for constant lists, better conditioned otherwise
  const double shift = scores.front();
  double offset = 0.0;
  for (double s : scores) offset += s - shift;
  const double mean = shift + offset / k;
  double ss = 0.0;
  for (double s : scores) ss += (s - mean) * (s - mean);
  double std = 0.0;
  if (scores.size() > 1) std = std::sqrt(ss / (sigma == SigmaEstimator::Population ? k : k - 1.0));
  return {mean, std, quality_score(mean, std, epsilon)};
}

inline ScoreSummary make_summary(std::string task_id, std::string method_id, std::vector<double> scores,
                                 SigmaEstimator sigma = SigmaEstimator::Population, double epsilon = kQualityEpsilon) {
  const auto st = summarize(scores, sigma, epsilon);
  return {std::move(task_id), std::move(method_id), std::move(scores), st.mean, st.std, st.q, epsilon};
}

inline double clip_nonneg(double x) { return std::max(x, 0.0); }

inline double task_average(const std::map<std::string, double>& per_task, bool clip) {
  if (per_task.empty()) throw InvariantError("task_average: no tasks");
  double acc = 0.0;
  for (const auto& [task, v] : per_task) acc += clip ? clip_nonneg(v) : v;
  return acc / static_cast<double>(per_task.size());
}

enum class Metric { MeanR2, QScore };

inline std::string_view metric_name(Metric m) { return m == Metric::MeanR2 ? "r2" : "q"; }

inline double metric_value(const ScoreSummary& s, Metric m) { return m == Metric::MeanR2 ? s.mean_r2 : s.q_score; }

// task_id -> summary for one method.
using TaskSummaries = std::map<std::string, ScoreSummary>;

inline std::map<std::string, double> metric_by_task(const TaskSummaries& s, Metric m) {
  std::map<std::string, double> out;
  for (const auto& [task, summary] : s) out[task] = metric_value(summary, m);
  return out;
}

struct MetricDelta {
  std::map<std::string, double> per_task;  // concat_t - max(a_t, b_t)
  double overall = 0.0;                    // avg(concat) - max(avg(a), avg(b)), unclipped
};

struct ConcatDelta {
  MetricDelta mean_r2;
  MetricDelta q_score;
};

// Gain of a concatenated embedding over the stronger of its two inputs, per
// task and overall.
inline ConcatDelta delta_vs_stronger(const TaskSummaries& concat, const TaskSummaries& a, const TaskSummaries& b) {
  auto same_tasks = [](const TaskSummaries& x, const TaskSummaries& y) {
    return x.size() == y.size() && std::equal(x.begin(), x.end(), y.begin(),
                                              [](const auto& l, const auto& r) { return l.first == r.first; });
  };
  if (concat.empty() || !same_tasks(concat, a) || !same_tasks(concat, b))
    throw InvariantError("delta_vs_stronger: task sets differ");

  auto compute = [&](Metric m) {
    MetricDelta d;
    const auto c = metric_by_task(concat, m), va = metric_by_task(a, m), vb = metric_by_task(b, m);
    for (const auto& [task, v] : c) d.per_task[task] = v - std::max(va.at(task), vb.at(task));
    d.overall = task_average(c, false) - std::max(task_average(va, false), task_average(vb, false));
    return d;
  };
  return {compute(Metric::MeanR2), compute(Metric::QScore)};
}

}  // namespace probebench
