// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails.
//
//   acceptance [work_dir]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <sys/wait.h>

#include "pool_oracle.hpp"
#include "probebench/fixtures.hpp"
#include "probebench/oracle.hpp"
#include "probebench/pipeline.hpp"
#include "reference_table.hpp"

namespace pb = probebench;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// 1. Trained probe vs closed-form least squares on every split.
Outcome probe_oracle_agreement() {
  pb::oracle::SyntheticSpec spec;
  spec.n_samples = 500;
  spec.dim = 32;
  spec.signal_var = 9.0;
  spec.noise_std = 1.0;
  const auto ds = pb::oracle::synth_linear_dataset(spec);
  const auto plan = pb::make_splits(500, 50, 0.8, 0);

  // The default step size of 1e-3 moves each weight at most about 1e-3 per
  // step; 140 steps cannot reach the least-squares weights. The comparison
  // uses 1e-2 and reports the default-rate gap alongside.
  pb::ProbeConfig cfg;
  cfg.learning_rate = 1e-2;
  const auto t0 = std::chrono::steady_clock::now();
  const auto probe = pb::run_cv(ds.x, ds.y, plan, cfg);
  double max_gap = 0.0, ols_sum = 0.0;
  for (std::size_t k = 0; k < plan.k(); ++k) {
    const double ols = pb::oracle::ols_split_score(ds.x, ds.y, plan.splits[k]);
    ols_sum += ols;
    max_gap = std::max(max_gap, std::abs(probe[k] - ols));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const auto slow = pb::run_cv(ds.x, ds.y, plan, pb::ProbeConfig{});
  double slow_gap = 0.0;
  for (std::size_t k = 0; k < plan.k(); ++k)
    slow_gap = std::max(slow_gap, std::abs(slow[k] - pb::oracle::ols_split_score(ds.x, ds.y, plan.splits[k])));

  return {max_gap <= 0.02 && secs < 60.0,
          "expected R^2 " + fmt("%.3f", ds.expected_r2) + ", OLS mean " + fmt("%.4f", ols_sum / 50) + ", probe mean " +
              fmt("%.4f", mean_of(probe)) + ", max |gap| " + fmt("%.4f", max_gap) + " over K=50 (lr 1e-2, 20 epochs, batch 64), " +
              fmt("%.2f", secs) + " s; at lr 1e-3 max |gap| would be " + fmt("%.4f", slow_gap)};
}

// 2. Q-score arithmetic.
Outcome q_exactness() {
  const auto st = pb::summarize(std::vector<double>{0.78, 0.82, 0.78, 0.82});
  const bool q40 = std::abs(st.q - 40.0) <= 1e-9 && std::abs(st.mean - 0.8) < 1e-15 && std::abs(st.std - 0.02) < 1e-15;
  bool zero_sigma = true;
  for (double m : {-0.5, 0.0, 0.123, 0.8, 1.0}) {
    const auto z = pb::summarize(std::vector<double>(50, m));
    zero_sigma = zero_sigma && z.std == 0.0 && z.q == 100.0 * z.mean;
  }
  return {q40 && zero_sigma, "mean 0.8, std 0.02 -> Q = " + fmt("%.12f", st.q) +
                                 "; sigma = 0 gives Q = 100 * mean exactly for 5 constant score lists"};
}

// 3. Library pooling vs naive loops, exact equality over the full shape grid.
Outcome pooling_brute_force() {
  pb::Philox rng(2024, 7);
  std::size_t cases = 0, mismatches = 0;
  auto random_values = [&](std::size_t n) {
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(pb::standard_normal(rng) * 100.0);
    return v;
  };
  const unsigned grid_sizes[] = {1, 2, 4, 8};
  for (unsigned C : grid_sizes)
    for (unsigned H : grid_sizes)
      for (unsigned W : grid_sizes) {
        const pb::FeatureTensor t{"s", 0, "L", pb::GridShape{C, H, W}, random_values(C * H * W)};
        for (auto mode : {pb::Pooling::Mean, pb::Pooling::Min, pb::Pooling::Max}) {
          ++cases;
          mismatches += pb::pool_spatial(t, mode).values != pool_oracle::grid(t.values, C, H, W, mode);
        }
      }
  const unsigned token_sizes[] = {2, 4, 8};
  for (unsigned N : token_sizes)
    for (unsigned D : token_sizes)
      for (bool cls : {false, true}) {
        const pb::FeatureTensor t{"s", 0, "B", pb::TokenShape{N, D, cls}, random_values(N * D)};
        for (auto mode : {pb::Pooling::Mean, pb::Pooling::Min, pb::Pooling::Max}) {
          ++cases;
          mismatches += pb::pool_spatial(t, mode).values != pool_oracle::tokens(t.values, N, D, cls, mode);
        }
        if (cls) {
          ++cases;
          mismatches += pb::select_cls(t).values != pool_oracle::tokens(t.values, N, D, cls, pb::Pooling::Cls);
        }
      }
  return {mismatches == 0 && cases > 0,
          std::to_string(cases) + " shape/mode cases (GRID C,H,W in {1,2,4,8}; TOKENS N,D in {2,4,8} +/- CLS), " +
              std::to_string(mismatches) + " mismatches"};
}

// 4. Two CLI runs, different thread counts, byte-identical trees.
int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + PROBEBENCH_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::map<std::string, std::string> tree_contents(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = pb::detail::read_file_text(e.path());
  return out;
}

Outcome cli_determinism(const fs::path& work) {
  const fs::path base = work / "determinism";
  fs::remove_all(base);
  fs::create_directories(base);
  const unsigned wide = std::max(8u, pb::detail::resolve_threads(0));
  std::size_t files = 0;
  for (const char* kind : {"pooling", "complementary", "linear"}) {
    std::map<std::string, std::string> trees[2];
    for (int run = 0; run < 2; ++run) {
      const fs::path dir = base / kind / (run ? "wide" : "serial");
      const std::string threads = run ? std::to_string(wide) : "1";
      if (run_cli(std::string("synth --kind ") + kind + " --seed 11 --samples 160 --k 8 --out \"" + dir.string() + "\"",
                  base / "log.txt") != 0 ||
          run_cli("run \"" + (dir / "config.json").string() + "\" --threads " + threads, base / "log.txt") != 0)
        return {false, std::string(kind) + ": CLI failed, see " + (base / "log.txt").string()};
      trees[run] = tree_contents(dir);
    }
    if (trees[0] != trees[1]) {
      for (const auto& [name, text] : trees[0])
        if (!trees[1].contains(name) || trees[1].at(name) != text)
          return {false, std::string(kind) + ": " + name + " differs between --threads 1 and --threads " + std::to_string(wide)};
      return {false, std::string(kind) + ": file sets differ"};
    }
    files += trees[0].size();
  }
  return {true, std::to_string(files) + " files byte-identical across pooling/complementary/linear fixtures, --threads 1 vs " +
                    std::to_string(wide)};
}

// 5. Mean pooling beats max and min on the pooling study.
Outcome pooling_study_recovery() {
  const std::size_t seeds = 20;
  std::size_t wins = 0;
  double mean_r2 = 0, max_r2 = 0, min_r2 = 0;
  for (std::size_t s = 0; s < seeds; ++s) {
    pb::oracle::SyntheticSpec spec;
    spec.structure = pb::oracle::Structure::GridSignalInMean;
    spec.n_samples = 2000;
    spec.noise_std = 0.3;
    spec.weight_seed = 2 * s + 1;
    spec.noise_seed = 2 * s + 2;
    const auto study = pb::oracle::synth_pooling_study(spec);

    pb::RunConfig c;
    c.k = 50;
    c.probe.base_seed = s;
    c.methods = {{"mean", study.encoder_id, "stage1", pb::Pooling::Mean, pb::Temporal::mean_over_seasons(), {}, {}},
                 {"max", study.encoder_id, "stage1", pb::Pooling::Max, pb::Temporal::mean_over_seasons(), {}, {}},
                 {"min", study.encoder_id, "stage1", pb::Pooling::Min, pb::Temporal::mean_over_seasons(), {}, {}}};
    const auto archives = pb::build_archives(c, study.manifest, study.source());
    const auto summaries = pb::evaluate_archives(c, {"mean", "max", "min"}, archives, {study.task}, 1);
    std::map<std::string, pb::ScoreSummary> by;
    for (const auto& x : summaries) by[x.method_id] = x;
    const bool win = by["mean"].mean_r2 > std::max(by["max"].mean_r2, by["min"].mean_r2) &&
                     by["mean"].q_score > std::max(by["max"].q_score, by["min"].q_score);
    wins += win;
    mean_r2 += by["mean"].mean_r2 / seeds;
    max_r2 += by["max"].mean_r2 / seeds;
    min_r2 += by["min"].mean_r2 / seeds;
  }
  return {wins * 100 >= 95 * seeds,
          "mean pooling ranks first on both R^2 and Q in " + std::to_string(wins) + "/" + std::to_string(seeds) +
              " seeds (n=2000, K=50; average R^2 mean " + fmt("%.3f", mean_r2) + ", max " + fmt("%.3f", max_r2) +
              ", min " + fmt("%.3f", min_r2) + ")"};
}

// 6. Concatenation of complementary archives.
pb::TaskSummaries evaluate_matrix(const pb::Matrix& x, const pb::Vector& t1, const pb::Vector& t2, const std::string& id) {
  const auto plan = pb::make_splits(static_cast<std::size_t>(x.rows()), 50, 0.8, 0);
  pb::TaskSummaries out;
  out["task1"] = pb::make_summary("task1", id, pb::run_cv(x, t1, plan, pb::ProbeConfig{}));
  out["task2"] = pb::make_summary("task2", id, pb::run_cv(x, t2, plan, pb::ProbeConfig{}));
  return out;
}

pb::ConcatDelta concat_delta(bool redundant) {
  pb::oracle::SyntheticSpec spec;
  spec.structure = pb::oracle::Structure::TwoTaskComplementary;
  spec.n_samples = 2000;
  spec.dim = 64;
  spec.noise_std = 0.1;
  spec.redundant = redundant;
  const auto p = pb::oracle::synth_complementary_pair(spec);
  pb::Matrix ab(p.a.rows(), p.a.cols() + p.b.cols());
  ab << p.a, p.b;
  return pb::delta_vs_stronger(evaluate_matrix(ab, p.task1, p.task2, "ab"), evaluate_matrix(p.a, p.task1, p.task2, "a"),
                               evaluate_matrix(p.b, p.task1, p.task2, "b"));
}

Outcome concatenation_effect() {
  const auto comp = concat_delta(false);
  const auto red = concat_delta(true);
  bool per_task_ok = true;
  std::string per_task;
  for (const auto& [t, d] : comp.mean_r2.per_task) {
    per_task_ok = per_task_ok && std::abs(d) <= 0.02;
    per_task += " " + t + " " + fmt("%+.4f", d);
  }
  const bool pass = comp.mean_r2.overall > 0.0 && per_task_ok && std::abs(red.mean_r2.overall) <= 0.01;
  return {pass, "R^2 deltas: complementary overall " + fmt("%+.4f", comp.mean_r2.overall) + ", per task" + per_task +
                    "; redundant overall " + fmt("%+.4f", red.mean_r2.overall) + " (Q overall " +
                    fmt("%+.2f", comp.q_score.overall) + " / " + fmt("%+.2f", red.q_score.overall) + ")"};
}

// 7. Leaderboard arithmetic on the published R^2 rows.
Outcome table_fidelity() {
  auto input = reference::method_scores();
  std::reverse(input.begin(), input.end());
  std::swap(input[1], input[5]);
  const auto lb = pb::leaderboard(input, reference::kTasks);

  std::map<std::string, double> dino;
  for (std::size_t t = 0; t < reference::kTasks.size(); ++t) dino[reference::kTasks[t]] = reference::kRows[3].scores[t];
  const auto dino_avg = pb::detail::fmt_fixed3(pb::task_average(dino, false));

  bool order_ok = lb.rows.size() == reference::kRows.size();
  for (std::size_t i = 0; order_ok && i < lb.rows.size(); ++i) order_ok = lb.rows[i].method_id == reference::kRows[i].method;
  return {dino_avg == "0.301" && order_ok,
          "ResNet DINO (mean) Avg = " + dino_avg + "; ascending-Avg order of all " + std::to_string(lb.rows.size()) +
              " rows " + (order_ok ? "matches" : "does NOT match") + " the published table"};
}

// 8. Clipped layer curves on hand-built grids.
Outcome clipped_layer_curve() {
  // hand-computed: block4 (0 + 0.25)/2, block8 (0.25 + 0.75)/2, block12 (0.5 + 0)/2, all-negative layer 0
  const std::vector<pb::LayerScores> grid{{"block4", "m", {{"a", -0.5}, {"b", 0.25}}},
                                          {"block8", "m", {{"a", 0.25}, {"b", 0.75}}},
                                          {"block12", "m", {{"a", 0.5}, {"b", -1.0}}},
                                          {"block16", "m", {{"a", -0.1}, {"b", -0.3}}}};
  const std::vector<double> expected{0.125, 0.5, 0.25, 0.0};
  const auto curve = pb::layer_curve(grid);
  bool ok = curve.size() == expected.size();
  for (std::size_t i = 0; ok && i < curve.size(); ++i) ok = curve[i].value == expected[i];

  // three-task grid with thirds
  const auto thirds = pb::layer_curve({{"stage1", "m", {{"a", 0.3}, {"b", -0.6}, {"c", 0.6}}}});
  ok = ok && thirds[0].value == (0.3 + 0.0 + 0.6) / 3.0;
  return {ok, "4-layer x 2-task grid -> 0.125, 0.5, 0.25, 0; 1-layer x 3-task grid -> " + fmt("%.17g", thirds[0].value)};
}

// 9. Compression accounting.
Outcome compression() {
  const pb::RawInputSpec raw;
  const double ratio = pb::compression_ratio(raw, 2048, 4);
  const bool band = pb::within_typical_compression(ratio);
  return {ratio == 884.8125 && band,
          "raw " + std::to_string(raw.timesteps) + " timesteps x " + std::to_string(raw.bands) + " bands x " +
              std::to_string(raw.height) + "x" + std::to_string(raw.width) + " x " + std::to_string(raw.bytes_per_element) +
              " bytes = " + std::to_string(raw.total_bytes()) + " B; 2048-d x 4 B = 8192 B; ratio " + fmt("%.4f", ratio) +
              (band ? " (consistent with the roughly 500x to over 2000x band)" : " (outside the typical band)")};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "probebench_acceptance";
  fs::create_directories(work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"probe-oracle agreement", probe_oracle_agreement},
      {"Q-score exactness", q_exactness},
      {"pooling brute-force equivalence", pooling_brute_force},
      {"CLI determinism", [&] { return cli_determinism(work); }},
      {"pooling design-study recovery", pooling_study_recovery},
      {"concatenation effect", concatenation_effect},
      {"leaderboard arithmetic", table_fidelity},
      {"clipped layer curves", clipped_layer_curve},
      {"compression accounting", compression},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s criterion %zu (%s): %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
