#include <gtest/gtest.h>

#include <cstdlib>

#include "probebench/fixtures.hpp"
#include "probebench/oracle.hpp"
#include "probebench/pipeline.hpp"
#include "test_util.hpp"

using namespace probebench;
namespace fs = std::filesystem;

namespace {

RunConfig fixture(fixtures::Kind kind, const fs::path& dir, std::size_t n = 0, std::size_t k = 3) {
  fixtures::FixtureOptions opt;
  opt.n_samples = n;
  opt.k = k;
  return load_config(fixtures::write_fixture(kind, dir, opt));
}

int cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + PROBEBENCH_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) { return detail::read_file_text(p); }

}  // namespace

TEST(Config, JsonRoundTrip) {
  auto c = default_config();
  c.k = 7;
  c.tasks = {"a", "b"};
  c.metrics = {Metric::QScore};
  c.methods[0].resize = 64;
  c.methods[1].temporal = Temporal::per_season(2);
  c.layer_curves = {{"curve", {"vit_mean", "vit_cls"}}};
  c.probe.learning_rate = 0.05;
  const auto back = config_from_json(config_to_json(c), "/tmp");
  EXPECT_EQ(config_to_json(back), config_to_json(c));
  EXPECT_EQ(config_hash(back), config_hash(c));
  c.k = 8;
  EXPECT_NE(config_hash(back), config_hash(c));
}

TEST(Config, RejectsBadValues) {
  auto j = config_to_json(default_config());
  j["k"] = 0;
  EXPECT_THROW(config_from_json(j, "."), InvariantError);
  j = config_to_json(default_config());
  j["metrics"] = nlohmann::json::array();
  EXPECT_THROW(config_from_json(j, "."), InvariantError);
  j = config_to_json(default_config());
  j["probe"]["epochs"] = 0;
  EXPECT_THROW(config_from_json(j, "."), InvariantError);
  j = config_to_json(default_config());
  j["methods"][0]["pooling"] = "MEDIAN";
  EXPECT_THROW(config_from_json(j, "."), Error);
  j = config_to_json(default_config());
  j.erase("methods");
  EXPECT_THROW(config_from_json(j, "."), FormatError);
}

TEST(Config, ReferencesResolveAgainstManifest) {
  const auto dir = scratch_dir();
  auto c = fixture(fixtures::Kind::Complementary, dir, 40);
  const auto m = load_manifest(c.manifest_path());
  EXPECT_NO_THROW(validate_config(c, m));
  auto bad = c;
  bad.methods[3].concat = {"ab_mean", "a_mean"};
  EXPECT_THROW(validate_config(bad, m), InvariantError);
  bad = c;
  bad.methods[0].layer_tag = "block99";
  EXPECT_THROW(validate_config(bad, m), InvariantError);
  bad = c;
  bad.methods[1].id = "a_mean";
  EXPECT_THROW(validate_config(bad, m), InvariantError);
  bad = c;
  bad.tasks = {"task3"};
  EXPECT_THROW(validate_config(bad, m), InvariantError);
}

TEST(Validate, ConsistentStoreExitsZero) {
  const auto dir = scratch_dir();
  const auto c = fixture(fixtures::Kind::Pooling, dir, 10);
  const auto r = cmd_validate(c.manifest_path());
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_NE(r.message.find("PASS"), std::string::npos);
}

TEST(Validate, MissingFileExitsNonzeroWithReport) {
  const auto dir = scratch_dir();
  const auto c = fixture(fixtures::Kind::Pooling, dir, 10);
  fs::remove(dir / "features/synthgrid/stage2/s00003_s2.pbft");
  const auto r = cmd_validate(c.manifest_path());
  EXPECT_NE(r.exit_code, 0);
  EXPECT_NE(r.message.find("synthgrid/stage2/s00003/s2"), std::string::npos) << r.message;
  EXPECT_EQ(cli("validate \"" + c.manifest_path().string() + "\"", dir / "log.txt"), 1);
  EXPECT_NE(slurp(dir / "log.txt").find("missing"), std::string::npos);
}

TEST(Validate, BadManifestGivesParseError) {
  const auto dir = scratch_dir();
  detail::write_file_text(dir / "manifest.json", "[1, 2");
  EXPECT_THROW(cmd_validate(dir / "manifest.json"), FormatError);
  EXPECT_EQ(cli("validate \"" + (dir / "manifest.json").string() + "\"", dir / "log.txt"), 2);
  EXPECT_NE(slurp(dir / "log.txt").find("parse"), std::string::npos) << slurp(dir / "log.txt");
}

TEST(Embed, FourSeasonGridMeanGivesOneRowPerSample) {
  const auto dir = scratch_dir();
  const auto c = fixture(fixtures::Kind::Pooling, dir, 12);
  cmd_embed(c);
  const auto a = read_archive(c.archive_path("stage2_mean"));
  EXPECT_EQ(a.count(), 12u);
  EXPECT_EQ(a.dim, 8u);
  EXPECT_TRUE(a.provenance.temporal.is_mean());
  EXPECT_EQ(read_archive(c.archive_path("stage2_mean_to4")).dim, 4u);
  EXPECT_EQ(read_archive(c.archive_path("stage2_mean_to4")).provenance.resized_to, std::optional<std::size_t>(4));
}

TEST(Embed, ArchiveRowsMatchDirectComputation) {
  const auto dir = scratch_dir();
  const auto c = fixture(fixtures::Kind::Pooling, dir, 6);
  cmd_embed(c);
  const auto m = load_manifest(c.manifest_path());
  const auto a = read_archive(c.archive_path("stage1_mean"));
  for (std::size_t i = 0; i < m.sample_ids.size(); ++i) {
    std::vector<EmbeddingVector> seasons;
    for (std::uint32_t s = 0; s < 4; ++s)
      seasons.push_back(pool_spatial(read_feature(m, "synthgrid", "stage1", m.sample_ids[i], s), Pooling::Mean));
    const auto e = temporal_mean(seasons);
    EXPECT_TRUE(std::equal(e.values.begin(), e.values.end(), a.row(i).begin()));
  }
}

TEST(Embed, ClsOnGridNamesTheMethod) {
  const auto dir = scratch_dir();
  auto c = fixture(fixtures::Kind::Pooling, dir, 4);
  c.methods[2].pooling = Pooling::Cls;
  try {
    cmd_embed(c);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("stage2_max"), std::string::npos) << e.what();
  }
}

TEST(Embed, ConcatDimIsSumOfParts) {
  const auto dir = scratch_dir();
  const auto c = fixture(fixtures::Kind::Complementary, dir, 30);
  cmd_embed(c);
  const auto a = read_archive(c.archive_path("a_mean"));
  const auto cat = read_archive(c.archive_path("ab_mean"));
  EXPECT_EQ(cat.dim, 2 * a.dim);
  ASSERT_EQ(cat.provenance.children.size(), 2u);
  EXPECT_EQ(cat.provenance.children[1].encoder_id, "enc_b");
  EXPECT_TRUE(std::equal(a.row(5).begin(), a.row(5).end(), cat.row(5).begin()));
  EXPECT_EQ(read_archive(c.archive_path("a_mean_cls")).provenance.children[1].pooling, Pooling::Cls);
}

TEST(Embed, ThreadCountDoesNotChangeArchives) {
  const auto dir = scratch_dir();
  const auto c = fixture(fixtures::Kind::Pooling, dir, 20);
  const auto m = load_manifest(c.manifest_path());
  const auto serial = build_archives(c, m, disk_source(m), 1);
  const auto parallel = build_archives(c, m, disk_source(m), 4);
  for (const auto& [id, a] : serial) EXPECT_EQ(encode_archive(a), encode_archive(parallel.at(id))) << id;
}

TEST(Evaluate, SingleSplitSmokeRun) {
  const auto dir = scratch_dir();
  const auto c = fixture(fixtures::Kind::Linear, dir, 60, 1);
  cmd_embed(c);
  const auto r = cmd_evaluate(c);
  EXPECT_EQ(r.exit_code, 0);
  const auto sums = load_summaries(c);
  ASSERT_EQ(sums.size(), 1u);
  EXPECT_EQ(sums[0].scores.size(), 1u);
  EXPECT_EQ(sums[0].std, 0.0);
}

TEST(Evaluate, LinearFixtureTracksLeastSquares) {
  const auto dir = scratch_dir();
  auto c = fixture(fixtures::Kind::Linear, dir, 500, 10);
  c.probe.learning_rate = 1e-2;
  cmd_embed(c);
  cmd_evaluate(c);
  const auto s = load_summaries(c).at(0);
  const auto a = read_archive(c.archive_path("flat_mean"));
  const auto m = load_manifest(c.manifest_path());
  const Vector y = aligned_targets(a, load_task_table(m, "y"));
  const auto plan = shared_plan(c, a.count());
  for (std::size_t k = 0; k < plan.k(); ++k)
    EXPECT_NEAR(s.scores[k], oracle::ols_split_score(archive_matrix(a), y, plan.splits[k]), 0.02) << k;
  EXPECT_NEAR(s.mean_r2, 0.9, 0.05);
}

TEST(Evaluate, MismatchedSampleCountsAreAnError) {
  const auto dir = scratch_dir();
  const auto c = fixture(fixtures::Kind::Linear, dir, 40, 1);
  cmd_embed(c);
  auto a = read_archive(c.archive_path("flat_mean"));
  a.sample_ids.pop_back();
  a.values.resize(a.values.size() - a.dim);
  write_archive(a, c.archive_path("flat_mean"));
  EXPECT_THROW(cmd_evaluate(c), InvariantError);
}

TEST(Evaluate, MissingArchiveNamesTheMethod) {
  const auto dir = scratch_dir();
  const auto c = fixture(fixtures::Kind::Linear, dir, 40, 1);
  try {
    cmd_evaluate(c);
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("flat_mean"), std::string::npos);
  }
}

TEST(Report, RerunIsByteIdentical) {
  const auto dir = scratch_dir();
  const auto c = fixture(fixtures::Kind::Complementary, dir, 40, 2);
  cmd_embed(c);
  cmd_evaluate(c);
  cmd_report(c);
  std::map<std::string, std::string> first;
  for (const auto& e : fs::directory_iterator(c.output_dir()))
    if (e.is_regular_file()) first[e.path().filename().string()] = slurp(e.path());
  cmd_report(c);
  for (const auto& [name, text] : first) EXPECT_EQ(slurp(c.output_dir() / name), text) << name;
  EXPECT_EQ(first.size(), 11u);
}

TEST(Report, LeaderboardFollowsOrderingRules) {
  const auto dir = scratch_dir();
  const auto c = fixture(fixtures::Kind::Complementary, dir, 60, 2);
  cmd_embed(c);
  cmd_evaluate(c);
  cmd_report(c);
  const auto sums = load_summaries(c);
  std::map<std::string, std::map<std::string, double>> by_method;
  for (const auto& s : sums) by_method[s.method_id][s.task_id] = s.mean_r2;
  std::vector<std::pair<double, std::string>> order;
  for (const auto& [id, t] : by_method) order.emplace_back(task_average(t, false), id);
  std::sort(order.begin(), order.end());
  const auto md = slurp(c.output_dir() / "leaderboard_r2.md");
  std::size_t pos = 0;
  for (const auto& [avg, id] : order) {
    const auto at = md.find("| " + id + " |");
    ASSERT_NE(at, std::string::npos) << id;
    EXPECT_GT(at, pos) << id;
    pos = at;
  }
}

TEST(Report, MissingSummariesIsAnError) {
  const auto dir = scratch_dir();
  const auto c = fixture(fixtures::Kind::Linear, dir, 40, 1);
  cmd_embed(c);
  EXPECT_THROW(cmd_report(c), IoError);
}

TEST(Cli, SynthRunAndDefaults) {
  const auto dir = scratch_dir();
  ASSERT_EQ(cli("synth --kind linear --out \"" + (dir / "lin").string() + "\" --samples 50 --k 2", dir / "a.txt"), 0);
  ASSERT_EQ(cli("run \"" + (dir / "lin/config.json").string() + "\" --threads 2", dir / "b.txt"), 0) << slurp(dir / "b.txt");
  EXPECT_TRUE(fs::exists(dir / "lin/out/leaderboard_q.md"));
  ASSERT_EQ(cli("print-defaults", dir / "c.txt"), 0);
  const auto defaults = nlohmann::json::parse(slurp(dir / "c.txt"));
  EXPECT_EQ(defaults["probe"]["learning_rate"], 1e-3);
  EXPECT_EQ(defaults["k"], 50);
  EXPECT_NE(cli("synth --kind spiral --out \"" + (dir / "x").string() + "\"", dir / "d.txt"), 0);
  EXPECT_NE(cli("evaluate \"" + (dir / "nope.json").string() + "\"", dir / "e.txt"), 0);
}
