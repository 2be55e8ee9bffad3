// probebench command-line driver.
//
//   probebench validate <manifest.json>
//   probebench embed <config.json> [--threads N]
//   probebench evaluate <config.json> [--threads N]
//   probebench report <config.json>
//   probebench run <config.json> [--threads N]      embed + evaluate + report
//   probebench synth --kind linear|pooling|complementary --out DIR [--seed S] [--samples N] [--k K]
//   probebench print-defaults
//
// Exit status: 0 ok, 1 store validation failed, 2 any other error.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "probebench/fixtures.hpp"
#include "probebench/pipeline.hpp"

namespace pb = probebench;

int main(int argc, char** argv) {
  CLI::App app{"Frozen-encoder linear probing benchmark"};
  app.require_subcommand(1);

  std::string path;
  unsigned threads = 1;

  auto* validate = app.add_subcommand("validate", "check a feature store against its manifest");
  validate->add_option("manifest", path, "manifest.json")->required();

  auto add_config_cmd = [&](const char* name, const char* help, bool threaded) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("config", path, "config.json")->required();
    if (threaded) sub->add_option("--threads", threads, "worker threads (0 = hardware)");
    return sub;
  };
  auto* embed = add_config_cmd("embed", "pool stored features into per-method embedding archives", true);
  auto* evaluate = add_config_cmd("evaluate", "run repeated-split linear probes on every archive", true);
  auto* report = add_config_cmd("report", "render tables from evaluate outputs", false);
  auto* run = add_config_cmd("run", "embed, evaluate and report in one go", true);

  std::string kind;
  pb::fixtures::FixtureOptions fopt;
  auto* synth = app.add_subcommand("synth", "write a synthetic store with a ready-to-run config");
  synth->add_option("--kind", kind, "linear, pooling or complementary")->required();
  synth->add_option("--out", path, "output directory")->required();
  synth->add_option("--seed", fopt.seed);
  synth->add_option("--samples", fopt.n_samples);
  synth->add_option("--k", fopt.k, "splits in the written config");

  auto* defaults = app.add_subcommand("print-defaults", "print a config with every default filled in");

  CLI11_PARSE(app, argc, argv);

  try {
    pb::CommandResult res;
    if (*validate) {
      res = pb::cmd_validate(path);
    } else if (*embed) {
      res = pb::cmd_embed(pb::load_config(path), threads);
    } else if (*evaluate) {
      res = pb::cmd_evaluate(pb::load_config(path), threads);
    } else if (*report) {
      res = pb::cmd_report(pb::load_config(path));
    } else if (*run) {
      const auto c = pb::load_config(path);
      for (auto step : {pb::cmd_embed(c, threads), pb::cmd_evaluate(c, threads), pb::cmd_report(c)})
        res.message += step.message;
    } else if (*synth) {
      const auto cfg = pb::fixtures::write_fixture(pb::fixtures::parse_kind(kind), path, fopt);
      res.message = "wrote " + cfg.string() + "\n";
    } else if (*defaults) {
      res.message = pb::config_to_json(pb::default_config()).dump(2) + "\n";
    }
    std::fputs(res.message.c_str(), res.exit_code == 0 ? stdout : stderr);
    return res.exit_code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "probebench: %s\n", e.what());
    return 2;
  }
}
