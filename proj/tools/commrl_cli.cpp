// commrl: dataset generation, warm-up, staged training, evaluation and curve export.
//
//   commrl [--config PATH] [--seed N] [--out DIR] gen-data
//   commrl ... warmup
//   commrl ... train --stage step_rr|ans_co|full [--resume CHECKPOINT]
//   commrl ... eval --checkpoint PATH [--split eval|train|warmup]
//   commrl ... export-curves [--metrics PATH] --csv PATH

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "commrl/config.hpp"
#include "commrl/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Step-wise reasoning reward RL on synthetic audio-visual confusion tasks"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "master seed (overrides config and COMM_RL_SEED)");
  app.add_option("--out", out_dir, "output directory (overrides config and COMM_RL_OUT)");

  auto* gen = app.add_subcommand("gen-data", "write warmup/train/eval JSONL splits and a manifest");
  auto* warm = app.add_subcommand("warmup", "supervised warm-up on the warmup split");

  auto* train = app.add_subcommand("train", "run the Step-RR / Ans-CO schedule");
  std::string stage = "full";
  std::optional<std::string> resume;
  train->add_option("--stage", stage, "step_rr, ans_co or full")->check(CLI::IsMember({"step_rr", "ans_co", "full"}));
  train->add_option("--resume", resume, "checkpoint to continue from");

  auto* eval = app.add_subcommand("eval", "greedy evaluation; prints a JSON metric report");
  std::string checkpoint;
  std::string split = "eval";
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--split", split, "warmup, train or eval")->check(CLI::IsMember({"warmup", "train", "eval"}));

  auto* curves = app.add_subcommand("export-curves", "convert metrics JSONL to CSV");
  std::optional<std::string> metrics_path;
  std::string csv_path;
  curves->add_option("--metrics", metrics_path, "metrics JSONL (default <out>/metrics.jsonl)");
  curves->add_option("--csv", csv_path, "CSV output path")->required();

  for (auto* sub : {gen, warm, train, eval, curves}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : commrl::kExitConfig;
  }

  commrl::RunConfig cfg;
  try {
    if (!config_path.empty()) cfg = commrl::load_run_config(config_path);
    commrl::apply_env_overrides(cfg);
    if (seed) cfg.seed = *seed;
    if (out_dir) cfg.out = *out_dir;
    cfg.apply_seed();
  } catch (const commrl::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return commrl::kExitConfig;
  }

  if (gen->parsed()) return commrl::cmd_gen_data(cfg);
  if (warm->parsed()) return commrl::cmd_warmup(cfg);
  if (train->parsed()) return commrl::cmd_train(cfg, commrl::train_stage_from_string(stage), resume);
  if (eval->parsed()) return commrl::cmd_eval(cfg, checkpoint, commrl::split_from_string(split));
  const std::string metrics = metrics_path ? *metrics_path : commrl::RunPaths{cfg.out}.metrics().string();
  return commrl::cmd_export_curves(metrics, csv_path);
}
