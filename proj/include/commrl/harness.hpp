#pragma once

// Command implementations behind the CLI. Every command returns a process
// exit code: 0 ok, 2 config/format error, 3 missing or invalid input,
// 4 scorer backend failure. All outputs go under RunConfig::out:
//
//   <out>/config.json                 resolved configuration echo
//   <out>/data/{warmup,train,eval}.jsonl, <out>/data/manifest.json
//   <out>/checkpoints/{warmup,step_rr,ans_co,latest}.json
//   <out>/metrics.jsonl               one StepReport per line

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "commrl/checkpoint.hpp"
#include "commrl/config.hpp"
#include "commrl/env.hpp"
#include "commrl/error.hpp"
#include "commrl/optimizer.hpp"

namespace commrl {

namespace fs = std::filesystem;

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitInput = 3, kExitBackend = 4 };

inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_config:
    case ErrorCode::invalid_spec:
    case ErrorCode::format_error:
      return kExitConfig;
    case ErrorCode::backend_unavailable:
    case ErrorCode::malformed_reply:
      return kExitBackend;
    default:
      return kExitInput;
  }
}

struct RunPaths {
  fs::path root;
  fs::path data() const { return root / "data"; }
  fs::path split(Split s) const { return data() / (std::string(to_string(s)) + ".jsonl"); }
  fs::path manifest() const { return data() / "manifest.json"; }
  fs::path checkpoints() const { return root / "checkpoints"; }
  fs::path checkpoint(std::string_view name) const { return checkpoints() / (std::string(name) + ".json"); }
  fs::path metrics() const { return root / "metrics.jsonl"; }
  fs::path config_echo() const { return root / "config.json"; }
};

namespace detail {

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  out << text;
}

inline void write_config_echo(const RunConfig& cfg) {
  write_text(RunPaths{cfg.out}.config_echo(), run_config_to_json(cfg).dump(2) + "\n");
}

inline SplitFile read_split(const RunPaths& paths, Split s) {
  std::ifstream in(paths.split(s), std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "missing dataset file " + paths.split(s).string() + " (run gen-data)");
  return read_split_jsonl(in);
}

inline Dataset load_dataset(const RunPaths& paths) {
  Dataset d;
  for (Split s : {Split::warmup, Split::train, Split::eval}) {
    auto f = read_split(paths, s);
    d.spec = f.spec;
    d.split(s) = std::move(f.tasks);
  }
  return d;
}

template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
}

inline nlohmann::json eval_json(const EvalReport& r, Split split, std::uint64_t seed) {
  nlohmann::json j = r;
  j["split"] = to_string(split);
  j["seed"] = seed;
  return j;
}

}  // namespace detail

inline int cmd_gen_data(const RunConfig& cfg, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    cfg.validate();
    const RunPaths paths{cfg.out};
    const Dataset d = generate_dataset(cfg.env);
    nlohmann::json splits;
    for (Split s : {Split::warmup, Split::train, Split::eval}) {
      std::ostringstream buf;
      write_split_jsonl(buf, d, s);
      detail::write_text(paths.split(s), buf.str());
      const auto& tasks = d.split(s);
      const auto confused = std::count_if(tasks.begin(), tasks.end(), [](const auto& t) { return t.confused; });
      splits[std::string(to_string(s))] = {
          {"file", paths.split(s).filename().string()},
          {"count", tasks.size()},
          {"confused", confused},
          {"confused_fraction", tasks.empty() ? 0.0 : static_cast<double>(confused) / static_cast<double>(tasks.size())}};
    }
    const nlohmann::json manifest = {{"seed", cfg.env.seed}, {"env", d.spec}, {"splits", splits}};
    detail::write_text(paths.manifest(), manifest.dump(2) + "\n");
    detail::write_config_echo(cfg);
    out << manifest.dump() << '\n';
    return kExitOk;
  });
}

namespace detail {

inline TrainerState run_warmup(const RunConfig& cfg, const Dataset& d) {
  ToyPolicy policy(d.vocab(), d.spec.feature_dim(), cfg.policy.hidden_dim);
  Rng rng(cfg.train.seed);
  if (cfg.policy.hidden_dim > 0) policy.init_hidden(rng, cfg.policy.init_scale);
  const auto demos = make_warmup_demonstrations(d);
  auto fit = warmup_fit(std::move(policy), demos, cfg.warmup.epochs, cfg.warmup.learning_rate);
  return TrainerState{std::move(fit.policy), rng, 0, 0};
}

}  // namespace detail

inline int cmd_warmup(const RunConfig& cfg, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    cfg.validate();
    const RunPaths paths{cfg.out};
    const Dataset d = detail::load_dataset(paths);
    const auto state = detail::run_warmup(cfg, d);
    fs::create_directories(paths.checkpoints());
    save_checkpoint(paths.checkpoint("warmup").string(), state, run_config_to_json(cfg));
    detail::write_config_echo(cfg);
    if (!d.eval.empty()) out << detail::eval_json(evaluate(state.policy, d.eval), Split::eval, cfg.seed).dump() << '\n';
    return kExitOk;
  });
}

enum class TrainStage { step_rr, ans_co, full };

inline TrainStage train_stage_from_string(std::string_view s) {
  if (s == "step_rr") return TrainStage::step_rr;
  if (s == "ans_co") return TrainStage::ans_co;
  if (s == "full") return TrainStage::full;
  throw Error(ErrorCode::invalid_config, "unknown stage '" + std::string(s) + "'");
}

/// Runs the remaining schedule from the resume checkpoint (default: the
/// warm-up checkpoint; `full` creates it when missing). With a single-stage
/// selection, schedule entries of the other stage are skipped. A fresh run
/// truncates metrics.jsonl; a resumed run appends to it.
inline int cmd_train(const RunConfig& cfg, TrainStage stage, const std::optional<std::string>& resume,
                     std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    cfg.validate();
    const RunPaths paths{cfg.out};
    const Dataset d = detail::load_dataset(paths);
    const auto scorer = make_scorer(cfg.scorer);
    const auto echo = run_config_to_json(cfg);
    fs::create_directories(paths.checkpoints());

    TrainerState state;
    if (resume) {
      state = load_checkpoint(*resume);
    } else if (fs::exists(paths.checkpoint("warmup"))) {
      state = load_checkpoint(paths.checkpoint("warmup").string());
    } else if (stage == TrainStage::full) {
      state = detail::run_warmup(cfg, d);
      save_checkpoint(paths.checkpoint("warmup").string(), state, echo);
    } else {
      throw Error(ErrorCode::io_error, "no warm-up checkpoint at " + paths.checkpoint("warmup").string() +
                                           " (run warmup or pass --resume)");
    }
    if (state.policy.feature_dim() != d.spec.feature_dim() || !(state.policy.vocab() == d.vocab())) {
      throw Error(ErrorCode::dimension_mismatch, "checkpoint does not match the dataset vocabulary");
    }

    TrainConfig tcfg = cfg.train;
    if (stage != TrainStage::full) {
      const Stage keep = stage == TrainStage::step_rr ? Stage::step_rr : Stage::ans_co;
      for (auto& plan : tcfg.schedule) {
        if (plan.stage != keep) plan.steps = 0;
      }
    }

    std::ofstream metrics(paths.metrics(), std::ios::binary | (resume ? std::ios::app : std::ios::trunc));
    if (!metrics) throw Error(ErrorCode::io_error, "cannot write " + paths.metrics().string());

    Trainer trainer(std::move(state), tcfg, d.train, *scorer);
    trainer.run([&](const StepReport& r) { metrics << to_metrics_json(r).dump() << '\n'; },
                [&](const TrainerState& s, Stage finished) {
                  const bool skipped = (stage == TrainStage::step_rr && finished != Stage::step_rr) ||
                                       (stage == TrainStage::ans_co && finished != Stage::ans_co);
                  if (skipped) return;
                  save_checkpoint(paths.checkpoint(to_string(finished)).string(), s, echo);
                  save_checkpoint(paths.checkpoint("latest").string(), s, echo);
                  metrics.flush();
                });
    detail::write_config_echo(cfg);
    if (!d.eval.empty()) {
      out << detail::eval_json(evaluate(trainer.policy(), d.eval), Split::eval, cfg.seed).dump() << '\n';
    }
    return kExitOk;
  });
}

inline int cmd_eval(const RunConfig& cfg, const std::string& checkpoint, Split split, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    const RunPaths paths{cfg.out};
    TrainerState state;
    try {
      state = load_checkpoint(checkpoint);
    } catch (const Error& e) {
      throw Error(ErrorCode::io_error, std::string("unloadable checkpoint: ") + e.what());
    }
    const auto file = detail::read_split(paths, split);
    if (file.tasks.empty()) throw Error(ErrorCode::empty_split, std::string(to_string(split)) + " split is empty");
    out << detail::eval_json(evaluate(state.policy, file.tasks), split, file.spec.seed).dump() << '\n';
    return kExitOk;
  });
}

/// CSV columns: step, r_arr_mean, r_avc_mean, r_total_mean, clip_frac, u_mean.
/// Null values (Ans-CO steps have no rewards) become empty cells.
inline int cmd_export_curves(const std::string& metrics_path, const std::string& csv_path,
                             std::ostream& err = std::cerr) {
  return detail::guarded(err, [&]() -> int {
    std::ifstream in(metrics_path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io_error, "cannot open metrics file " + metrics_path);
    static constexpr std::array<std::string_view, 6> kColumns{"step", "r_arr_mean", "r_avc_mean",
                                                              "r_total_mean", "clip_frac", "u_mean"};
    static constexpr std::array<std::string_view, 11> kRequired{
        "stage", "step", "r_format_mean", "r_arr_mean", "r_avc_mean", "r_total_mean",
        "clip_frac", "ans_entropy", "u_mean", "grad_norm", "objective"};
    std::ostringstream csv;
    for (std::size_t i = 0; i < kColumns.size(); ++i) csv << (i ? "," : "") << kColumns[i];
    csv << '\n';
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto rec = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
      if (rec.is_discarded() || !rec.is_object()) {
        throw Error(ErrorCode::format_error, "line " + std::to_string(lineno) + ": not a JSON object");
      }
      for (auto key : kRequired) {
        const auto it = rec.find(key);
        if (it == rec.end()) {
          throw Error(ErrorCode::format_error, "line " + std::to_string(lineno) + ": missing field '" + std::string(key) + "'");
        }
        if (key != "stage" && !it->is_number() && !it->is_null()) {
          throw Error(ErrorCode::format_error, "line " + std::to_string(lineno) + ": field '" + std::string(key) + "' is not numeric");
        }
      }
      for (std::size_t i = 0; i < kColumns.size(); ++i) {
        if (i) csv << ',';
        const auto& v = rec.at(kColumns[i]);
        if (!v.is_null()) csv << v.dump();
      }
      csv << '\n';
    }
    detail::write_text(fs::path(csv_path), csv.str());
    return kExitOk;
  });
}

}  // namespace commrl
