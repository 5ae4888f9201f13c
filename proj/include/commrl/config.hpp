#pragma once

// Run configuration: one JSON file, then COMM_RL_* environment variables,
// then command-line flags (flags win). A single "seed" drives both the data
// generator and the trainer.

#include <cstdlib>
#include <fstream>
#include <memory>
#include <type_traits>
#include <optional>
#include <string>

#include <json.hpp>

#include "commrl/env.hpp"
#include "commrl/error.hpp"
#include "commrl/optimizer.hpp"
#include "commrl/remote_scorer.hpp"
#include "commrl/similarity.hpp"

namespace commrl {

struct WarmupConfig {
  int epochs = 300;
  double learning_rate = 0.5;
};

struct PolicyConfig {
  std::size_t hidden_dim = 0;
  double init_scale = 0.1;  // hidden layer only
};

struct ScorerConfig {
  std::string kind = "local";  // local | remote
  std::size_t dim = kDefaultEmbedDim;
  RemoteScorerOptions remote;
};

struct RunConfig {
  std::uint64_t seed = 7;
  std::string out = "runs/reference";
  EnvSpec env;
  TrainConfig train;
  WarmupConfig warmup;
  PolicyConfig policy;
  ScorerConfig scorer;

  /// Propagates the master seed into the per-module seeds.
  void apply_seed() {
    env.seed = seed;
    train.seed = seed ^ 0x5851f42d4c957f2dULL;
  }

  void validate() const {
    env.validate();
    train.validate();
    if (warmup.epochs < 0 || !(warmup.learning_rate >= 0.0)) {
      throw Error(ErrorCode::invalid_config, "warmup epochs and learning_rate must be >= 0");
    }
    if (scorer.kind != "local" && scorer.kind != "remote") {
      throw Error(ErrorCode::invalid_config, "scorer.kind must be local or remote");
    }
    if (scorer.kind == "remote" && scorer.remote.endpoint.empty()) {
      throw Error(ErrorCode::invalid_config, "remote scorer needs scorer.remote.endpoint");
    }
    if (scorer.dim == 0) throw Error(ErrorCode::invalid_config, "scorer.dim must be positive");
    if (out.empty()) throw Error(ErrorCode::invalid_config, "out must be set");
  }
};

inline nlohmann::json run_config_to_json(const RunConfig& c) {
  nlohmann::json env = c.env;
  env.erase("seed");
  nlohmann::json train = c.train;
  train.erase("seed");
  return {{"seed", c.seed},
          {"out", c.out},
          {"env", env},
          {"train", train},
          {"warmup", {{"epochs", c.warmup.epochs}, {"learning_rate", c.warmup.learning_rate}}},
          {"policy", {{"hidden_dim", c.policy.hidden_dim}, {"init_scale", c.policy.init_scale}}},
          {"scorer",
           {{"kind", c.scorer.kind},
            {"dim", c.scorer.dim},
            {"remote",
             {{"endpoint", c.scorer.remote.endpoint},
              {"timeout_ms", c.scorer.remote.timeout_ms},
              {"attempts", c.scorer.remote.attempts},
              {"backoff_ms", c.scorer.remote.backoff_ms}}}}}};
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  try {
    if (!j.is_object()) throw Error(ErrorCode::invalid_config, "config root must be an object");
    c.seed = j.value("seed", c.seed);
    c.out = j.value("out", c.out);
    if (j.contains("env")) from_json(j.at("env"), c.env);
    if (j.contains("train")) from_json(j.at("train"), c.train);
    if (j.contains("warmup")) {
      c.warmup.epochs = j["warmup"].value("epochs", c.warmup.epochs);
      c.warmup.learning_rate = j["warmup"].value("learning_rate", c.warmup.learning_rate);
    }
    if (j.contains("policy")) {
      c.policy.hidden_dim = j["policy"].value("hidden_dim", c.policy.hidden_dim);
      c.policy.init_scale = j["policy"].value("init_scale", c.policy.init_scale);
    }
    if (j.contains("scorer")) {
      const auto& s = j.at("scorer");
      c.scorer.kind = s.value("kind", c.scorer.kind);
      c.scorer.dim = s.value("dim", c.scorer.dim);
      if (s.contains("remote")) {
        const auto& r = s.at("remote");
        c.scorer.remote.endpoint = r.value("endpoint", c.scorer.remote.endpoint);
        c.scorer.remote.timeout_ms = r.value("timeout_ms", c.scorer.remote.timeout_ms);
        c.scorer.remote.attempts = r.value("attempts", c.scorer.remote.attempts);
        c.scorer.remote.backoff_ms = r.value("backoff_ms", c.scorer.remote.backoff_ms);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::invalid_config, e.what());
  }
  c.apply_seed();
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::invalid_config, "cannot open config " + path);
  const auto j = nlohmann::json::parse(in, nullptr, /*allow_exceptions=*/false, /*ignore_comments=*/true);
  if (j.is_discarded()) throw Error(ErrorCode::invalid_config, path + " is not valid JSON");
  return run_config_from_json(j);
}

namespace detail {
inline std::optional<std::string> getenv_str(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

template <typename T>
T parse_number(const std::string& name, const std::string& text) {
  try {
    std::size_t used = 0;
    T value{};
    if constexpr (std::is_same_v<T, std::uint64_t>) {
      value = std::stoull(text, &used);
    } else {
      value = static_cast<T>(std::stoll(text, &used));
    }
    if (used != text.size()) throw std::invalid_argument(text);
    return value;
  } catch (const std::exception&) {
    throw Error(ErrorCode::invalid_config, name + " is not an integer: '" + text + "'");
  }
}
}  // namespace detail

/// COMM_RL_SEED, COMM_RL_OUT, COMM_RL_THREADS, COMM_RL_SCORER_ENDPOINT
/// (switches to the remote scorer), COMM_RL_SCORER_TIMEOUT_MS.
inline void apply_env_overrides(RunConfig& c) {
  if (auto v = detail::getenv_str("COMM_RL_SEED")) c.seed = detail::parse_number<std::uint64_t>("COMM_RL_SEED", *v);
  if (auto v = detail::getenv_str("COMM_RL_OUT")) c.out = *v;
  if (auto v = detail::getenv_str("COMM_RL_THREADS")) c.train.threads = detail::parse_number<int>("COMM_RL_THREADS", *v);
  if (auto v = detail::getenv_str("COMM_RL_SCORER_ENDPOINT")) {
    c.scorer.kind = "remote";
    c.scorer.remote.endpoint = *v;
  }
  if (auto v = detail::getenv_str("COMM_RL_SCORER_TIMEOUT_MS")) {
    c.scorer.remote.timeout_ms = detail::parse_number<int>("COMM_RL_SCORER_TIMEOUT_MS", *v);
  }
  c.apply_seed();
}

inline std::unique_ptr<Scorer> make_scorer(const ScorerConfig& s) {
  if (s.kind == "remote") return std::make_unique<RemoteScorer>(s.remote);
  return std::make_unique<LocalScorer>(s.dim);
}

}  // namespace commrl
