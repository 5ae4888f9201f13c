#pragma once

// Checkpoint container (JSON):
//
// {
//   "format": "commrl.checkpoint", "version": 1,
//   "policy": {
//     "feature_dim": int, "hidden_dim": int,
//     "vocab": {"audio": [str], "visual": [str], "answer": [str]},
//     "tensors": {
//       "hidden": {"shape": [rows, cols], "data": [f64...]},   // only when hidden_dim > 0
//       "audio":  {"shape": [rows, cols], "data": [f64...]},
//       "visual": {...}, "answer": {...}
//     },
//     "malform_logit": f64
//   },
//   "trainer": {"rng_state": str, "global_step": int, "next_stage": int, "optimizer": "sgd"},
//   "config": {...}   // echo of the run configuration, informational
// }
//
// Tensors are row-major; the last column of every matrix is the bias. Doubles
// are written in shortest round-trip form, so load(save(x)) is bit-exact.

#include <fstream>
#include <string>

#include <json.hpp>

#include "commrl/error.hpp"
#include "commrl/optimizer.hpp"
#include "commrl/policy.hpp"

namespace commrl {

inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline nlohmann::json tensor_json(const ToyPolicy& p, const ToyPolicy::Block& b) {
  const auto params = p.params();
  return {{"shape", {b.rows, b.cols}},
          {"data", std::vector<double>(params.begin() + static_cast<std::ptrdiff_t>(b.offset),
                                       params.begin() + static_cast<std::ptrdiff_t>(b.offset + b.rows * b.cols))}};
}

inline void load_tensor(ToyPolicy& p, const ToyPolicy::Block& b, const nlohmann::json& j, std::string_view name) {
  const auto shape = j.at("shape").get<std::vector<std::size_t>>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (shape.size() != 2 || shape[0] != b.rows || shape[1] != b.cols || data.size() != b.rows * b.cols) {
    throw Error(ErrorCode::format_error, "tensor '" + std::string(name) + "' has the wrong shape");
  }
  std::copy(data.begin(), data.end(), p.params().begin() + static_cast<std::ptrdiff_t>(b.offset));
}

inline constexpr std::array<std::string_view, kNumHeads> kHeadNames{"audio", "visual", "answer"};

}  // namespace detail

inline nlohmann::json policy_to_json(const ToyPolicy& p) {
  nlohmann::json tensors;
  if (p.hidden_dim() > 0) tensors["hidden"] = detail::tensor_json(p, p.hidden_block());
  for (std::size_t h = 0; h < kNumHeads; ++h) {
    tensors[std::string(detail::kHeadNames[h])] = detail::tensor_json(p, p.head_block(h));
  }
  return {{"feature_dim", p.feature_dim()},
          {"hidden_dim", p.hidden_dim()},
          {"vocab", {{"audio", p.vocab().audio}, {"visual", p.vocab().visual}, {"answer", p.vocab().answer}}},
          {"tensors", tensors},
          {"malform_logit", p.malform_logit()}};
}

inline ToyPolicy policy_from_json(const nlohmann::json& j) {
  try {
    Vocabulary vocab;
    vocab.audio = j.at("vocab").at("audio").get<std::vector<std::string>>();
    vocab.visual = j.at("vocab").at("visual").get<std::vector<std::string>>();
    vocab.answer = j.at("vocab").at("answer").get<std::vector<std::string>>();
    ToyPolicy p(std::move(vocab), j.at("feature_dim").get<std::size_t>(), j.at("hidden_dim").get<std::size_t>());
    const auto& tensors = j.at("tensors");
    if (p.hidden_dim() > 0) detail::load_tensor(p, p.hidden_block(), tensors.at("hidden"), "hidden");
    for (std::size_t h = 0; h < kNumHeads; ++h) {
      detail::load_tensor(p, p.head_block(h), tensors.at(std::string(detail::kHeadNames[h])), detail::kHeadNames[h]);
    }
    p.malform_logit() = j.at("malform_logit").get<double>();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::format_error, std::string("bad policy record: ") + e.what());
  }
}

inline nlohmann::json checkpoint_to_json(const TrainerState& s, const nlohmann::json& config_echo = nullptr) {
  return {{"format", "commrl.checkpoint"},
          {"version", kCheckpointVersion},
          {"policy", policy_to_json(s.policy)},
          {"trainer",
           {{"rng_state", s.rng.state()},
            {"global_step", s.global_step},
            {"next_stage", s.next_stage},
            {"optimizer", "sgd"}}},
          {"config", config_echo}};
}

inline TrainerState checkpoint_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "commrl.checkpoint" || j.at("version") != kCheckpointVersion) {
      throw Error(ErrorCode::format_error, "not a version-1 checkpoint");
    }
    TrainerState s;
    s.policy = policy_from_json(j.at("policy"));
    const auto& t = j.at("trainer");
    s.rng.restore(t.at("rng_state").get<std::string>());
    s.global_step = t.at("global_step").get<long>();
    s.next_stage = t.at("next_stage").get<std::size_t>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::format_error, std::string("bad checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const std::string& path, const TrainerState& s, const nlohmann::json& config_echo = nullptr) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path);
  out << checkpoint_to_json(s, config_echo).dump(1) << '\n';
  if (!out) throw Error(ErrorCode::io_error, "failed writing " + path);
}

inline TrainerState load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot open checkpoint " + path);
  const auto j = nlohmann::json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw Error(ErrorCode::format_error, path + " is not valid JSON");
  return checkpoint_from_json(j);
}

}  // namespace commrl
