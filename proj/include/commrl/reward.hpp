#pragma once

// Step-wise reasoning reward: format + audio reasoning rationality (ARR) +
// audio-visual correlation (AVC).

#include <optional>
#include <string>
#include <string_view>

#include "commrl/response_format.hpp"
#include "commrl/similarity.hpp"

namespace commrl {

struct RewardBreakdown {
  double r_format = 0.0;
  double r_arr = 0.0;
  double r_avc = 0.0;
  double total = 0.0;

  friend bool operator==(const RewardBreakdown&, const RewardBreakdown&) = default;
};

struct AnswerJudgment {
  std::optional<std::string> predicted;
  std::string ground_truth;
  bool correct = false;
  bool is_null = true;
};

namespace detail {
inline std::string normalize_answer(std::string_view s) {
  std::string out(trim(s));
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}
}  // namespace detail

/// Case-insensitive, whitespace-trimmed exact match.
inline AnswerJudgment judge_answer(const std::optional<std::string>& predicted,
                                   std::string_view ground_truth) {
  AnswerJudgment j;
  j.predicted = predicted;
  j.ground_truth = std::string(ground_truth);
  j.is_null = !predicted.has_value();
  j.correct = !j.is_null && detail::normalize_answer(*predicted) == detail::normalize_answer(ground_truth);
  return j;
}

/// 1 iff S(o1|o_ref) > omega (strict) and the answer is correct.
inline double arr_reward(std::string_view audio_think, std::string_view reference,
                         const AnswerJudgment& judgment, double omega, const Scorer& scorer) {
  if (!judgment.correct) return 0.0;
  const double s = scorer.score(ScorerTask::consistency(), audio_think, reference).value();
  return s > omega ? 1.0 : 0.0;
}

/// 1 + I(o1|o2) when correct, I(o1|o2) when wrong but non-null, 0 when null.
inline double avc_reward(std::string_view audio_think, std::string_view visual_think,
                         const AnswerJudgment& judgment, const Scorer& scorer) {
  if (judgment.is_null) return 0.0;
  const double coherence = scorer.score(ScorerTask::coherence(), audio_think, visual_think).value();
  return judgment.correct ? 1.0 + coherence : coherence;
}

struct RewardConfig {
  double omega = 0.8;
};

/// Unparseable responses score zero on every component.
inline RewardBreakdown total_reward(const ParseOutcome& parse, std::string_view reference,
                                    std::string_view ground_truth, const RewardConfig& cfg,
                                    const Scorer& scorer) {
  RewardBreakdown b;
  if (!parse.format_ok || !parse.response) return b;
  const auto& r = *parse.response;
  const auto judgment = judge_answer(r.answer, ground_truth);
  b.r_format = format_reward(parse);
  b.r_arr = arr_reward(r.a_think, reference, judgment, cfg.omega, scorer);
  b.r_avc = avc_reward(r.a_think, r.v_think, judgment, scorer);
  b.total = b.r_format + b.r_arr + b.r_avc;
  return b;
}

}  // namespace commrl
