#pragma once

// Structured-response policy: three softmax heads (audio claim, visual claim,
// answer) over an observed feature vector, plus a Bernoulli head for emitting
// a corrupted serialization. Heads are linear in [x, 1] by default, or sit on
// a shared tanh hidden layer when hidden_dim > 0.
//
// Parameters live in one flat vector; gradients use the same layout.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "commrl/error.hpp"
#include "commrl/response_format.hpp"
#include "commrl/rng.hpp"
#include "commrl/vocab.hpp"

namespace commrl {

enum Head : std::size_t { kAudioHead = 0, kVisualHead = 1, kAnswerHead = 2 };
inline constexpr std::size_t kNumHeads = 3;

struct ResponseChoices {
  std::size_t audio = 0;
  std::size_t visual = 0;
  std::size_t answer = 0;
  bool malformed = false;

  std::size_t operator[](std::size_t head) const {
    return head == kAudioHead ? audio : head == kVisualHead ? visual : answer;
  }
  friend bool operator==(const ResponseChoices&, const ResponseChoices&) = default;
};

/// Log-probabilities of the four independent choices, in head order then malform.
using HeadLogProbs = std::array<double, 4>;

struct SampledResponse {
  std::string response_text;
  ResponseChoices choices;
  double log_prob = 0.0;
  HeadLogProbs head_log_probs{};
  std::vector<double> answer_token_distribution;
};

struct PolicyOutput {
  std::vector<double> input;   // [x, 1]
  std::vector<double> hidden;  // tanh activations, empty for the linear policy
  std::vector<double> head_input;  // [hidden or x, 1]
  std::array<std::vector<double>, kNumHeads> probs;
  std::array<std::vector<double>, kNumHeads> log_probs;
  double malform_prob = 0.0;
  double log_malform = 0.0;
  double log_wellformed = 0.0;
};

/// d(objective)/d(logit) for every head; the input to backpropagation.
struct LogitGradients {
  std::array<std::vector<double>, kNumHeads> heads;
  double malform = 0.0;
};

namespace detail {

inline void log_softmax(std::span<const double> logits, std::vector<double>& probs,
                        std::vector<double>& log_probs) {
  double max = -std::numeric_limits<double>::infinity();
  for (double z : logits) max = std::max(max, z);
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - max);
  const double log_norm = max + std::log(sum);
  probs.resize(logits.size());
  log_probs.resize(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k) {
    log_probs[k] = logits[k] - log_norm;
    probs[k] = std::exp(log_probs[k]);
  }
}

inline double log_sigmoid(double x) {
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

inline std::size_t sample_categorical(std::span<const double> probs, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    acc += probs[k];
    if (u < acc) return k;
  }
  // Rounding left u above the cumulative sum; take the last token with mass.
  for (std::size_t k = probs.size(); k-- > 0;) {
    if (probs[k] > 0.0) return k;
  }
  return probs.size() - 1;
}

}  // namespace detail

/// Shannon entropy in nats.
inline double entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

class ToyPolicy {
 public:
  struct Block {
    std::size_t offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
  };

  ToyPolicy() = default;

  ToyPolicy(Vocabulary vocab, std::size_t feature_dim, std::size_t hidden_dim = 0)
      : vocab_(std::move(vocab)), feature_dim_(feature_dim), hidden_dim_(hidden_dim) {
    if (feature_dim_ == 0) throw Error(ErrorCode::invalid_spec, "feature_dim must be positive");
    if (vocab_.audio.empty() || vocab_.visual.empty() || vocab_.answer.empty()) {
      throw Error(ErrorCode::invalid_spec, "vocabularies must be nonempty");
    }
    std::size_t offset = 0;
    if (hidden_dim_ > 0) {
      hidden_ = {offset, hidden_dim_, feature_dim_ + 1};
      offset += hidden_dim_ * (feature_dim_ + 1);
    }
    const std::size_t in = head_input_dim();
    const std::array<std::size_t, kNumHeads> sizes{vocab_.audio.size(), vocab_.visual.size(),
                                                  vocab_.answer.size()};
    for (std::size_t h = 0; h < kNumHeads; ++h) {
      heads_[h] = {offset, sizes[h], in};
      offset += sizes[h] * in;
    }
    malform_offset_ = offset++;
    params_.assign(offset, 0.0);
  }

  /// Hidden weights drawn from N(0, scale^2); head weights start at zero.
  void init_hidden(Rng& rng, double scale) {
    for (std::size_t i = 0; i < hidden_.rows * hidden_.cols; ++i) {
      params_[hidden_.offset + i] = scale * rng.normal();
    }
  }

  const Vocabulary& vocab() const { return vocab_; }
  std::size_t feature_dim() const { return feature_dim_; }
  std::size_t hidden_dim() const { return hidden_dim_; }
  std::size_t head_input_dim() const { return (hidden_dim_ > 0 ? hidden_dim_ : feature_dim_) + 1; }
  std::size_t num_params() const { return params_.size(); }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  const Block& head_block(std::size_t head) const { return heads_[head]; }
  const Block& hidden_block() const { return hidden_; }
  std::size_t malform_offset() const { return malform_offset_; }

  double& weight(const Block& b, std::size_t row, std::size_t col) {
    return params_[b.offset + row * b.cols + col];
  }
  double weight(const Block& b, std::size_t row, std::size_t col) const {
    return params_[b.offset + row * b.cols + col];
  }
  double& malform_logit() { return params_[malform_offset_]; }
  double malform_logit() const { return params_[malform_offset_]; }

  PolicyOutput forward(std::span<const double> features) const {
    if (features.size() != feature_dim_) {
      throw Error(ErrorCode::dimension_mismatch, "expected " + std::to_string(feature_dim_) +
                                                     " features, got " + std::to_string(features.size()));
    }
    PolicyOutput out;
    out.input.assign(features.begin(), features.end());
    out.input.push_back(1.0);
    if (hidden_dim_ > 0) {
      out.hidden.resize(hidden_dim_);
      for (std::size_t j = 0; j < hidden_dim_; ++j) out.hidden[j] = std::tanh(dot_row(hidden_, j, out.input));
      out.head_input = out.hidden;
      out.head_input.push_back(1.0);
    } else {
      out.head_input = out.input;
    }
    std::vector<double> logits;
    for (std::size_t h = 0; h < kNumHeads; ++h) {
      logits.resize(heads_[h].rows);
      for (std::size_t k = 0; k < heads_[h].rows; ++k) logits[k] = dot_row(heads_[h], k, out.head_input);
      detail::log_softmax(logits, out.probs[h], out.log_probs[h]);
    }
    const double m = malform_logit();
    out.log_malform = detail::log_sigmoid(m);
    out.log_wellformed = detail::log_sigmoid(-m);
    out.malform_prob = std::exp(out.log_malform);
    return out;
  }

  void check_choices(const ResponseChoices& c) const {
    if (c.audio >= vocab_.audio.size() || c.visual >= vocab_.visual.size() ||
        c.answer >= vocab_.answer.size()) {
      throw Error(ErrorCode::index_out_of_range, "choice index outside vocabulary");
    }
  }

  static HeadLogProbs head_log_probs(const PolicyOutput& out, const ResponseChoices& c) {
    return {out.log_probs[kAudioHead][c.audio], out.log_probs[kVisualHead][c.visual],
            out.log_probs[kAnswerHead][c.answer], c.malformed ? out.log_malform : out.log_wellformed};
  }

  HeadLogProbs head_log_probs(std::span<const double> features, const ResponseChoices& c) const {
    check_choices(c);
    return head_log_probs(forward(features), c);
  }

  /// Joint log-probability of the four choices.
  double log_prob(std::span<const double> features, const ResponseChoices& c) const {
    const auto parts = head_log_probs(features, c);
    return parts[0] + parts[1] + parts[2] + parts[3];
  }

  /// Logit gradients of log pi(c): onehot - p per head, m - sigmoid for malform.
  static LogitGradients log_prob_logit_grads(const PolicyOutput& out, const ResponseChoices& c,
                                             std::array<double, 4> weights = {1, 1, 1, 1}) {
    LogitGradients g;
    for (std::size_t h = 0; h < kNumHeads; ++h) {
      g.heads[h].resize(out.probs[h].size());
      for (std::size_t k = 0; k < out.probs[h].size(); ++k) {
        g.heads[h][k] = weights[h] * ((k == c[h] ? 1.0 : 0.0) - out.probs[h][k]);
      }
    }
    g.malform = weights[3] * ((c.malformed ? 1.0 : 0.0) - out.malform_prob);
    return g;
  }

  std::vector<double> grad_log_prob(std::span<const double> features, const ResponseChoices& c) const {
    check_choices(c);
    const auto out = forward(features);
    std::vector<double> grad(num_params(), 0.0);
    backprop(out, log_prob_logit_grads(out, c), 1.0, grad);
    return grad;
  }

  /// grad += scale * d(objective)/d(params), given logit gradients at `out`.
  void backprop(const PolicyOutput& out, const LogitGradients& g, double scale,
                std::span<double> grad) const {
    std::vector<double> d_hidden(hidden_dim_, 0.0);
    for (std::size_t h = 0; h < kNumHeads; ++h) {
      const Block& b = heads_[h];
      for (std::size_t k = 0; k < b.rows; ++k) {
        const double gk = scale * g.heads[h][k];
        if (gk == 0.0) continue;
        double* row = grad.data() + b.offset + k * b.cols;
        for (std::size_t j = 0; j < b.cols; ++j) row[j] += gk * out.head_input[j];
        for (std::size_t j = 0; j < hidden_dim_; ++j) d_hidden[j] += gk * weight(b, k, j);
      }
    }
    grad[malform_offset_] += scale * g.malform;
    for (std::size_t j = 0; j < hidden_dim_; ++j) {
      const double d_pre = d_hidden[j] * (1.0 - out.hidden[j] * out.hidden[j]);
      if (d_pre == 0.0) continue;
      double* row = grad.data() + hidden_.offset + j * hidden_.cols;
      for (std::size_t i = 0; i < hidden_.cols; ++i) row[i] += d_pre * out.input[i];
    }
  }

  double answer_entropy(std::span<const double> features) const {
    return entropy(forward(features).probs[kAnswerHead]);
  }

  /// Draws audio, visual, answer, then malform, in that order.
  SampledResponse sample(std::span<const double> features, Rng& rng) const {
    const auto out = forward(features);
    ResponseChoices c;
    c.audio = detail::sample_categorical(out.probs[kAudioHead], rng);
    c.visual = detail::sample_categorical(out.probs[kVisualHead], rng);
    c.answer = detail::sample_categorical(out.probs[kAnswerHead], rng);
    c.malformed = rng.uniform() < out.malform_prob;

    SampledResponse s;
    s.choices = c;
    s.head_log_probs = head_log_probs(out, c);
    s.log_prob = s.head_log_probs[0] + s.head_log_probs[1] + s.head_log_probs[2] + s.head_log_probs[3];
    s.answer_token_distribution = out.probs[kAnswerHead];
    s.response_text = render(c);
    return s;
  }

  /// Argmax of every head; malformed iff its probability exceeds 1/2.
  ResponseChoices greedy(std::span<const double> features) const {
    const auto out = forward(features);
    auto argmax = [](const std::vector<double>& p) {
      return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
    };
    return {argmax(out.probs[kAudioHead]), argmax(out.probs[kVisualHead]),
            argmax(out.probs[kAnswerHead]), out.malform_prob > 0.5};
  }

  StructuredResponse to_structured(const ResponseChoices& c) const {
    StructuredResponse r;
    r.a_think = audio_sentence(vocab_.audio[c.audio]);
    r.v_think = visual_sentence(vocab_.visual[c.visual]);
    if (c.answer != vocab_.null_answer()) r.answer = vocab_.answer[c.answer];
    return r;
  }

  /// Malformed responses lose their closing answer tag.
  std::string render(const ResponseChoices& c) const {
    check_choices(c);
    std::string text = serialize_response(to_structured(c));
    if (c.malformed) text.erase(text.size() - std::string_view("</answer>").size());
    return text;
  }

  friend bool operator==(const ToyPolicy& a, const ToyPolicy& b) {
    return a.vocab_ == b.vocab_ && a.feature_dim_ == b.feature_dim_ && a.hidden_dim_ == b.hidden_dim_ &&
           a.params_ == b.params_;
  }

 private:
  double dot_row(const Block& b, std::size_t row, std::span<const double> x) const {
    const double* w = params_.data() + b.offset + row * b.cols;
    double acc = 0.0;
    for (std::size_t j = 0; j < b.cols; ++j) acc += w[j] * x[j];
    return acc;
  }

  Vocabulary vocab_;
  std::size_t feature_dim_ = 0;
  std::size_t hidden_dim_ = 0;
  Block hidden_{};
  std::array<Block, kNumHeads> heads_{};
  std::size_t malform_offset_ = 0;
  std::vector<double> params_;
};

struct Demonstration {
  std::vector<double> features;
  ResponseChoices choices;
};

struct NllResult {
  double loss = 0.0;
  std::vector<double> grad;  // d(loss)/d(params)
};

/// Mean joint negative log-likelihood of the demonstrations.
inline NllResult mean_nll(const ToyPolicy& policy, std::span<const Demonstration> demos) {
  if (demos.empty()) throw Error(ErrorCode::empty_dataset, "no demonstrations");
  NllResult r;
  r.grad.assign(policy.num_params(), 0.0);
  const double scale = 1.0 / static_cast<double>(demos.size());
  for (const auto& d : demos) {
    policy.check_choices(d.choices);
    const auto out = policy.forward(d.features);
    const auto lp = ToyPolicy::head_log_probs(out, d.choices);
    r.loss -= scale * (lp[0] + lp[1] + lp[2] + lp[3]);
    policy.backprop(out, ToyPolicy::log_prob_logit_grads(out, d.choices), -scale, r.grad);
  }
  return r;
}

struct WarmupResult {
  ToyPolicy policy;
  std::vector<double> nll_history;  // before each epoch, then after the last
};

/// Full-batch gradient descent on the mean demonstration NLL.
inline WarmupResult warmup_fit(ToyPolicy policy, std::span<const Demonstration> demos, int epochs,
                               double lr) {
  if (demos.empty()) throw Error(ErrorCode::empty_dataset, "no demonstrations");
  WarmupResult result;
  for (int e = 0; e < epochs; ++e) {
    const auto step = mean_nll(policy, demos);
    result.nll_history.push_back(step.loss);
    auto params = policy.params();
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * step.grad[i];
  }
  result.nll_history.push_back(mean_nll(policy, demos).loss);
  result.policy = std::move(policy);
  return result;
}

}  // namespace commrl
