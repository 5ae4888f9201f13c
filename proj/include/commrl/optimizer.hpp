#pragma once

// Two-stage optimization.
//
//  * Step-RR: sample G responses per task, score them with the step-wise
//    reasoning reward, normalize within the group, and take a gradient-ascent
//    step on the clipped surrogate  mean_i min(r_i A_i, clip(r_i, 1-eps, 1+eps) A_i).
//    The KL term is off by default (beta = 0); with beta > 0 it is measured
//    against the policy frozen at the start of the stage.
//  * Ans-CO: descent on  NLL + lambda_eff * H(answer head), where lambda_eff
//    is zero for any example whose normalized answer entropy u exceeds the gate.

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <mutex>
#include <numeric>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "commrl/advantage.hpp"
#include "commrl/env.hpp"
#include "commrl/error.hpp"
#include "commrl/policy.hpp"
#include "commrl/reward.hpp"
#include "commrl/rng.hpp"
#include "commrl/similarity.hpp"

namespace commrl {

enum class Stage { step_rr, ans_co };
enum class RatioMode { sequence, per_head };

constexpr std::string_view to_string(Stage s) { return s == Stage::step_rr ? "step_rr" : "ans_co"; }
constexpr std::string_view to_string(RatioMode m) { return m == RatioMode::sequence ? "sequence" : "per_head"; }

inline Stage stage_from_string(std::string_view s) {
  if (s == "step_rr") return Stage::step_rr;
  if (s == "ans_co") return Stage::ans_co;
  throw Error(ErrorCode::invalid_config, "unknown stage '" + std::string(s) + "'");
}

inline RatioMode ratio_mode_from_string(std::string_view s) {
  if (s == "sequence") return RatioMode::sequence;
  if (s == "per_head") return RatioMode::per_head;
  throw Error(ErrorCode::invalid_config, "unknown ratio_mode '" + std::string(s) + "'");
}

struct StagePlan {
  Stage stage = Stage::step_rr;
  int steps = 0;
  friend bool operator==(const StagePlan&, const StagePlan&) = default;
};

struct TrainConfig {
  int group_size = 8;
  double clip_epsilon = 0.2;
  double kl_beta = 0.0;
  double arr_threshold = 0.8;  // omega
  double entropy_lambda = 0.5;
  double uncertainty_gate = 0.75;
  double learning_rate = 0.5;
  double ans_co_learning_rate = 0.1;
  int batch_size = 512;  // tasks (groups) per Step-RR step, examples per Ans-CO step
  int inner_epochs = 1;
  double max_grad_norm = 0.0;  // 0 disables clipping
  RatioMode ratio_mode = RatioMode::sequence;
  std::vector<StagePlan> schedule{{Stage::step_rr, 500}, {Stage::ans_co, 100}};
  std::uint64_t seed = 1;
  int threads = 1;

  void validate() const {
    auto fail = [](const std::string& m) { throw Error(ErrorCode::invalid_config, m); };
    if (group_size < 2) fail("group_size must be >= 2");
    if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) fail("clip_epsilon must lie in (0,1)");
    if (!(arr_threshold > 0.0 && arr_threshold < 1.0)) fail("arr_threshold must lie in (0,1)");
    if (!(entropy_lambda >= 0.0)) fail("entropy_lambda must be >= 0");
    if (!(uncertainty_gate > 0.0 && uncertainty_gate <= 1.0)) fail("uncertainty_gate must lie in (0,1]");
    if (!(kl_beta >= 0.0)) fail("kl_beta must be >= 0");
    if (!(learning_rate >= 0.0) || !(ans_co_learning_rate >= 0.0)) fail("learning rates must be >= 0");
    if (batch_size < 1) fail("batch_size must be >= 1");
    if (inner_epochs < 1) fail("inner_epochs must be >= 1");
    if (threads < 1) fail("threads must be >= 1");
    for (const auto& p : schedule) {
      if (p.steps < 0) fail("stage step counts must be >= 0");
    }
  }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  nlohmann::json schedule = nlohmann::json::array();
  for (const auto& p : c.schedule) schedule.push_back({{"stage", to_string(p.stage)}, {"steps", p.steps}});
  j = {{"group_size", c.group_size}, {"clip_epsilon", c.clip_epsilon}, {"kl_beta", c.kl_beta},
       {"arr_threshold", c.arr_threshold}, {"entropy_lambda", c.entropy_lambda},
       {"uncertainty_gate", c.uncertainty_gate}, {"learning_rate", c.learning_rate},
       {"ans_co_learning_rate", c.ans_co_learning_rate}, {"batch_size", c.batch_size},
       {"inner_epochs", c.inner_epochs}, {"max_grad_norm", c.max_grad_norm},
       {"ratio_mode", to_string(c.ratio_mode)}, {"schedule", schedule}, {"seed", c.seed},
       {"threads", c.threads}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.group_size = j.value("group_size", c.group_size);
  c.clip_epsilon = j.value("clip_epsilon", c.clip_epsilon);
  c.kl_beta = j.value("kl_beta", c.kl_beta);
  c.arr_threshold = j.value("arr_threshold", c.arr_threshold);
  c.entropy_lambda = j.value("entropy_lambda", c.entropy_lambda);
  c.uncertainty_gate = j.value("uncertainty_gate", c.uncertainty_gate);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.ans_co_learning_rate = j.value("ans_co_learning_rate", c.ans_co_learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.inner_epochs = j.value("inner_epochs", c.inner_epochs);
  c.max_grad_norm = j.value("max_grad_norm", c.max_grad_norm);
  if (j.contains("ratio_mode")) c.ratio_mode = ratio_mode_from_string(j.at("ratio_mode").get<std::string>());
  if (j.contains("schedule")) {
    c.schedule.clear();
    for (const auto& p : j.at("schedule")) {
      c.schedule.push_back({stage_from_string(p.at("stage").get<std::string>()), p.at("steps").get<int>()});
    }
  }
  c.seed = j.value("seed", c.seed);
  c.threads = j.value("threads", c.threads);
}

// ---- rollouts ------------------------------------------------------------------

struct RolloutGroup {
  std::string task_id;
  std::vector<double> features;
  std::vector<SampledResponse> samples;
  std::vector<std::optional<StructuredResponse>> responses;  // empty when unparseable
  std::vector<double> old_log_probs;
  std::vector<HeadLogProbs> old_head_log_probs;
  std::vector<RewardBreakdown> rewards;
  std::vector<double> advantages;

  std::size_t size() const { return samples.size(); }
};

/// Rewards and advantages for already-drawn samples; old log-probs are taken
/// from the samples as recorded at draw time.
inline RolloutGroup score_group(const TaskInstance& task, std::vector<SampledResponse> samples,
                                const TrainConfig& cfg, const Scorer& scorer) {
  RolloutGroup g;
  g.task_id = task.id;
  g.features = task.features;
  const RewardConfig rcfg{cfg.arr_threshold};
  std::vector<double> totals;
  for (const auto& s : samples) {
    const auto parsed = parse_response(s.response_text);
    g.responses.push_back(parsed.response);
    g.old_log_probs.push_back(s.log_prob);
    g.old_head_log_probs.push_back(s.head_log_probs);
    g.rewards.push_back(total_reward(parsed, task.reference_reasoning, task.ground_truth, rcfg, scorer));
    totals.push_back(g.rewards.back().total);
  }
  g.samples = std::move(samples);
  g.advantages = normalize_advantages(totals);
  return g;
}

inline RolloutGroup rollout_group(const ToyPolicy& policy, const TaskInstance& task, const TrainConfig& cfg,
                                  const Scorer& scorer, Rng& rng) {
  std::vector<SampledResponse> samples;
  samples.reserve(static_cast<std::size_t>(cfg.group_size));
  for (int i = 0; i < cfg.group_size; ++i) samples.push_back(policy.sample(task.features, rng));
  return score_group(task, std::move(samples), cfg, scorer);
}

// ---- clipped surrogate -----------------------------------------------------------

struct SurrogateResult {
  double objective = 0.0;
  std::vector<double> grad;  // ascent direction d(objective)/d(params)
  double clip_fraction = 0.0;
  double kl = 0.0;
};

namespace detail {

/// KL(p || q) of the factorized policy at one input, with its logit gradients.
inline double policy_kl(const PolicyOutput& p, const PolicyOutput& q, LogitGradients& g) {
  double total = 0.0;
  for (std::size_t h = 0; h < kNumHeads; ++h) {
    double kl = 0.0;
    for (std::size_t k = 0; k < p.probs[h].size(); ++k) {
      kl += p.probs[h][k] * (p.log_probs[h][k] - q.log_probs[h][k]);
    }
    g.heads[h].resize(p.probs[h].size());
    for (std::size_t k = 0; k < p.probs[h].size(); ++k) {
      g.heads[h][k] = p.probs[h][k] * (p.log_probs[h][k] - q.log_probs[h][k] - kl);
    }
    total += kl;
  }
  const double m = p.malform_prob;
  const double log_odds_p = p.log_malform - p.log_wellformed;
  const double log_odds_q = q.log_malform - q.log_wellformed;
  total += m * (p.log_malform - q.log_malform) + (1.0 - m) * (p.log_wellformed - q.log_wellformed);
  g.malform = m * (1.0 - m) * (log_odds_p - log_odds_q);
  return total;
}

}  // namespace detail

/// Mean over the group of min(ratio*A, clip(ratio)*A), minus beta*KL to
/// `snapshot` when beta > 0. Gradient flows only through terms where the
/// unclipped product is the minimum.
inline SurrogateResult clipped_surrogate(const ToyPolicy& policy, const RolloutGroup& group, const TrainConfig& cfg,
                                         const ToyPolicy* snapshot = nullptr) {
  const std::size_t n = group.size();
  if (group.advantages.size() != n || group.old_log_probs.size() != n || group.old_head_log_probs.size() != n || n == 0) {
    throw Error(ErrorCode::missing_advantages, "group " + group.task_id + " lacks advantages or old log-probs");
  }
  SurrogateResult r;
  r.grad.assign(policy.num_params(), 0.0);
  const auto out = policy.forward(group.features);
  const double inv_n = 1.0 / static_cast<double>(n);
  const double lo = 1.0 - cfg.clip_epsilon;
  const double hi = 1.0 + cfg.clip_epsilon;
  std::size_t clipped = 0;

  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = group.samples[i].choices;
    const auto lp = ToyPolicy::head_log_probs(out, c);
    const double adv = group.advantages[i];
    double ratio = 0.0;
    std::array<double, 4> weights{};
    if (cfg.ratio_mode == RatioMode::sequence) {
      ratio = std::exp((lp[0] + lp[1] + lp[2] + lp[3]) - group.old_log_probs[i]);
      weights.fill(ratio);
    } else {
      for (std::size_t h = 0; h < 4; ++h) {
        weights[h] = 0.25 * std::exp(lp[h] - group.old_head_log_probs[i][h]);
        ratio += weights[h];
      }
    }
    const double unclipped = ratio * adv;
    const double clipped_term = std::clamp(ratio, lo, hi) * adv;
    if (unclipped <= clipped_term) {
      r.objective += inv_n * unclipped;
      if (adv != 0.0) policy.backprop(out, ToyPolicy::log_prob_logit_grads(out, c, weights), adv * inv_n, r.grad);
    } else {
      r.objective += inv_n * clipped_term;
      ++clipped;
    }
  }
  r.clip_fraction = static_cast<double>(clipped) * inv_n;

  if (cfg.kl_beta > 0.0) {
    if (snapshot == nullptr) throw Error(ErrorCode::invalid_config, "kl_beta > 0 requires a policy snapshot");
    LogitGradients g;
    r.kl = detail::policy_kl(out, snapshot->forward(group.features), g);
    r.objective -= cfg.kl_beta * r.kl;
    policy.backprop(out, g, -cfg.kl_beta, r.grad);
  }
  return r;
}

// ---- Ans-CO ----------------------------------------------------------------------

struct UncertaintyReport {
  double u = 0.0;
  std::vector<double> per_position_entropy;
};

/// Normalized answer entropy H / ln|V|; the toy policy has one answer position.
inline UncertaintyReport uncertainty(const ToyPolicy& policy, std::span<const double> features) {
  const auto out = policy.forward(features);
  const double h = entropy(out.probs[kAnswerHead]);
  const double max_h = std::log(static_cast<double>(out.probs[kAnswerHead].size()));
  return {max_h > 0.0 ? h / max_h : 0.0, {h}};
}

struct AnsCoResult {
  double loss = 0.0;
  std::vector<double> grad;  // d(loss)/d(params)
  double nll_mean = 0.0;
  double entropy_mean = 0.0;
  double u_mean = 0.0;
  std::size_t gated = 0;  // examples with lambda_eff = 0 because u > gate
};

inline AnsCoResult ans_co_loss(const ToyPolicy& policy, std::span<const Demonstration> batch, const TrainConfig& cfg) {
  if (batch.empty()) throw Error(ErrorCode::empty_batch, "Ans-CO batch is empty");
  AnsCoResult r;
  r.grad.assign(policy.num_params(), 0.0);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (const auto& ex : batch) {
    policy.check_choices(ex.choices);
    const auto out = policy.forward(ex.features);
    const auto lp = ToyPolicy::head_log_probs(out, ex.choices);
    const double nll = -(lp[0] + lp[1] + lp[2] + lp[3]);
    const auto& p = out.probs[kAnswerHead];
    const double h = entropy(p);
    const double u = h / std::log(static_cast<double>(p.size()));
    const double lambda_eff = u > cfg.uncertainty_gate ? 0.0 : cfg.entropy_lambda;
    if (lambda_eff == 0.0 && cfg.entropy_lambda != 0.0) ++r.gated;

    r.loss += inv_b * (nll + lambda_eff * h);
    r.nll_mean += inv_b * nll;
    r.entropy_mean += inv_b * h;
    r.u_mean += inv_b * u;

    auto g = ToyPolicy::log_prob_logit_grads(out, ex.choices);
    for (auto& head : g.heads) {
      for (auto& v : head) v = -v;
    }
    g.malform = -g.malform;
    if (lambda_eff != 0.0) {
      // dH/dz_k = -p_k (log p_k + H)
      for (std::size_t k = 0; k < p.size(); ++k) {
        g.heads[kAnswerHead][k] += lambda_eff * -p[k] * (out.log_probs[kAnswerHead][k] + h);
      }
    }
    policy.backprop(out, g, inv_b, r.grad);
  }
  return r;
}

// ---- training loop -------------------------------------------------------------

struct StepReport {
  Stage stage = Stage::step_rr;
  long step = 0;
  std::optional<double> r_format_mean;
  std::optional<double> r_arr_mean;
  std::optional<double> r_avc_mean;
  std::optional<double> r_total_mean;
  double mean_abs_advantage = 0.0;
  double objective = 0.0;
  double clip_frac = 0.0;
  double ans_entropy = 0.0;
  double u_mean = 0.0;
  double grad_norm = 0.0;
};

/// One JSONL metrics record; field names are part of the file format.
inline nlohmann::ordered_json to_metrics_json(const StepReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return nlohmann::ordered_json{{"stage", to_string(r.stage)},   {"step", r.step},
                        {"r_format_mean", opt(r.r_format_mean)}, {"r_arr_mean", opt(r.r_arr_mean)},
                        {"r_avc_mean", opt(r.r_avc_mean)},       {"r_total_mean", opt(r.r_total_mean)},
                        {"clip_frac", r.clip_frac},              {"ans_entropy", r.ans_entropy},
                        {"u_mean", r.u_mean},                    {"grad_norm", r.grad_norm},
                        {"objective", r.objective}};
}

/// Read-shared during rollouts, exclusive during updates.
class PolicyStore {
 public:
  explicit PolicyStore(ToyPolicy policy) : policy_(std::move(policy)) {}

  template <typename F>
  decltype(auto) read(F&& f) const {
    std::shared_lock lock(mutex_);
    return f(static_cast<const ToyPolicy&>(policy_));
  }

  template <typename F>
  decltype(auto) write(F&& f) {
    std::unique_lock lock(mutex_);
    return f(policy_);
  }

  ToyPolicy snapshot() const {
    return read([](const ToyPolicy& p) { return p; });
  }

 private:
  mutable std::shared_mutex mutex_;
  ToyPolicy policy_;
};

namespace detail {

inline double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

/// params += direction * lr, after optional norm clipping; returns the pre-clip norm.
inline double apply_step(ToyPolicy& policy, std::vector<double>& direction, double lr, double max_norm) {
  const double norm = l2_norm(direction);
  double scale = lr;
  if (max_norm > 0.0 && norm > max_norm) scale *= max_norm / norm;
  auto params = policy.params();
  for (std::size_t i = 0; i < params.size(); ++i) params[i] += scale * direction[i];
  return norm;
}

}  // namespace detail

/// Persistent trainer state: everything needed to resume at a stage boundary.
struct TrainerState {
  ToyPolicy policy;
  Rng rng;
  long global_step = 0;
  std::size_t next_stage = 0;  // index into the schedule
};

class Trainer {
 public:
  using ReportSink = std::function<void(const StepReport&)>;
  using StageSink = std::function<void(const TrainerState&, Stage)>;

  Trainer(TrainerState state, TrainConfig cfg, std::vector<TaskInstance> train_tasks, const Scorer& scorer)
      : store_(std::move(state.policy)),
        rng_(state.rng),
        global_step_(state.global_step),
        next_stage_(state.next_stage),
        cfg_(std::move(cfg)),
        tasks_(std::move(train_tasks)),
        scorer_(scorer) {
    cfg_.validate();
    if (tasks_.empty()) throw Error(ErrorCode::empty_dataset, "training split is empty");
    const auto vocab = store_.read([](const ToyPolicy& p) { return p.vocab(); });
    labeled_ = gold_demonstrations(vocab, tasks_);
    snapshot_ = store_.snapshot();
  }

  TrainerState state() const { return {store_.snapshot(), rng_, global_step_, next_stage_}; }
  ToyPolicy policy() const { return store_.snapshot(); }
  const TrainConfig& config() const { return cfg_; }

  /// Freezes the KL reference; called at every stage start.
  void begin_stage() { snapshot_ = store_.snapshot(); }

  std::vector<RolloutGroup> collect_rollouts() {
    const auto picks = draw_batch(tasks_.size());
    std::vector<std::uint64_t> seeds(picks.size());
    for (auto& s : seeds) s = rng_.next_u64();
    std::vector<RolloutGroup> groups(picks.size());
    auto work = [&](std::size_t begin, std::size_t end) {
      store_.read([&](const ToyPolicy& p) {
        for (std::size_t b = begin; b < end; ++b) {
          Rng local(seeds[b]);
          groups[b] = rollout_group(p, tasks_[picks[b]], cfg_, scorer_, local);
        }
        return 0;
      });
    };
    run_parallel(picks.size(), work);
    return groups;
  }

  StepReport step_rr_update(const std::vector<RolloutGroup>& groups) {
    if (groups.empty()) throw Error(ErrorCode::empty_batch, "no rollout groups");
    StepReport rep;
    rep.stage = Stage::step_rr;
    rep.step = ++global_step_;

    double fmt = 0, arr = 0, avc = 0, tot = 0, adv = 0, h = 0, u = 0;
    std::size_t samples = 0;
    store_.read([&](const ToyPolicy& p) {
      for (const auto& g : groups) {
        for (std::size_t i = 0; i < g.size(); ++i) {
          fmt += g.rewards[i].r_format;
          arr += g.rewards[i].r_arr;
          avc += g.rewards[i].r_avc;
          tot += g.rewards[i].total;
          adv += std::abs(g.advantages[i]);
          ++samples;
        }
        const auto unc = uncertainty(p, g.features);
        h += unc.per_position_entropy.front();
        u += unc.u;
      }
      return 0;
    });
    const double ns = static_cast<double>(samples);
    const double ng = static_cast<double>(groups.size());
    rep.r_format_mean = fmt / ns;
    rep.r_arr_mean = arr / ns;
    rep.r_avc_mean = avc / ns;
    rep.r_total_mean = tot / ns;
    rep.mean_abs_advantage = adv / ns;
    rep.ans_entropy = h / ng;
    rep.u_mean = u / ng;

    double clip_sum = 0.0;
    for (int epoch = 0; epoch < cfg_.inner_epochs; ++epoch) {
      store_.write([&](ToyPolicy& p) {
        std::vector<double> direction(p.num_params(), 0.0);
        double objective = 0.0;
        double clip = 0.0;
        for (const auto& g : groups) {
          const auto s = clipped_surrogate(p, g, cfg_, &snapshot_);
          objective += s.objective / ng;
          clip += s.clip_fraction / ng;
          for (std::size_t i = 0; i < direction.size(); ++i) direction[i] += s.grad[i] / ng;
        }
        const double norm = detail::apply_step(p, direction, cfg_.learning_rate, cfg_.max_grad_norm);
        if (epoch == 0) {
          rep.objective = objective;
          rep.grad_norm = norm;
        }
        clip_sum += clip;
        return 0;
      });
    }
    rep.clip_frac = clip_sum / cfg_.inner_epochs;
    return rep;
  }

  StepReport step_rr_step() { return step_rr_update(collect_rollouts()); }

  StepReport ans_co_step() {
    std::vector<Demonstration> batch;
    batch.reserve(static_cast<std::size_t>(cfg_.batch_size));
    for (auto i : draw_batch(labeled_.size())) batch.push_back(labeled_[i]);
    StepReport rep;
    rep.stage = Stage::ans_co;
    rep.step = ++global_step_;
    store_.write([&](ToyPolicy& p) {
      auto res = ans_co_loss(p, batch, cfg_);
      rep.objective = res.loss;
      rep.ans_entropy = res.entropy_mean;
      rep.u_mean = res.u_mean;
      for (auto& g : res.grad) g = -g;
      rep.grad_norm = detail::apply_step(p, res.grad, cfg_.ans_co_learning_rate, cfg_.max_grad_norm);
      return 0;
    });
    return rep;
  }

  /// Runs the remaining stages of the schedule. `on_stage` fires after each
  /// completed stage with the resumable state.
  std::vector<StepReport> run(const ReportSink& on_report = {}, const StageSink& on_stage = {},
                              std::optional<std::size_t> stop_after_stage = std::nullopt) {
    std::vector<StepReport> reports;
    while (next_stage_ < cfg_.schedule.size()) {
      const auto plan = cfg_.schedule[next_stage_];
      begin_stage();
      for (int s = 0; s < plan.steps; ++s) {
        reports.push_back(plan.stage == Stage::step_rr ? step_rr_step() : ans_co_step());
        if (on_report) on_report(reports.back());
      }
      ++next_stage_;
      if (on_stage) on_stage(state(), plan.stage);
      if (stop_after_stage && next_stage_ > *stop_after_stage) break;
    }
    return reports;
  }

 private:
  // Sampling without replacement: a batch of k*n covers every index exactly k times.
  std::vector<std::size_t> draw_batch(std::size_t n) {
    std::vector<std::size_t> picks;
    picks.reserve(static_cast<std::size_t>(cfg_.batch_size));
    std::vector<std::size_t> perm(n);
    while (picks.size() < static_cast<std::size_t>(cfg_.batch_size)) {
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      const std::size_t take = std::min(n, static_cast<std::size_t>(cfg_.batch_size) - picks.size());
      for (std::size_t i = 0; i < take; ++i) {
        std::swap(perm[i], perm[i + rng_.below(n - i)]);
        picks.push_back(perm[i]);
      }
    }
    return picks;
  }

  template <typename F>
  void run_parallel(std::size_t n, F& work) {
    const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(cfg_.threads), n);
    if (threads <= 1) {
      work(0, n);
      return;
    }
    std::vector<std::future<void>> jobs;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (std::size_t begin = 0; begin < n; begin += chunk) {
      jobs.push_back(std::async(std::launch::async, [&, begin] { work(begin, std::min(n, begin + chunk)); }));
    }
    for (auto& j : jobs) j.get();
  }

  PolicyStore store_;
  Rng rng_;
  long global_step_ = 0;
  std::size_t next_stage_ = 0;
  TrainConfig cfg_;
  std::vector<TaskInstance> tasks_;
  std::vector<Demonstration> labeled_;
  const Scorer& scorer_;
  ToyPolicy snapshot_;
};

struct ScheduleResult {
  ToyPolicy policy;
  std::vector<StepReport> reports;
};

/// Runs every stage of cfg.schedule in order from a fresh rng seeded by cfg.seed.
inline ScheduleResult run_schedule(ToyPolicy policy, const Dataset& dataset, const TrainConfig& cfg,
                                   const Scorer& scorer) {
  if (cfg.schedule.empty()) throw Error(ErrorCode::invalid_config, "schedule is empty");
  Trainer trainer(TrainerState{std::move(policy), Rng(cfg.seed), 0, 0}, cfg, dataset.train, scorer);
  auto reports = trainer.run();
  return {trainer.policy(), std::move(reports)};
}

}  // namespace commrl
