#pragma once

// Synthetic audio-visual confusion tasks.
//
// Every task shows one object. Existence questions ask whether that object is
// sounding; a confused existence task mutes it, so the answer is "no" even
// though the object is on screen. Choice questions ask which object is
// sounding; a confused choice task swaps in the sound of a different object.
// Ground truth depends only on the question and the audio.
//
// Features: [visual one-hot | audio one-hot (zeros when muted) | kind one-hot]
// plus i.i.d. Gaussian noise of the configured level on every entry.

#include <algorithm>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "commrl/error.hpp"
#include "commrl/policy.hpp"
#include "commrl/response_format.hpp"
#include "commrl/reward.hpp"
#include "commrl/rng.hpp"
#include "commrl/vocab.hpp"

namespace commrl {

enum class QuestionKind { existence, choice };
enum class Split { warmup, train, eval };

constexpr std::string_view to_string(QuestionKind k) { return k == QuestionKind::existence ? "existence" : "choice"; }
constexpr std::string_view to_string(Split s) {
  return s == Split::warmup ? "warmup" : s == Split::train ? "train" : "eval";
}

inline Split split_from_string(std::string_view s) {
  if (s == "warmup") return Split::warmup;
  if (s == "train") return Split::train;
  if (s == "eval") return Split::eval;
  throw Error(ErrorCode::invalid_config, "unknown split '" + std::string(s) + "'");
}

struct EnvSpec {
  std::size_t warmup_size = 200;
  std::size_t train_size = 256;
  std::size_t eval_size = 400;
  double confusion_rate = 0.5;
  double existence_fraction = 0.5;
  double noise = 0.1;
  double visual_bias = 0.8;  // fraction of warm-up demonstrations answered from vision
  std::vector<std::string> objects = default_objects();
  std::uint64_t seed = 7;

  std::size_t feature_dim() const { return 2 * objects.size() + 2; }

  void validate() const {
    auto unit = [](double x) { return x >= 0.0 && x <= 1.0; };
    if (!unit(confusion_rate)) throw Error(ErrorCode::invalid_spec, "confusion_rate must lie in [0,1]");
    if (!unit(existence_fraction)) throw Error(ErrorCode::invalid_spec, "existence_fraction must lie in [0,1]");
    if (!unit(visual_bias)) throw Error(ErrorCode::invalid_spec, "visual_bias must lie in [0,1]");
    if (!(noise >= 0.0)) throw Error(ErrorCode::invalid_spec, "noise must be nonnegative");
    if (std::set<std::string>(objects.begin(), objects.end()).size() != objects.size()) {
      throw Error(ErrorCode::invalid_spec, "objects must be distinct");
    }
    Vocabulary::from_objects(objects);
  }

  friend bool operator==(const EnvSpec&, const EnvSpec&) = default;
};

inline void to_json(nlohmann::json& j, const EnvSpec& s) {
  j = {{"warmup_size", s.warmup_size}, {"train_size", s.train_size}, {"eval_size", s.eval_size},
       {"confusion_rate", s.confusion_rate}, {"existence_fraction", s.existence_fraction},
       {"noise", s.noise}, {"visual_bias", s.visual_bias}, {"objects", s.objects}, {"seed", s.seed}};
}

inline void from_json(const nlohmann::json& j, EnvSpec& s) {
  s.warmup_size = j.value("warmup_size", s.warmup_size);
  s.train_size = j.value("train_size", s.train_size);
  s.eval_size = j.value("eval_size", s.eval_size);
  s.confusion_rate = j.value("confusion_rate", s.confusion_rate);
  s.existence_fraction = j.value("existence_fraction", s.existence_fraction);
  s.noise = j.value("noise", s.noise);
  s.visual_bias = j.value("visual_bias", s.visual_bias);
  s.objects = j.value("objects", s.objects);
  s.seed = j.value("seed", s.seed);
}

struct TaskInstance {
  std::string id;
  std::string question;
  QuestionKind question_kind = QuestionKind::existence;
  std::string visual_evidence;
  std::optional<std::string> audio_evidence;  // absent = muted
  bool confused = false;
  std::string ground_truth;
  std::vector<double> features;
  std::string reference_reasoning;

  friend bool operator==(const TaskInstance&, const TaskInstance&) = default;
};

/// Audio-only reference reasoning; never mentions what is seen.
inline std::string simulate_reference(const TaskInstance& t) {
  if (!t.audio_evidence) return reference_muted(t.visual_evidence);
  return reference_sounding(*t.audio_evidence);
}

struct Dataset {
  EnvSpec spec;
  std::vector<TaskInstance> warmup;
  std::vector<TaskInstance> train;
  std::vector<TaskInstance> eval;

  const std::vector<TaskInstance>& split(Split s) const {
    return s == Split::warmup ? warmup : s == Split::train ? train : eval;
  }
  std::vector<TaskInstance>& split(Split s) { return s == Split::warmup ? warmup : s == Split::train ? train : eval; }
  Vocabulary vocab() const { return Vocabulary::from_objects(spec.objects); }
};

namespace detail {

inline TaskInstance make_instance(const EnvSpec& spec, std::size_t serial, Rng& rng) {
  const std::size_t k = spec.objects.size();
  TaskInstance t;
  t.id = "task-" + std::to_string(serial);
  t.question_kind = rng.uniform() < spec.existence_fraction ? QuestionKind::existence : QuestionKind::choice;
  const std::size_t seen = rng.below(k);
  t.visual_evidence = spec.objects[seen];
  t.confused = rng.uniform() < spec.confusion_rate;

  std::optional<std::size_t> heard = seen;
  if (t.question_kind == QuestionKind::existence) {
    if (t.confused) heard.reset();
    t.question = "Is there a " + t.visual_evidence + " sound?";
    t.ground_truth = heard == seen ? std::string(kYes) : std::string(kNo);
  } else {
    if (t.confused) {
      const std::size_t other = rng.below(k - 1);
      heard = other >= seen ? other + 1 : other;
    }
    t.question = "Which instrument is making the sound?";
    t.ground_truth = spec.objects[*heard];
  }
  if (heard) t.audio_evidence = spec.objects[*heard];

  t.features.assign(spec.feature_dim(), 0.0);
  t.features[seen] = 1.0;
  if (heard) t.features[k + *heard] = 1.0;
  t.features[2 * k + (t.question_kind == QuestionKind::existence ? 0 : 1)] = 1.0;
  for (auto& f : t.features) f += spec.noise * rng.normal();

  t.reference_reasoning = simulate_reference(t);
  return t;
}

}  // namespace detail

/// Deterministic under spec.seed. Splits are generated warmup, train, eval in
/// that order from one stream with globally unique ids.
inline Dataset generate_dataset(const EnvSpec& spec) {
  spec.validate();
  Dataset d;
  d.spec = spec;
  Rng rng(spec.seed);
  std::size_t serial = 0;
  for (Split s : {Split::warmup, Split::train, Split::eval}) {
    const std::size_t n = s == Split::warmup ? spec.warmup_size : s == Split::train ? spec.train_size : spec.eval_size;
    auto& out = d.split(s);
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(detail::make_instance(spec, serial++, rng));
  }
  return d;
}

/// Gold choice tuple: true audio claim, true visual claim, correct answer.
inline ResponseChoices gold_choices(const Vocabulary& vocab, const TaskInstance& t) {
  ResponseChoices c;
  c.audio = index_of(vocab.audio, t.audio_evidence ? *t.audio_evidence : std::string(kAbsentToken));
  c.visual = index_of(vocab.visual, t.visual_evidence);
  c.answer = index_of(vocab.answer, t.ground_truth);
  return c;
}

/// What a visually dominated responder says: hears what it sees, answers from vision.
inline ResponseChoices visual_choices(const Vocabulary& vocab, const TaskInstance& t) {
  ResponseChoices c;
  c.audio = index_of(vocab.audio, t.visual_evidence);
  c.visual = index_of(vocab.visual, t.visual_evidence);
  c.answer = t.question_kind == QuestionKind::existence ? index_of(vocab.answer, kYes)
                                                        : index_of(vocab.answer, t.visual_evidence);
  return c;
}

inline std::vector<Demonstration> gold_demonstrations(const Vocabulary& vocab, std::span<const TaskInstance> tasks) {
  std::vector<Demonstration> demos;
  demos.reserve(tasks.size());
  for (const auto& t : tasks) demos.push_back({t.features, gold_choices(vocab, t)});
  return demos;
}

/// Warm-up demonstrations; each is visually biased with probability spec.visual_bias.
inline std::vector<Demonstration> make_warmup_demonstrations(const Dataset& d) {
  if (d.warmup.empty()) throw Error(ErrorCode::empty_split, "warmup split is empty");
  const auto vocab = d.vocab();
  Rng rng(d.spec.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Demonstration> demos;
  demos.reserve(d.warmup.size());
  for (const auto& t : d.warmup) {
    const bool biased = rng.uniform() < d.spec.visual_bias;
    demos.push_back({t.features, biased ? visual_choices(vocab, t) : gold_choices(vocab, t)});
  }
  return demos;
}

struct EvalReport {
  std::size_t n = 0;
  double accuracy = 0.0;
  std::size_t n_existence = 0;
  std::optional<double> yes_rate;
  std::size_t n_confused = 0;
  std::optional<double> confused_accuracy;
  std::optional<double> clean_accuracy;
  double mean_answer_entropy = 0.0;  // only filled by the policy overload
};

inline void to_json(nlohmann::json& j, const EvalReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  j = {{"accuracy", r.accuracy}, {"yes_rate", opt(r.yes_rate)}, {"n", r.n},
       {"n_existence", r.n_existence}, {"n_confused", r.n_confused},
       {"confused_accuracy", opt(r.confused_accuracy)}, {"clean_accuracy", opt(r.clean_accuracy)},
       {"mean_answer_entropy", r.mean_answer_entropy}};
}

using Responder = std::function<std::string(const TaskInstance&)>;

/// Scores raw responses: unparseable text counts as wrong and not "yes".
inline EvalReport evaluate(std::span<const TaskInstance> tasks, const Responder& respond) {
  if (tasks.empty()) throw Error(ErrorCode::empty_split, "cannot evaluate an empty split");
  EvalReport r;
  std::size_t correct = 0, yes = 0, confused_correct = 0, clean_correct = 0;
  for (const auto& t : tasks) {
    const auto parsed = parse_response(respond(t));
    const std::optional<std::string> answer = parsed.format_ok ? parsed.response->answer : std::nullopt;
    const bool ok = judge_answer(answer, t.ground_truth).correct;
    correct += ok;
    if (t.confused) {
      ++r.n_confused;
      confused_correct += ok;
    } else {
      clean_correct += ok;
    }
    if (t.question_kind == QuestionKind::existence) {
      ++r.n_existence;
      yes += answer && judge_answer(answer, kYes).correct;
    }
  }
  r.n = tasks.size();
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.n);
  if (r.n_existence > 0) r.yes_rate = static_cast<double>(yes) / static_cast<double>(r.n_existence);
  if (r.n_confused > 0) r.confused_accuracy = static_cast<double>(confused_correct) / static_cast<double>(r.n_confused);
  if (r.n_confused < r.n) r.clean_accuracy = static_cast<double>(clean_correct) / static_cast<double>(r.n - r.n_confused);
  return r;
}

/// Greedy (argmax) decoding of every head.
inline EvalReport evaluate(const ToyPolicy& policy, std::span<const TaskInstance> tasks) {
  auto r = evaluate(tasks, [&](const TaskInstance& t) { return policy.render(policy.greedy(t.features)); });
  double h = 0.0;
  for (const auto& t : tasks) h += policy.answer_entropy(t.features);
  r.mean_answer_entropy = h / static_cast<double>(tasks.size());
  return r;
}

// ---- JSONL persistence -------------------------------------------------------
// Line 1: {"schema":"commrl.dataset","version":1,"split":...,"count":...,"env":{...}}
// Lines 2..: one TaskInstance object each.

inline constexpr int kDatasetSchemaVersion = 1;

inline nlohmann::json instance_to_json(const TaskInstance& t) {
  return {{"id", t.id},
          {"question", t.question},
          {"question_kind", to_string(t.question_kind)},
          {"visual_evidence", t.visual_evidence},
          {"audio_evidence", t.audio_evidence ? nlohmann::json(*t.audio_evidence) : nlohmann::json(nullptr)},
          {"confused", t.confused},
          {"ground_truth", t.ground_truth},
          {"features", t.features},
          {"reference_reasoning", t.reference_reasoning}};
}

inline TaskInstance instance_from_json(const nlohmann::json& j) {
  TaskInstance t;
  t.id = j.at("id").get<std::string>();
  t.question = j.at("question").get<std::string>();
  const auto kind = j.at("question_kind").get<std::string>();
  if (kind != "existence" && kind != "choice") throw Error(ErrorCode::format_error, "bad question_kind " + kind);
  t.question_kind = kind == "existence" ? QuestionKind::existence : QuestionKind::choice;
  t.visual_evidence = j.at("visual_evidence").get<std::string>();
  if (!j.at("audio_evidence").is_null()) t.audio_evidence = j.at("audio_evidence").get<std::string>();
  t.confused = j.at("confused").get<bool>();
  t.ground_truth = j.at("ground_truth").get<std::string>();
  t.features = j.at("features").get<std::vector<double>>();
  t.reference_reasoning = j.at("reference_reasoning").get<std::string>();
  return t;
}

inline void write_split_jsonl(std::ostream& out, const Dataset& d, Split s) {
  const auto& tasks = d.split(s);
  const nlohmann::json header = {{"schema", "commrl.dataset"}, {"version", kDatasetSchemaVersion},
                                 {"split", to_string(s)}, {"count", tasks.size()}, {"env", d.spec}};
  out << header.dump() << '\n';
  for (const auto& t : tasks) out << instance_to_json(t).dump() << '\n';
}

struct SplitFile {
  Split split = Split::train;
  EnvSpec spec;
  std::vector<TaskInstance> tasks;
};

inline SplitFile read_split_jsonl(std::istream& in) {
  SplitFile f;
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::format_error, "dataset file is empty");
  try {
    const auto header = nlohmann::json::parse(line);
    if (header.at("schema") != "commrl.dataset" || header.at("version") != kDatasetSchemaVersion) {
      throw Error(ErrorCode::format_error, "unsupported dataset schema");
    }
    f.split = split_from_string(header.at("split").get<std::string>());
    f.spec = header.at("env").get<EnvSpec>();
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      f.tasks.push_back(instance_from_json(nlohmann::json::parse(line)));
    }
    if (f.tasks.size() != header.at("count").get<std::size_t>()) {
      throw Error(ErrorCode::format_error, "instance count does not match header");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::format_error, e.what());
  }
  return f;
}

}  // namespace commrl
