#pragma once

// Token vocabularies and the sentence templates that render them. The same
// templates drive policy rendering and the simulated audio-only reference, so
// lexical overlap between the two tracks agreement on what is heard.

#include <algorithm>
#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "commrl/error.hpp"

namespace commrl {

inline constexpr std::string_view kAbsentToken = "absent";
inline constexpr std::string_view kNullToken = "<null>";
inline constexpr std::string_view kYes = "yes";
inline constexpr std::string_view kNo = "no";

inline const std::vector<std::string>& default_objects() {
  static const std::vector<std::string> objects{"drum", "piano", "guitar", "violin", "cello", "flute"};
  return objects;
}

/// Words that only ever occur in visual sentences.
inline constexpr std::array<std::string_view, 4> kVisualOnlyWords{"see", "visible", "screen", "on"};

// audio: [absent, objects...]; visual: [objects...]; answer: [yes, no, objects..., <null>]
struct Vocabulary {
  std::vector<std::string> audio;
  std::vector<std::string> visual;
  std::vector<std::string> answer;

  static Vocabulary from_objects(const std::vector<std::string>& objects) {
    if (objects.size() < 2) throw Error(ErrorCode::invalid_spec, "need at least two objects");
    Vocabulary v;
    v.audio.emplace_back(kAbsentToken);
    v.answer = {std::string(kYes), std::string(kNo)};
    for (const auto& o : objects) {
      if (o.empty() || o == kYes || o == kNo || o == kAbsentToken || o == kNullToken ||
          o.find_first_of(" \t\n<>") != std::string::npos) {
        throw Error(ErrorCode::invalid_spec, "bad object token '" + o + "'");
      }
      v.audio.push_back(o);
      v.visual.push_back(o);
      v.answer.push_back(o);
    }
    v.answer.emplace_back(kNullToken);
    return v;
  }

  std::size_t null_answer() const { return answer.size() - 1; }

  friend bool operator==(const Vocabulary&, const Vocabulary&) = default;
};

inline std::size_t index_of(const std::vector<std::string>& list, std::string_view token) {
  const auto it = std::find(list.begin(), list.end(), token);
  if (it == list.end()) throw Error(ErrorCode::index_out_of_range, "unknown token '" + std::string(token) + "'");
  return static_cast<std::size_t>(it - list.begin());
}

inline std::string audio_sentence(std::string_view token) {
  if (token == kAbsentToken) return "I listen carefully but hear no sound in the recording";
  return "I hear a " + std::string(token) + " sound in the recording";
}

inline std::string visual_sentence(std::string_view object) {
  return "I see the " + std::string(object) + " on screen";
}

/// Reference reasoning when the queried object is silent.
inline std::string reference_muted(std::string_view queried) {
  return "I listen carefully and hear no " + std::string(queried) + " sound in the recording";
}

/// Reference reasoning when `sounding` is heard.
inline std::string reference_sounding(std::string_view sounding) {
  return "I listen carefully and hear a " + std::string(sounding) + " sound in the recording";
}

}  // namespace commrl
