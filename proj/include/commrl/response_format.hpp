#pragma once

// Three-block response grammar:
//   <a-think>audio reasoning</a-think><v-think>visual reasoning</v-think><answer>answer</answer>
// Only whitespace may surround or separate the blocks. An empty answer
// payload denotes the null answer.

#include <algorithm>
#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace commrl {

struct StructuredResponse {
  std::string a_think;
  std::string v_think;
  std::optional<std::string> answer;

  friend bool operator==(const StructuredResponse&, const StructuredResponse&) = default;
};

enum class FormatViolation { missing_tag, wrong_order, duplicate_tag, trailing_content };

constexpr std::string_view to_string(FormatViolation v) {
  switch (v) {
    case FormatViolation::missing_tag: return "missing-tag";
    case FormatViolation::wrong_order: return "wrong-order";
    case FormatViolation::duplicate_tag: return "duplicate-tag";
    case FormatViolation::trailing_content: return "trailing-content";
  }
  return "unknown";
}

struct ParseOutcome {
  std::optional<StructuredResponse> response;
  bool format_ok = false;
  std::vector<FormatViolation> diagnostics;
};

namespace detail {

struct TagNames {
  std::string_view open;
  std::string_view close;
};

inline constexpr std::array<TagNames, 3> kTags{{
    {"<a-think>", "</a-think>"},
    {"<v-think>", "</v-think>"},
    {"<answer>", "</answer>"},
}};

constexpr bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline bool all_space(std::string_view s) {
  return std::all_of(s.begin(), s.end(), is_space);
}

inline std::vector<std::size_t> find_all(std::string_view text, std::string_view needle) {
  std::vector<std::size_t> hits;
  for (auto pos = text.find(needle); pos != std::string_view::npos;
       pos = text.find(needle, pos + needle.size())) {
    hits.push_back(pos);
  }
  return hits;
}

}  // namespace detail

/// True when `text` contains any of the six tag markers.
inline bool contains_tag_marker(std::string_view text) {
  for (const auto& tag : detail::kTags) {
    if (text.find(tag.open) != std::string_view::npos ||
        text.find(tag.close) != std::string_view::npos) {
      return true;
    }
  }
  return false;
}

/// A response survives serialize/parse unchanged iff this holds: payloads are
/// tag-free, carry no edge whitespace, and a present answer is nonempty.
inline bool is_canonical(const StructuredResponse& r) {
  auto ok = [](std::string_view s) {
    return !contains_tag_marker(s) && detail::trim(s).size() == s.size();
  };
  if (!ok(r.a_think) || !ok(r.v_think)) return false;
  if (r.answer && (r.answer->empty() || !ok(*r.answer))) return false;
  return true;
}

/// Total parser: never throws on any input; malformed text yields format_ok=false.
inline ParseOutcome parse_response(std::string_view raw) {
  using detail::kTags;
  ParseOutcome out;

  std::array<std::size_t, 3> open_at{};
  std::array<std::size_t, 3> close_at{};
  bool missing = false;
  bool duplicate = false;
  for (std::size_t t = 0; t < kTags.size(); ++t) {
    const auto opens = detail::find_all(raw, kTags[t].open);
    const auto closes = detail::find_all(raw, kTags[t].close);
    if (opens.empty() || closes.empty()) {
      out.diagnostics.push_back(FormatViolation::missing_tag);
      missing = true;
    }
    if (opens.size() > 1 || closes.size() > 1) {
      out.diagnostics.push_back(FormatViolation::duplicate_tag);
      duplicate = true;
    }
    if (!opens.empty() && !closes.empty()) {
      open_at[t] = opens.front();
      close_at[t] = closes.front();
    }
  }
  if (missing || duplicate) return out;

  // Each tag now occurs exactly once. A block opened inside another block is nesting.
  bool nested = false;
  bool inverted = false;
  for (std::size_t t = 0; t < kTags.size(); ++t) {
    if (close_at[t] < open_at[t]) inverted = true;
    for (std::size_t s = 0; s < kTags.size(); ++s) {
      if (s == t) continue;
      if (open_at[s] > open_at[t] && open_at[s] < close_at[t]) nested = true;
    }
  }
  if (nested) {
    out.diagnostics.push_back(FormatViolation::duplicate_tag);
    return out;
  }
  if (inverted || !(close_at[0] < open_at[1] && close_at[1] < open_at[2])) {
    out.diagnostics.push_back(FormatViolation::wrong_order);
    return out;
  }

  const auto gap = [&](std::size_t from, std::size_t to) { return raw.substr(from, to - from); };
  const std::size_t end_of_answer = close_at[2] + kTags[2].close.size();
  if (!detail::all_space(gap(0, open_at[0])) ||
      !detail::all_space(gap(close_at[0] + kTags[0].close.size(), open_at[1])) ||
      !detail::all_space(gap(close_at[1] + kTags[1].close.size(), open_at[2])) ||
      !detail::all_space(raw.substr(end_of_answer))) {
    out.diagnostics.push_back(FormatViolation::trailing_content);
    return out;
  }

  auto payload = [&](std::size_t t) {
    const std::size_t begin = open_at[t] + kTags[t].open.size();
    return std::string(detail::trim(gap(begin, close_at[t])));
  };
  StructuredResponse r{payload(0), payload(1), payload(2)};
  if (r.answer->empty()) r.answer.reset();
  out.response = std::move(r);
  out.format_ok = true;
  return out;
}

inline std::string serialize_response(const StructuredResponse& r) {
  std::string text;
  text.reserve(r.a_think.size() + r.v_think.size() + 64);
  text += "<a-think>";
  text += r.a_think;
  text += "</a-think><v-think>";
  text += r.v_think;
  text += "</v-think><answer>";
  if (r.answer) text += *r.answer;
  text += "</answer>";
  return text;
}

inline double format_reward(const ParseOutcome& outcome) { return outcome.format_ok ? 1.0 : 0.0; }

}  // namespace commrl
