#pragma once

// Judgment scores for the reward stage. Both the consistency score S(o1|o_ref)
// and the coherence score I(o1|o2) go through one Scorer interface; the local
// implementation is a hashed bag-of-tokens cosine.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "commrl/error.hpp"

namespace commrl {

enum class ScorerKind { consistency, coherence };

constexpr std::string_view to_string(ScorerKind kind) {
  return kind == ScorerKind::consistency ? "consistency" : "coherence";
}

struct ScorerTask {
  ScorerKind kind;
  std::string_view instruction;

  static constexpr ScorerTask consistency() {
    return {ScorerKind::consistency,
            "Judge whether the given query is semantically consistent with the provided content"};
  }
  static constexpr ScorerTask coherence() {
    return {ScorerKind::coherence, "Given a query, retrieve semantically coherent content"};
  }
};

/// Score in [0, 1]; construction clamps.
class SimilarityScore {
 public:
  constexpr SimilarityScore() = default;
  explicit SimilarityScore(double v) : value_(std::isnan(v) ? 0.0 : std::clamp(v, 0.0, 1.0)) {}
  constexpr double value() const { return value_; }

 private:
  double value_ = 0.0;
};

class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual SimilarityScore score(const ScorerTask& task, std::string_view query,
                                std::string_view content) const = 0;
};

// 64-bit FNV-1a. Offset basis 14695981039346656037, prime 1099511628211.
constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = kFnvOffset;
  for (unsigned char c : s) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

namespace detail {
// ASCII-only classes, independent of the C locale.
constexpr bool ascii_space(unsigned char c) { return c == ' ' || (c >= '\t' && c <= '\r'); }
constexpr bool ascii_punct(unsigned char c) {
  return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) || (c >= 123 && c <= 126);
}
constexpr char ascii_lower(unsigned char c) {
  return static_cast<char>(c >= 'A' && c <= 'Z' ? c + ('a' - 'A') : c);
}
}  // namespace detail

/// Lowercase, drop ASCII punctuation, split on whitespace.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (detail::ascii_space(c)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else if (!detail::ascii_punct(c)) {
      current.push_back(detail::ascii_lower(c));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

/// Sparse count vector; entries sorted by bucket, counts strictly positive.
struct SparseVector {
  std::size_t dim = 0;
  std::vector<std::pair<std::uint32_t, double>> entries;

  bool empty() const { return entries.empty(); }
  friend bool operator==(const SparseVector&, const SparseVector&) = default;
};

inline constexpr std::size_t kDefaultEmbedDim = 4096;

inline SparseVector local_scorer_embed(std::string_view text, std::size_t dim = kDefaultEmbedDim) {
  if (dim == 0) throw Error(ErrorCode::invalid_config, "embedding dimension must be positive");
  std::vector<std::uint32_t> buckets;
  for (const auto& tok : tokenize(text)) {
    buckets.push_back(static_cast<std::uint32_t>(fnv1a(tok) % dim));
  }
  std::sort(buckets.begin(), buckets.end());
  SparseVector v{dim, {}};
  for (auto b : buckets) {
    if (!v.entries.empty() && v.entries.back().first == b) {
      v.entries.back().second += 1.0;
    } else {
      v.entries.emplace_back(b, 1.0);
    }
  }
  return v;
}

/// Cosine of two nonnegative sparse vectors; zero when either is empty.
/// Norms multiply before the square root so integer self-similarity is exactly 1.
inline double cosine(const SparseVector& a, const SparseVector& b) {
  if (a.empty() || b.empty()) return 0.0;
  double dot = 0.0;
  auto ia = a.entries.begin();
  auto ib = b.entries.begin();
  while (ia != a.entries.end() && ib != b.entries.end()) {
    if (ia->first < ib->first) {
      ++ia;
    } else if (ib->first < ia->first) {
      ++ib;
    } else {
      dot += ia->second * ib->second;
      ++ia;
      ++ib;
    }
  }
  double na = 0.0;
  double nb = 0.0;
  for (const auto& [_, c] : a.entries) na += c * c;
  for (const auto& [_, c] : b.entries) nb += c * c;
  return std::clamp(dot / std::sqrt(na * nb), 0.0, 1.0);
}

class LocalScorer final : public Scorer {
 public:
  explicit LocalScorer(std::size_t dim = kDefaultEmbedDim) : dim_(dim) {}

  SimilarityScore score(const ScorerTask& /*task*/, std::string_view query,
                        std::string_view content) const override {
    return SimilarityScore(cosine(local_scorer_embed(query, dim_), local_scorer_embed(content, dim_)));
  }

  std::size_t dim() const { return dim_; }

 private:
  std::size_t dim_;
};

}  // namespace commrl
