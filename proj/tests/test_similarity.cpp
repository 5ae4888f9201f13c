#include <gtest/gtest.h>

#include <set>

#include "commrl/rng.hpp"
#include "commrl/similarity.hpp"
#include "test_support.hpp"

namespace commrl {
namespace {

const LocalScorer kScorer;

TEST(ScorerTask, InstructionsAreFixedPerKind) {
  EXPECT_EQ(ScorerTask::consistency().instruction,
            "Judge whether the given query is semantically consistent with the provided content");
  EXPECT_EQ(ScorerTask::coherence().instruction, "Given a query, retrieve semantically coherent content");
}

TEST(Fnv1a, KnownVectors) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a("foobar"), 0x85944171f73967e8ULL);
}

TEST(Tokenize, LowercasesAndStripsPunctuation) {
  EXPECT_EQ(tokenize("Drum, drum!"), (std::vector<std::string>{"drum", "drum"}));
  EXPECT_EQ(tokenize("  I hear\ta PIANO.\n"), (std::vector<std::string>{"i", "hear", "a", "piano"}));
  EXPECT_TRUE(tokenize("?!,.").empty());
}

TEST(LocalEmbed, Examples) {
  EXPECT_TRUE(local_scorer_embed("").empty());
  const auto v = local_scorer_embed("Drum, drum!");
  ASSERT_EQ(v.entries.size(), 1u);
  EXPECT_EQ(v.entries[0].second, 2.0);
  EXPECT_EQ(v.entries[0].first, fnv1a("drum") % kDefaultEmbedDim);
  EXPECT_EQ(local_scorer_embed("x", 17).dim, 17u);
  EXPECT_THROW(local_scorer_embed("x", 0), Error);
}

TEST(LocalScorer, SelfSimilarityIsExactlyOne) {
  for (const char* text : {"drum", "a drum beat is heard", "Drum, drum!", "x y z x y z x"}) {
    EXPECT_EQ(kScorer.score(ScorerTask::consistency(), text, text).value(), 1.0) << text;
    EXPECT_EQ(kScorer.score(ScorerTask::coherence(), text, text).value(), 1.0) << text;
  }
}

TEST(LocalScorer, DisjointBagsScoreZero) {
  EXPECT_EQ(kScorer.score(ScorerTask::consistency(), "piano keys", "violin bow").value(), 0.0);
  EXPECT_EQ(kScorer.score(ScorerTask::consistency(), "", "violin bow").value(), 0.0);
  EXPECT_EQ(kScorer.score(ScorerTask::consistency(), "", "").value(), 0.0);
}

TEST(LocalScorer, ScalingInvariance) {
  const auto a = local_scorer_embed("a drum beat");
  const auto aa = local_scorer_embed("a drum beat a drum beat");
  EXPECT_NEAR(cosine(a, aa), 1.0, 1e-15);
}

TEST(LocalScorer, MatchesHandComputedCosine) {
  const std::string q = "loud drum beat heard";
  const std::string c = "a drum beat is heard";
  // {loud, drum, beat, heard} . {a, drum, beat, is, heard} = 3; norms sqrt(4), sqrt(5)
  const double hand = 3.0 / std::sqrt(20.0);
  EXPECT_NEAR(testing::bag_cosine(tokenize(q), tokenize(c)), hand, 1e-15);
  // The seven distinct tokens land in distinct buckets, so hashing changes nothing.
  std::set<std::uint64_t> buckets;
  for (const char* t : {"loud", "drum", "beat", "heard", "a", "is"}) buckets.insert(fnv1a(t) % kDefaultEmbedDim);
  ASSERT_EQ(buckets.size(), 6u);
  EXPECT_NEAR(kScorer.score(ScorerTask::consistency(), q, c).value(), hand, 1e-9);
}

TEST(LocalScorer, DeterministicBitForBit) {
  const LocalScorer other;
  const double a = kScorer.score(ScorerTask::coherence(), "I hear a cello sound", "I see the cello on screen").value();
  const double b = other.score(ScorerTask::coherence(), "I hear a cello sound", "I see the cello on screen").value();
  EXPECT_EQ(a, b);
}

std::string random_text(Rng& rng, std::size_t max_tokens) {
  static const std::vector<std::string> words{"drum", "piano", "sound", "hear", "see", "the", "a", "no", "loud", "quiet"};
  std::string s;
  const std::size_t n = rng.below(max_tokens + 1);
  for (std::size_t i = 0; i < n; ++i) s += words[rng.below(words.size())] + " ";
  return s;
}

TEST(LocalScorer, RangeAndOracleAgreementOnRandomTexts) {
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    const auto q = random_text(rng, 8);
    const auto c = random_text(rng, 8);
    const double s = kScorer.score(ScorerTask::consistency(), q, c).value();
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
    EXPECT_NEAR(s, testing::bag_cosine(tokenize(q), tokenize(c)), 1e-12) << q << " | " << c;
  }
}

TEST(LocalScorer, AddingAQueryTokenNeverDecreasesDotProduct) {
  Rng rng(11);
  auto dot = [](const SparseVector& a, const SparseVector& b) {
    double d = 0.0;
    for (const auto& [ba, ca] : a.entries) {
      for (const auto& [bb, cb] : b.entries) d += ba == bb ? ca * cb : 0.0;
    }
    return d;
  };
  for (int i = 0; i < 300; ++i) {
    const auto q = random_text(rng, 6) + "drum";
    const auto c = random_text(rng, 6);
    const auto qv = local_scorer_embed(q);
    const auto before = dot(qv, local_scorer_embed(c));
    const auto toks = tokenize(q);
    const auto after = dot(qv, local_scorer_embed(c + " " + toks[rng.below(toks.size())]));
    EXPECT_GE(after, before);
  }
}

TEST(SimilarityScore, ClampsIntoUnitInterval) {
  EXPECT_EQ(SimilarityScore(1.7).value(), 1.0);
  EXPECT_EQ(SimilarityScore(-0.2).value(), 0.0);
  EXPECT_EQ(SimilarityScore(0.83).value(), 0.83);
}

}  // namespace
}  // namespace commrl
