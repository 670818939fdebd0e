#include <random>

#include <gtest/gtest.h>

#include "specrag/metrics.hpp"

using namespace specrag;
using namespace specrag::metrics;

namespace {

struct Expected {
    const char* candidate;
    const char* reference;
    double bleu;
    double r1_p, r1_r, r1_f;
    double r2_p, r2_r, r2_f;
    double rl_p, rl_r, rl_f;
};

// Values from tests/oracles/metrics_oracle.py.
const Expected kFixtures[] = {
    {"the cat sat on the mat", "the cat is on the mat", 0.0025406637405613521, 0.83333333333333337,
     0.83333333333333337, 0.83333333333333337, 0.59999999999999998, 0.59999999999999998, 0.59999999999999998,
     0.83333333333333337, 0.83333333333333337, 0.83333333333333337},
    {"a b", "a c", 2.2360679763817585e-05, 0.5, 0.5, 0.5, 0, 0, 0, 0.5, 0.5, 0.5},
    {"a x b y c", "a b c", 7.0710678099504031e-08, 0.6, 1, 0.75, 0, 0, 0, 0.6, 1, 0.75},
    {"the quick brown fox jumps over the lazy dog today", "the quick red fox jumped over the lazy dog again today",
     0.30374414220764573, 0.8, 0.72727272727272729, 0.76190476190476197, 0.44444444444444442, 0.4,
     0.4210526315789474, 0.8, 0.72727272727272729, 0.76190476190476197},
    {"police killed the gunman", "the gunman was shot dead by police", 8.8819155932113607e-06, 0.75,
     0.42857142857142855, 0.54545454545454541, 0.33333333333333331, 0.16666666666666666, 0.22222222222222221, 0.5,
     0.2857142857142857, 0.36363636363636365},
    {"It is a guide to action which ensures that the military always obeys the commands of the party",
     "It is a guide to action that ensures that the military will forever heed Party commands", 0.4208598069524091,
     0.66666666666666663, 0.75, 0.70588235294117652, 0.47058823529411764, 0.53333333333333333, 0.5,
     0.61111111111111116, 0.6875, 0.6470588235294118},
    {"the", "the cat", 0.36787944117144233, 1, 0.5, 0.66666666666666663, 0, 0, 0, 1, 0.5, 0.66666666666666663},
    {"the the the the the the the", "the cat is on the mat", 3.9281465083995445e-08, 0.2857142857142857,
     0.33333333333333331, 0.30769230769230765, 0, 0, 0, 0.2857142857142857, 0.33333333333333331,
     0.30769230769230765},
};

constexpr double kTol = 1e-9;

std::string random_text(std::mt19937_64& rng) {
    static const char alphabet[] = "abcdefghijklmnopqrstuvwxyz0123456789 ,.;-";
    std::uniform_int_distribution<std::size_t> len(1, 120), ch(0, sizeof(alphabet) - 2);
    std::string s;
    do {
        s.clear();
        for (std::size_t n = len(rng); n > 0; --n) s += alphabet[ch(rng)];
    } while (tokens(s).empty());
    return s;
}

}  // namespace

TEST(Bleu, WorkedExampleByHand) {
    // p1 = 5/6, p2 = 3/5, p3 = 1/4, p4 = eps/(3+eps); BP = 1.
    double eps = 1e-9;
    double expected = std::pow(5.0 / 6.0 * 3.0 / 5.0 * 1.0 / 4.0 * (eps / (3.0 + eps)), 0.25);
    EXPECT_NEAR(bleu("the cat sat on the mat", "the cat is on the mat"), expected, kTol);
    auto d = bleu_detail("the cat sat on the mat", "the cat is on the mat");
    ASSERT_EQ(d.precisions.size(), 4u);
    EXPECT_DOUBLE_EQ(d.precisions[0], 5.0 / 6.0);
    EXPECT_DOUBLE_EQ(d.brevity_penalty, 1.0);
}

TEST(Metrics, OracleFixtures) {
    for (const auto& e : kFixtures) {
        SCOPED_TRACE(e.candidate);
        EXPECT_NEAR(bleu(e.candidate, e.reference), e.bleu, kTol);
        auto r1 = rouge_n(e.candidate, e.reference, 1);
        EXPECT_NEAR(r1.precision, e.r1_p, kTol);
        EXPECT_NEAR(r1.recall, e.r1_r, kTol);
        EXPECT_NEAR(r1.f1, e.r1_f, kTol);
        auto r2 = rouge_n(e.candidate, e.reference, 2);
        EXPECT_NEAR(r2.precision, e.r2_p, kTol);
        EXPECT_NEAR(r2.recall, e.r2_r, kTol);
        EXPECT_NEAR(r2.f1, e.r2_f, kTol);
        auto rl = rouge_l(e.candidate, e.reference);
        EXPECT_NEAR(rl.precision, e.rl_p, kTol);
        EXPECT_NEAR(rl.recall, e.rl_r, kTol);
        EXPECT_NEAR(rl.f1, e.rl_f, kTol);
    }
}

TEST(Rouge, TenTokenBigramIntersection) {
    // Candidate bigrams: the-quick quick-brown brown-fox fox-jumps jumps-over over-the the-lazy lazy-dog dog-today.
    // Shared with the reference: the-quick over-the the-lazy lazy-dog -> 4 of 9 and 4 of 10.
    auto r = rouge_n("the quick brown fox jumps over the lazy dog today",
                     "the quick red fox jumped over the lazy dog again today", 2);
    EXPECT_NEAR(r.precision, 4.0 / 9.0, kTol);
    EXPECT_NEAR(r.recall, 4.0 / 10.0, kTol);
}

TEST(Rouge, SimplePairs) {
    auto r = rouge_n("a b", "a c", 1);
    EXPECT_DOUBLE_EQ(r.precision, 0.5);
    EXPECT_DOUBLE_EQ(r.recall, 0.5);
    EXPECT_DOUBLE_EQ(r.f1, 0.5);
    auto l = rouge_l("a x b y c", "a b c");
    EXPECT_EQ(lcs_length(tokens("a x b y c"), tokens("a b c")), 3u);
    EXPECT_DOUBLE_EQ(l.recall, 1.0);
    EXPECT_DOUBLE_EQ(l.precision, 0.6);
    EXPECT_DOUBLE_EQ(l.f1, 0.75);
}

TEST(Metrics, IdentityIsExactlyOne) {
    for (const char* s : {"a", "the cat sat on the mat", "x y"}) {
        EXPECT_EQ(bleu(s, s), 1.0);
        EXPECT_EQ(rouge_n(s, s, 1).f1, 1.0);
        EXPECT_EQ(rouge_l(s, s).f1, 1.0);
    }
    EXPECT_EQ(rouge_n("x y", "x y", 2).f1, 1.0);
}

TEST(Metrics, DisjointScoresNearZero) {
    const char* c = "alpha beta gamma delta epsilon";
    const char* r = "one two three four five six";
    EXPECT_LE(bleu(c, r), 1e-6);
    EXPECT_EQ(rouge_n(c, r, 1).f1, 0.0);
    EXPECT_EQ(rouge_n(c, r, 2).f1, 0.0);
    EXPECT_EQ(rouge_l(c, r).f1, 0.0);
    EXPECT_LE(bleu("zz", "yy yy yy yy"), 1e-6);
}

TEST(Metrics, IdentityPropertyOverRandomStrings) {
    std::mt19937_64 rng(2024);
    for (int i = 0; i < 1000; ++i) {
        auto s = random_text(rng);
        ASSERT_EQ(bleu(s, s), 1.0) << s;
        ASSERT_EQ(rouge_n(s, s, 1).f1, 1.0) << s;
        if (tokens(s).size() >= 2) ASSERT_EQ(rouge_n(s, s, 2).f1, 1.0) << s;
        ASSERT_EQ(rouge_l(s, s).f1, 1.0) << s;
    }
}

TEST(Metrics, SwapKeepsF1ForRougeAndBertscore) {
    std::mt19937_64 rng(7);
    auto te = local_token_embedder(384);
    for (int i = 0; i < 100; ++i) {
        auto a = random_text(rng), b = random_text(rng);
        auto ab = rouge_n(a, b, 1), ba = rouge_n(b, a, 1);
        EXPECT_NEAR(ab.f1, ba.f1, 1e-12);
        EXPECT_NEAR(ab.precision, ba.recall, 1e-12);
        EXPECT_NEAR(rouge_l(a, b).f1, rouge_l(b, a).f1, 1e-12);
        EXPECT_NEAR(bertscore_f1(a, b, te), bertscore_f1(b, a, te), 1e-12);
    }
}

TEST(Metrics, AppendingReferenceNeverLowersRouge1Recall) {
    std::mt19937_64 rng(8);
    for (int i = 0; i < 200; ++i) {
        auto c = random_text(rng), r = random_text(rng);
        EXPECT_GE(rouge_n(c + " " + r, r, 1).recall, rouge_n(c, r, 1).recall);
    }
}

TEST(Metrics, EmptyInputsWarn) {
    EXPECT_TRUE(bleu_detail("", "a").warning);
    EXPECT_EQ(bleu("", "a"), 0.0);
    EXPECT_TRUE(rouge_n("a", "", 1).warning);
    auto short_ref = rouge_n("a b", "a", 2);
    EXPECT_TRUE(short_ref.warning);
    EXPECT_EQ(short_ref.f1, 0.0);
}

TEST(Bleu, CorpusLevelOfIdenticalPairsIsOne) {
    EXPECT_EQ(corpus_bleu({{"a b c d", "a b c d"}, {"x y", "x y"}}), 1.0);
}

TEST(BertScore, IdentityIsOne) {
    EXPECT_DOUBLE_EQ(bertscore_f1("the cat sat", "the cat sat", local_token_embedder()), 1.0);
}

TEST(BertScore, GreedyHandTrace) {
    // "a" and "b" fall in different buckets at dim 384 (268 and 37), so their
    // one-hot vectors are orthogonal: R = 1, P = (1 + 0) / 2.
    auto s = bertscore("a b", "a", local_token_embedder(384));
    EXPECT_DOUBLE_EQ(s.recall, 1.0);
    EXPECT_DOUBLE_EQ(s.precision, 0.5);
    EXPECT_NEAR(s.f1, 2.0 / 3.0, 1e-12);
}

TEST(BertScore, DisjointCollisionFreeFixture) {
    const char* c = "alpha beta gamma";
    const char* r = "one two three";
    std::set<std::uint64_t> buckets;
    for (const auto& t : tokens(std::string(c) + " " + r)) buckets.insert(text::fnv1a64(t) % 384);
    ASSERT_EQ(buckets.size(), 6u) << "fixture tokens collide";
    EXPECT_LE(bertscore_f1(c, r, local_token_embedder(384)), 0.2);
}

TEST(ResponseCosine, IdentityDisjointAndRange) {
    EmbedderConfig cfg;
    EXPECT_NEAR(response_cosine("beam level mobility", "beam level mobility", cfg), 1.0, 1e-6);
    const char* c = "alpha beta gamma";
    const char* r = "one two three";
    EXPECT_EQ(response_cosine(c, r, cfg), 0.0);
    std::mt19937_64 rng(3);
    for (int i = 0; i < 100; ++i) {
        double v = response_cosine(random_text(rng), random_text(rng), cfg);
        EXPECT_GE(v, -1.0);
        EXPECT_LE(v, 1.0);
    }
    EXPECT_THROW(response_cosine("...", "a", cfg), InvalidArgument);
}
