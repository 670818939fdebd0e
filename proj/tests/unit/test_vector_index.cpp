#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "specrag/vector_index.hpp"

using namespace specrag;

namespace {

EmbeddingVector vec(std::vector<float> v) { return EmbeddingVector{std::move(v)}; }

VectorIndex random_index(std::uint64_t seed, std::size_t n, std::size_t dim) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> g;
    std::vector<IndexEntry> e;
    for (std::size_t i = 0; i < n; ++i) {
        EmbeddingVector v;
        for (std::size_t d = 0; d < dim; ++d) v.values.push_back(g(rng));
        e.push_back({"c" + std::to_string(i), v});
    }
    return build_index(std::move(e), dim);
}

}  // namespace

TEST(VectorIndex, EmptyIndexSearchFails) {
    auto idx = build_index({}, 4);
    EXPECT_EQ(idx.size(), 0u);
    try {
        search_top_k(idx, vec({1, 0, 0, 0}), {3});
        FAIL();
    } catch (const InvalidArgument& e) {
        EXPECT_EQ(std::string(e.what()), "empty index");
    }
}

TEST(VectorIndex, MixedDimsRejected) {
    std::vector<IndexEntry> e{{"a", EmbeddingVector{std::vector<float>(384, 1.0f)}},
                              {"b", EmbeddingVector{std::vector<float>(8, 1.0f)}}};
    EXPECT_THROW(build_index(e, 384), InvalidArgument);
}

TEST(VectorIndex, DuplicateIdsRejected) {
    EXPECT_THROW(build_index({{"a", vec({1, 0})}, {"a", vec({0, 1})}}, 2), InvalidArgument);
}

TEST(VectorIndex, Orthogonal) {
    auto idx = build_index({{"x", vec({1, 0})}, {"y", vec({0, 1})}}, 2);
    auto r = search_top_k(idx, vec({1, 0}), {2});
    ASSERT_EQ(r.size(), 2u);
    EXPECT_EQ(r[0].chunk_id, "x");
    EXPECT_DOUBLE_EQ(r[0].score, 1.0);
    EXPECT_DOUBLE_EQ(r[1].score, 0.0);
}

TEST(VectorIndex, DiagonalCosine) {
    const float h = static_cast<float>(1.0 / std::sqrt(2.0));
    auto idx = build_index({{"x", vec({1, 0})}, {"d", vec({h, h})}}, 2);
    auto r = search_top_k(idx, vec({h, h}), {2});
    EXPECT_EQ(r[0].chunk_id, "d");
    EXPECT_NEAR(r[0].score, 1.0, 1e-6);
    EXPECT_NEAR(r[1].score, 0.70710678, 1e-6);
}

TEST(VectorIndex, TiesBrokenByChunkId) {
    auto idx = build_index({{"b", vec({1, 0})}, {"a", vec({1, 0})}, {"c", vec({0, 1})}}, 2);
    auto r = search_top_k(idx, vec({1, 0}), {2});
    EXPECT_EQ(r[0].chunk_id, "a");
    EXPECT_EQ(r[1].chunk_id, "b");
}

TEST(VectorIndex, KLargerThanSizeReturnsAll) {
    auto idx = build_index({{"a", vec({1, 0})}}, 2);
    EXPECT_EQ(search_top_k(idx, vec({1, 1}), {5}).size(), 1u);
}

TEST(VectorIndex, InvalidQueries) {
    auto idx = build_index({{"a", vec({1, 0})}}, 2);
    EXPECT_THROW(search_top_k(idx, vec({1, 0, 0}), {1}), InvalidArgument);
    EXPECT_THROW(search_top_k(idx, vec({1, 0}), {0}), InvalidArgument);
}

TEST(VectorIndex, PrefixMonotonicity) {
    auto idx = random_index(5, 300, 16);
    auto q = idx.vector_at(17);
    for (std::size_t k = 1; k < 40; ++k) {
        auto a = search_top_k(idx, q, {k});
        auto b = search_top_k(idx, q, {k + 1});
        ASSERT_EQ(a.size(), k);
        for (std::size_t i = 0; i < k; ++i) EXPECT_EQ(a[i].chunk_id, b[i].chunk_id);
    }
}

TEST(VectorIndex, MatchesBruteForceScan) {
    auto idx = random_index(9, 500, 24);
    std::mt19937_64 rng(10);
    std::normal_distribution<float> g;
    for (int t = 0; t < 50; ++t) {
        EmbeddingVector q;
        for (int d = 0; d < 24; ++d) q.values.push_back(g(rng));
        std::vector<std::pair<double, std::string>> all;
        for (std::size_t i = 0; i < idx.size(); ++i) {
            double dot = 0, na = 0, nb = 0;
            for (int d = 0; d < 24; ++d) {
                dot += double(q.values[d]) * idx.vector_at(i).values[d];
                na += double(q.values[d]) * q.values[d];
                nb += double(idx.vector_at(i).values[d]) * idx.vector_at(i).values[d];
            }
            all.emplace_back(dot / (std::sqrt(na) * std::sqrt(nb)), idx.ids()[i]);
        }
        std::sort(all.begin(), all.end(), [](auto& a, auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
        auto r = search_top_k(idx, q, {10});
        for (int i = 0; i < 10; ++i) EXPECT_EQ(r[i].chunk_id, all[i].second);
    }
}

TEST(VectorIndex, PersistRoundTrip) {
    auto idx = random_index(1, 3, 8);
    auto path = (std::filesystem::temp_directory_path() / "specrag_idx.ssix").string();
    idx.save(path);
    auto back = VectorIndex::load(path);
    EXPECT_EQ(back.ids(), idx.ids());
    EXPECT_EQ(back.serialize(), idx.serialize());
    auto q = idx.vector_at(2);
    auto a = search_top_k(idx, q, {3});
    auto b = search_top_k(back, q, {3});
    for (int i = 0; i < 3; ++i) {
        EXPECT_EQ(a[i].chunk_id, b[i].chunk_id);
        EXPECT_EQ(a[i].score, b[i].score);
    }
}

TEST(VectorIndex, CorruptFileRejected) {
    auto bytes = random_index(1, 3, 8).serialize();
    EXPECT_THROW(VectorIndex::deserialize(bytes.substr(0, bytes.size() - 5)), ParseError);
    auto bad = bytes;
    bad[0] = 'X';
    EXPECT_THROW(VectorIndex::deserialize(bad), ParseError);
}
