#include <gtest/gtest.h>

#include "specrag/prompting.hpp"

using namespace specrag;

namespace {

Chunk ctx(const std::string& id, std::size_t words, const std::string& source) {
    std::string body;
    for (std::size_t i = 0; i < words; ++i) body += (i ? " " : "") + id + std::to_string(i);
    return make_chunk(id, body, "TS", "S", source, ChunkOrigin::document);
}

std::vector<Chunk> three() { return {ctx("a", 10, "TS 1 A"), ctx("b", 10, "TS 2 B"), ctx("c", 10, "TS 3 C")}; }

}  // namespace

TEST(Prompt, DefaultSystemTextIsVerbatim) {
    EXPECT_EQ(default_template().system_text,
              "You are a helpful assistant. Use what you know already to answer the QUESTION. Improve the answer "
              "using the following pieces of CONTEXT. Always return the most relevant SOURCE.");
    EXPECT_FALSE(default_template().approximation);
    EXPECT_TRUE(builtin_templates().at("privategpt").approximation);
}

TEST(Prompt, NoShotsNoHistoryTwoMessages) {
    auto p = assemble("what?", three(), {}, default_template(), {}, 100000);
    ASSERT_EQ(p.messages.size(), 2u);
    EXPECT_EQ(p.messages[0].role, Role::system);
    EXPECT_EQ(p.messages[1].role, Role::user);
    for (const auto* s : {"TS 1 A", "TS 2 B", "TS 3 C"})
        EXPECT_NE(p.messages[1].content.find(std::string("Source: ") + s), std::string::npos);
    EXPECT_TRUE(p.messages[1].content.starts_with("CONTEXT:\n"));
    EXPECT_TRUE(p.messages[1].content.ends_with("\n\nQUESTION: what?"));
}

TEST(Prompt, OneShotFourMessages) {
    FewShotExample shot{"q0", {"c0\nSource: TS 0"}, "ideal"};
    auto p = assemble("q", three(), {}, default_template(), {shot}, 100000);
    ASSERT_EQ(p.messages.size(), 4u);
    EXPECT_EQ(p.messages[1].role, Role::user);
    EXPECT_EQ(p.messages[2].role, Role::assistant);
    EXPECT_EQ(p.messages[2].content, "ideal");
    EXPECT_EQ(p.messages[3].role, Role::user);
}

TEST(Prompt, HistoryBetweenShotsAndQuery) {
    auto p = assemble("q2", three(), {{"q1", "r1"}}, default_template(), {}, 100000);
    ASSERT_EQ(p.messages.size(), 4u);
    EXPECT_EQ(p.messages[1].content, "q1");
    EXPECT_EQ(p.messages[2].content, "r1");
}

TEST(Prompt, BudgetDropsLeastSimilarContextFirst) {
    auto full = assemble("q", three(), {}, default_template(), {}, 100000);
    auto p = assemble("q", three(), {}, default_template(), {}, full.estimated_words - 1);
    ASSERT_EQ(p.contexts.size(), 2u);
    EXPECT_EQ(p.contexts[0].chunk_id, "a");
    EXPECT_EQ(p.contexts[1].chunk_id, "b");
    EXPECT_LE(p.estimated_words, full.estimated_words - 1);
}

TEST(Prompt, DropOrderContextsThenHistoryThenShots) {
    FewShotExample s1{"s1", {"x"}, "y"}, s2{"s2", {"x"}, "y"};
    std::vector<HistoryTurn> hist{{"h1 q", "h1 r"}, {"h2 q", "h2 r"}};
    auto minimal = assemble("q", {}, {}, default_template(), {}, 100000).estimated_words;
    auto p = assemble("q", three(), hist, default_template(), {s1, s2}, minimal + 9);
    EXPECT_TRUE(p.contexts.empty());
    EXPECT_EQ(p.history_used, 0u);
    EXPECT_EQ(p.shots_used, 1u);
}

TEST(Prompt, LargerBudgetNeverReorders) {
    auto small = assemble("q", three(), {}, default_template(), {}, 60);
    auto big = assemble("q", three(), {}, default_template(), {}, 100000);
    for (std::size_t i = 0; i < small.contexts.size(); ++i) EXPECT_EQ(small.contexts[i].chunk_id, big.contexts[i].chunk_id);
}

TEST(Prompt, Deterministic) {
    auto a = assemble("q", three(), {{"x", "y"}}, default_template(), {}, 3000);
    auto b = assemble("q", three(), {{"x", "y"}}, default_template(), {}, 3000);
    EXPECT_EQ(a.messages, b.messages);
}

TEST(Prompt, Errors) {
    EXPECT_THROW(assemble("  ", three(), {}, default_template(), {}, 3000), InvalidArgument);
    EXPECT_THROW(assemble("q", three(), {}, default_template(), {}, 3), InvalidArgument);
    PromptLibrary lib;
    EXPECT_THROW(lib.get("nope"), InvalidArgument);
}
