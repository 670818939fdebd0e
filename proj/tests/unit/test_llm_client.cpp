#include <gtest/gtest.h>

#include "specrag/llm_client.hpp"
#include "support/stub_server.hpp"

using namespace specrag;

namespace {

AssembledPrompt prompt_with(std::vector<Chunk> contexts) {
    return assemble("q", contexts, {}, default_template(), {}, 3000);
}

LlmConfig remote(const std::string& url) {
    LlmConfig c;
    c.backend = LlmBackend::remote_http;
    c.endpoint_url = url;
    c.backoff_base_ms = 5;
    return c;
}

std::string chat_reply(const std::string& content, const std::string& reason = "stop") {
    return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}, {"finish_reason", reason}}}}}
        .dump();
}

}  // namespace

TEST(Llm, CannedReturnsText) {
    LlmConfig c;
    c.backend = LlmBackend::mock_canned;
    c.canned_text = "hello";
    auto out = complete(prompt_with({}), c);
    EXPECT_EQ(out.text, "hello");
    EXPECT_EQ(out.finish_reason, FinishReason::stop);
}

TEST(Llm, EchoContainsBodyAndSource) {
    auto chunk = make_chunk("x", "X", "TS A", "1", "TS A §1", ChunkOrigin::document);
    auto out = complete(prompt_with({chunk}), LlmConfig{});
    EXPECT_NE(out.text.find("X"), std::string::npos);
    EXPECT_NE(out.text.find("Source: TS A §1"), std::string::npos);
}

TEST(Llm, RateLimitedTwiceThenSuccess) {
    testkit::StubServer stub;
    stub.script("/chat/completions", {{429, "{}"}, {429, "{}"}, {200, chat_reply("fine")}});
    std::vector<std::int64_t> sleeps;
    auto out = complete(prompt_with({}), remote(stub.url()), [&](auto d) { sleeps.push_back(d.count()); });
    EXPECT_EQ(out.text, "fine");
    EXPECT_EQ(out.attempts, 3);
    EXPECT_EQ(sleeps, (std::vector<std::int64_t>{5, 10}));
    EXPECT_GE(out.latency_ms, 0);
    auto body = nlohmann::json::parse(stub.seen().back().body);
    EXPECT_EQ(body["model"], "gpt-4");
    EXPECT_EQ(body["temperature"], 0.0);
    EXPECT_EQ(body["max_tokens"], 1000);
    EXPECT_EQ(body["messages"][0]["role"], "system");
}

TEST(Llm, RetriesNeverExceedBudget) {
    testkit::StubServer stub;
    stub.set_sticky(true);
    stub.script("/chat/completions", {{503, "{}"}});
    auto cfg = remote(stub.url());
    cfg.max_retries = 2;
    try {
        complete(prompt_with({}), cfg, [](auto) {});
        FAIL();
    } catch (const TransportError& e) {
        EXPECT_EQ(e.status(), 503);
        EXPECT_EQ(e.attempts(), 3);
    }
    EXPECT_EQ(stub.seen().size(), 3u);
}

TEST(Llm, ClientErrorNotRetried) {
    testkit::StubServer stub;
    stub.script("/chat/completions", {{400, R"({"error":"bad"})"}});
    EXPECT_THROW(complete(prompt_with({}), remote(stub.url()), [](auto) {}), TransportError);
    EXPECT_EQ(stub.seen().size(), 1u);
}

TEST(Llm, LengthFinishReason) {
    testkit::StubServer stub;
    stub.script("/chat/completions", {{200, chat_reply("cut", "length")}});
    EXPECT_EQ(complete(prompt_with({}), remote(stub.url())).finish_reason, FinishReason::length);
}

TEST(Llm, MalformedBodyIsProtocolError) {
    testkit::StubServer stub;
    stub.script("/chat/completions", {{200, "not json"}, {200, R"({"choices":[]})"}});
    EXPECT_THROW(complete(prompt_with({}), remote(stub.url())), ProtocolError);
    EXPECT_THROW(complete(prompt_with({}), remote(stub.url())), ProtocolError);
}

TEST(Llm, OfflineFailsWithoutRetry) {
    auto cfg = remote("http://127.0.0.1:" + std::to_string(testkit::closed_port()));
    cfg.timeout_seconds = 2;
    int sleeps = 0;
    EXPECT_THROW(complete(prompt_with({}), cfg, [&](auto) { ++sleeps; }), TransportError);
    EXPECT_EQ(sleeps, 0);
}

TEST(Llm, ConfigValidation) {
    LlmConfig c;
    c.temperature = -1;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.max_output_tokens = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.backend = LlmBackend::remote_http;
    EXPECT_THROW(c.validate(), ConfigError);
}
