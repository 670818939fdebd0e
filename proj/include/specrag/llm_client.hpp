#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "specrag/error.hpp"
#include "specrag/http.hpp"
#include "specrag/prompting.hpp"

namespace specrag {

enum class LlmBackend { remote_http, mock_echo_context, mock_canned };

inline LlmBackend parse_llm_backend(std::string_view s) {
    if (s == "remote_http" || s == "remote") return LlmBackend::remote_http;
    if (s == "mock_echo_context" || s == "echo") return LlmBackend::mock_echo_context;
    if (s == "mock_canned" || s == "canned") return LlmBackend::mock_canned;
    throw InvalidArgument("unknown llm backend '" + std::string(s) + "'");
}

inline std::string to_string(LlmBackend b) {
    switch (b) {
        case LlmBackend::remote_http: return "remote_http";
        case LlmBackend::mock_echo_context: return "mock_echo_context";
        case LlmBackend::mock_canned: return "mock_canned";
    }
    return "remote_http";
}

struct LlmConfig {
    LlmBackend backend = LlmBackend::mock_echo_context;
    std::optional<std::string> endpoint_url;
    std::string model_name = "gpt-4";
    double temperature = 0.0;
    int max_output_tokens = 1000;
    int timeout_seconds = 60;
    int max_retries = 3;
    std::int64_t backoff_base_ms = 1000;
    std::string canned_text;
    std::string api_key;

    void validate() const {
        if (temperature < 0.0) throw ConfigError("temperature must be >= 0");
        if (max_output_tokens < 1) throw ConfigError("max_output_tokens must be >= 1");
        if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
        if (backend == LlmBackend::remote_http && (!endpoint_url || endpoint_url->empty()))
            throw ConfigError("remote_http llm backend requires endpoint_url");
    }

    LlmConfig& apply_env() {
        if (!endpoint_url) {
            auto url = http::env_or("LLM_BASE_URL");
            if (!url.empty()) endpoint_url = url;
        }
        if (api_key.empty()) api_key = http::env_or("LLM_API_KEY");
        return *this;
    }

    http::RetryPolicy retry_policy() const { return {max_retries, backoff_base_ms, 2.0}; }
};

enum class FinishReason { stop, length, error };

inline std::string to_string(FinishReason f) {
    switch (f) {
        case FinishReason::stop: return "stop";
        case FinishReason::length: return "length";
        case FinishReason::error: return "error";
    }
    return "error";
}

struct Completion {
    std::string text;
    FinishReason finish_reason = FinishReason::stop;
    std::int64_t latency_ms = 0;
    std::size_t prompt_words = 0;
    int attempts = 1;
};

/// Context bodies in prompt order, then the first context's source line.
inline std::string echo_contexts(const AssembledPrompt& prompt) {
    if (prompt.contexts.empty()) return {};
    std::string out;
    for (const auto& c : prompt.contexts) {
        if (!out.empty()) out.push_back('\n');
        out.append(c.body());
    }
    out.append(kSourceMarker);
    out.append(prompt.contexts.front().source);
    return out;
}

inline nlohmann::json chat_request_body(const AssembledPrompt& prompt, const LlmConfig& cfg) {
    nlohmann::json messages = nlohmann::json::array();
    for (const auto& m : prompt.messages) messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    return {{"model", cfg.model_name},
            {"messages", messages},
            {"temperature", cfg.temperature},
            {"max_tokens", cfg.max_output_tokens}};
}

inline Completion complete(const AssembledPrompt& prompt, const LlmConfig& cfg,
                           const http::Sleeper& sleep = http::real_sleep) {
    cfg.validate();
    if (prompt.messages.empty() || prompt.messages.front().role != Role::system ||
        prompt.messages.back().role != Role::user)
        throw InvalidArgument("prompt must start with a system message and end with a user message");

    const auto t0 = std::chrono::steady_clock::now();
    Completion c;
    c.prompt_words = prompt.estimated_words;
    auto stamp = [&] {
        c.latency_ms =
            std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
    };

    switch (cfg.backend) {
        case LlmBackend::mock_canned:
            c.text = cfg.canned_text;
            stamp();
            return c;
        case LlmBackend::mock_echo_context:
            c.text = echo_contexts(prompt);
            stamp();
            return c;
        case LlmBackend::remote_http: break;
    }

    const std::string url =
        *cfg.endpoint_url + (text::ends_with(*cfg.endpoint_url, "/") ? "" : "/") + "chat/completions";
    auto body = chat_request_body(prompt, cfg);
    auto [resp, attempts] = http::with_retries(
        "chat/completions", cfg.retry_policy(),
        [&] { return http::post_json(url, body, cfg.api_key, cfg.timeout_seconds); }, sleep);
    c.attempts = attempts;
    if (resp.status < 200 || resp.status >= 300)
        throw TransportError("chat/completions: HTTP " + std::to_string(resp.status), resp.status, attempts);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(resp.body);
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(std::string("chat/completions: response is not JSON: ") + e.what());
    }
    try {
        const auto& choice = j.at("choices").at(0);
        const auto& content = choice.at("message").at("content");
        c.text = content.is_null() ? std::string() : content.get<std::string>();
        auto reason = choice.value("finish_reason", std::string("stop"));
        c.finish_reason = reason == "length" ? FinishReason::length : FinishReason::stop;
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(std::string("chat/completions: unexpected response shape: ") + e.what());
    }
    stamp();
    return c;
}

}  // namespace specrag
