#pragma once

// Small JSON-over-HTTP client used by the remote embedding, completion and
// issue-tracker backends.

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <string>
#include <string_view>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "specrag/error.hpp"

namespace specrag::http {

struct Url {
    std::string origin;  // scheme://host[:port]
    std::string path;    // always starts with '/', no trailing '/'
};

/// Split "http://host:8080/v1/" into {"http://host:8080", "/v1"}.
inline Url split_url(std::string_view url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string_view::npos) throw ConfigError("URL without scheme: " + std::string(url));
    auto path_start = url.find('/', scheme_end + 3);
    Url u;
    if (path_start == std::string_view::npos) {
        u.origin = std::string(url);
        u.path = "";
    } else {
        u.origin = std::string(url.substr(0, path_start));
        u.path = std::string(url.substr(path_start));
    }
    while (!u.path.empty() && u.path.back() == '/') u.path.pop_back();
    return u;
}

inline std::string env_or(const char* name, std::string fallback = {}) {
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : fallback;
}

struct Response {
    int status = 0;
    std::string body;
};

/// POST a JSON body. Connection-level failures (refused, timeout) raise
/// TransportError with status 0; HTTP statuses are returned as-is.
inline Response post_json(const std::string& url, const nlohmann::json& body, const std::string& bearer_token,
                          int timeout_seconds, const std::string& method = "POST") {
    auto u = split_url(url);
    httplib::Client client(u.origin);
    client.set_connection_timeout(timeout_seconds, 0);
    client.set_read_timeout(timeout_seconds, 0);
    client.set_write_timeout(timeout_seconds, 0);
    httplib::Headers headers;
    if (!bearer_token.empty()) headers.emplace("Authorization", "Bearer " + bearer_token);
    std::string path = u.path.empty() ? "/" : u.path;
    auto payload = body.dump();
    httplib::Result res = method == "PATCH" ? client.Patch(path, headers, payload, "application/json")
                                            : client.Post(path, headers, payload, "application/json");
    if (!res) throw TransportError(url + ": " + httplib::to_string(res.error()));
    return Response{res->status, res->body};
}

/// Exponential backoff: delay before retry n (1-based) is base * factor^(n-1).
struct RetryPolicy {
    int max_retries = 3;
    std::int64_t base_delay_ms = 1000;
    double factor = 2.0;

    std::int64_t delay_ms(int retry) const {
        double d = static_cast<double>(base_delay_ms);
        for (int i = 1; i < retry; ++i) d *= factor;
        return static_cast<std::int64_t>(d);
    }
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

inline void real_sleep(std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }

/// Run `send` until it returns a non-retryable status or retries run out.
/// 429 and 5xx are retried; total attempts never exceed max_retries + 1.
/// Returns the final response (success or non-retryable) plus attempt count.
template <typename Send>
std::pair<Response, int> with_retries(const std::string& what, const RetryPolicy& policy, Send&& send,
                                      const Sleeper& sleep = real_sleep) {
    int attempts = 0;
    for (;;) {
        Response r = send();
        ++attempts;
        bool retryable = r.status == 429 || r.status >= 500;
        if (!retryable) return {r, attempts};
        int retries_done = attempts - 1;
        if (retries_done >= policy.max_retries)
            throw TransportError(what + ": HTTP " + std::to_string(r.status) + " after " + std::to_string(attempts) +
                                     " attempts",
                                 r.status, attempts, policy.delay_ms(retries_done + 1));
        sleep(std::chrono::milliseconds(policy.delay_ms(retries_done + 1)));
    }
}

}  // namespace specrag::http
