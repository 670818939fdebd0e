#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "specrag/error.hpp"
#include "specrag/http.hpp"
#include "specrag/text.hpp"

namespace specrag {

struct EmbeddingVector {
    std::vector<float> values;

    std::size_t dim() const noexcept { return values.size(); }
    bool operator==(const EmbeddingVector&) const = default;
};

inline double l2_norm(const EmbeddingVector& v) noexcept {
    double s = 0.0;
    for (float x : v.values) s += static_cast<double>(x) * x;
    return std::sqrt(s);
}

enum class EmbedderBackend { remote_http, local_hashed };

inline EmbedderBackend parse_embedder_backend(std::string_view s) {
    if (s == "local_hashed" || s == "local") return EmbedderBackend::local_hashed;
    if (s == "remote_http" || s == "remote") return EmbedderBackend::remote_http;
    throw InvalidArgument("unknown embedder backend '" + std::string(s) + "'");
}

inline std::string to_string(EmbedderBackend b) {
    return b == EmbedderBackend::local_hashed ? "local_hashed" : "remote_http";
}

struct EmbedderConfig {
    EmbedderBackend backend = EmbedderBackend::local_hashed;
    std::size_t dim = 384;
    std::optional<std::string> endpoint_url;
    std::optional<std::string> model_name;
    std::size_t batch_size = 32;
    bool normalize = true;
    std::string api_key;
    int timeout_seconds = 60;
    http::RetryPolicy retry;

    void validate() const {
        if (dim == 0) throw ConfigError("embedding dim must be positive");
        if (batch_size == 0) throw ConfigError("batch_size must be positive");
        if (backend == EmbedderBackend::remote_http && (!endpoint_url || endpoint_url->empty()))
            throw ConfigError("remote_http embedder requires endpoint_url");
    }

    /// Fill endpoint/key from EMBED_BASE_URL / EMBED_API_KEY when unset.
    EmbedderConfig& apply_env() {
        if (!endpoint_url) {
            auto url = http::env_or("EMBED_BASE_URL");
            if (!url.empty()) endpoint_url = url;
        }
        if (api_key.empty()) api_key = http::env_or("EMBED_API_KEY");
        return *this;
    }
};

namespace hashed {

inline constexpr std::uint64_t kBucketSeed = text::kFnvOffsetBasis;
inline constexpr std::uint64_t kSignSeed = text::kFnvOffsetBasis ^ 0x9e3779b97f4a7c15ULL;

/// Signed-hash bag of words before normalization. Integer-only, so identical
/// across platforms.
inline std::vector<std::int64_t> accumulate(std::string_view input, std::size_t dim) {
    std::vector<std::int64_t> acc(dim, 0);
    for (const auto& tok : text::tokenize(input)) {
        std::uint64_t bucket = text::fnv1a64(tok, kBucketSeed) % dim;
        // Top bit: the low bit of FNV-1a tracks the bucket's parity for any seed.
        bool negative = (text::fnv1a64(tok, kSignSeed) >> 63) == 1;
        acc[bucket] += negative ? -1 : 1;
    }
    return acc;
}

}  // namespace hashed

/// Shared cleanup applied to corpus and query text before embedding.
inline std::string embedding_input(std::string_view s) { return text::collapse_whitespace(s); }

namespace detail {

inline void normalize_in_place(EmbeddingVector& v, std::string_view what) {
    double n = l2_norm(v);
    if (n == 0.0) throw InvalidArgument("unembeddable text: " + std::string(what.substr(0, 60)));
    for (auto& x : v.values) x = static_cast<float>(static_cast<double>(x) / n);
}

inline EmbeddingVector embed_local(std::string_view raw, const EmbedderConfig& cfg) {
    auto acc = hashed::accumulate(embedding_input(raw), cfg.dim);
    bool any = false;
    for (auto a : acc) any = any || a != 0;
    if (!any) throw InvalidArgument("unembeddable text: " + std::string(raw.substr(0, 60)));
    EmbeddingVector v;
    v.values.resize(cfg.dim);
    if (cfg.normalize) {
        double s = 0.0;
        for (auto a : acc) s += static_cast<double>(a) * static_cast<double>(a);
        double n = std::sqrt(s);
        for (std::size_t i = 0; i < cfg.dim; ++i) v.values[i] = static_cast<float>(static_cast<double>(acc[i]) / n);
    } else {
        for (std::size_t i = 0; i < cfg.dim; ++i) v.values[i] = static_cast<float>(acc[i]);
    }
    return v;
}

inline std::vector<EmbeddingVector> embed_remote_batch(const std::vector<std::string>& inputs,
                                                       const EmbedderConfig& cfg, const http::Sleeper& sleep) {
    nlohmann::json body{{"model", cfg.model_name.value_or("")}, {"input", inputs}};
    const std::string url = *cfg.endpoint_url + (text::ends_with(*cfg.endpoint_url, "/") ? "" : "/") + "embeddings";
    auto [resp, attempts] = http::with_retries(
        "embeddings", cfg.retry, [&] { return http::post_json(url, body, cfg.api_key, cfg.timeout_seconds); },
        sleep);
    if (resp.status < 200 || resp.status >= 300)
        throw TransportError("embeddings: HTTP " + std::to_string(resp.status), resp.status, attempts);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(resp.body);
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(std::string("embeddings: response is not JSON: ") + e.what());
    }
    if (!j.contains("data") || !j["data"].is_array()) throw ProtocolError("embeddings: response lacks data[]");
    std::vector<EmbeddingVector> out(inputs.size());
    std::vector<bool> seen(inputs.size(), false);
    for (const auto& item : j["data"]) {
        if (!item.contains("index") || !item.contains("embedding"))
            throw ProtocolError("embeddings: item lacks index/embedding");
        auto idx = item["index"].get<std::size_t>();
        if (idx >= inputs.size() || seen[idx]) throw ProtocolError("embeddings: bad or repeated index");
        seen[idx] = true;
        EmbeddingVector v;
        for (const auto& x : item["embedding"]) v.values.push_back(x.get<float>());
        if (v.dim() != cfg.dim)
            throw ConfigError("embeddings: backend returned dim " + std::to_string(v.dim()) + ", configured " +
                              std::to_string(cfg.dim));
        for (float x : v.values)
            if (!std::isfinite(x)) throw ProtocolError("embeddings: non-finite value");
        if (cfg.normalize) normalize_in_place(v, inputs[idx]);
        out[idx] = std::move(v);
    }
    for (bool s : seen)
        if (!s) throw ProtocolError("embeddings: response is missing vectors");
    return out;
}

}  // namespace detail

/// One vector per input text, in input order.
inline std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts, const EmbedderConfig& cfg,
                                                const http::Sleeper& sleep = http::real_sleep) {
    cfg.validate();
    if (texts.empty()) throw InvalidArgument("embed_batch: empty input list");
    for (const auto& t : texts)
        if (text::trim(t).empty()) throw InvalidArgument("embed_batch: empty text");

    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    if (cfg.backend == EmbedderBackend::local_hashed) {
        for (const auto& t : texts) out.push_back(detail::embed_local(t, cfg));
        return out;
    }
    for (std::size_t start = 0; start < texts.size(); start += cfg.batch_size) {
        std::size_t end = std::min(texts.size(), start + cfg.batch_size);
        std::vector<std::string> batch;
        for (std::size_t i = start; i < end; ++i) batch.push_back(embedding_input(texts[i]));
        for (auto& v : detail::embed_remote_batch(batch, cfg, sleep)) out.push_back(std::move(v));
    }
    return out;
}

inline EmbeddingVector embed_query(const std::string& query, const EmbedderConfig& cfg,
                                   const http::Sleeper& sleep = http::real_sleep) {
    return embed_batch({query}, cfg, sleep).front();
}

/// Dot product over product of norms, in double; 0 when either norm is 0.
inline double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim()) throw InvalidArgument("cosine: dimension mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
        double x = a.values[i], y = b.values[i];
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace specrag
