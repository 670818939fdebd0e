#pragma once

// HTTP front end: sessions, queries, feedback and expert requests over JSON.

#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "specrag/corpus.hpp"
#include "specrag/error.hpp"
#include "specrag/feedback.hpp"
#include "specrag/pipeline.hpp"
#include "specrag/toml_lite.hpp"

namespace specrag {

inline constexpr const char* kDefaultDisclaimer =
    "This assistant synthesizes answers from wireless technical specifications and cites its sources. "
    "We do not recommend fully automated systems based solely on the outputs and that it is important that "
    "humans are still in the loop to correct any mistakes that the system may make.";

struct ServiceConfig {
    std::string bind_address = "127.0.0.1";
    int port = 8080;
    std::string corpus_path;
    std::string index_path;
    std::string state_dir = "state";
    std::string experts_path;
    std::string disclaimer_text = kDefaultDisclaimer;
    std::string cors_origin = "*";
    std::optional<std::uint64_t> seed;
    SegmenterConfig segmenter;
    PipelineConfig pipeline;
    IssueTrackerConfig issues;

    /// Referenced files must exist; module configs must be valid.
    void validate() const {
        if (port < 0 || port > 65535) throw ConfigError("port out of range");
        if (corpus_path.empty() || !std::filesystem::exists(corpus_path))
            throw ConfigError("corpus_path '" + corpus_path + "' does not exist");
        if (index_path.empty() || !std::filesystem::exists(index_path))
            throw ConfigError("index_path '" + index_path + "' does not exist");
        if (!experts_path.empty() && !std::filesystem::exists(experts_path))
            throw ConfigError("experts_path '" + experts_path + "' does not exist");
        if (disclaimer_text.empty()) throw ConfigError("disclaimer_text must not be empty");
        segmenter.validate();
        pipeline.embedder.validate();
        pipeline.llm.validate();
        if (pipeline.retriever.k < 1) throw ConfigError("retriever.k must be >= 1");
        pipeline.prompts.get(pipeline.prompt_variant);
    }
};

namespace detail {

template <typename T>
void take(const nlohmann::json& j, const char* key, T& out) {
    if (!j.is_object() || !j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    }
}

inline std::string resolve_path(const std::filesystem::path& base, const std::string& p) {
    if (p.empty()) return p;
    std::filesystem::path path(p);
    return path.is_absolute() ? p : (base / path).lexically_normal().string();
}

}  // namespace detail

/// Build a ServiceConfig from parsed TOML. Relative paths resolve against
/// `base_dir` (the config file's directory).
inline ServiceConfig service_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    using detail::take;
    ServiceConfig c;
    take(j, "bind_address", c.bind_address);
    take(j, "port", c.port);
    take(j, "corpus_path", c.corpus_path);
    take(j, "index_path", c.index_path);
    take(j, "state_dir", c.state_dir);
    take(j, "experts_path", c.experts_path);
    take(j, "disclaimer_text", c.disclaimer_text);
    take(j, "cors_origin", c.cors_origin);
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();

    const auto empty = nlohmann::json::object();
    const auto& seg = j.value("segmenter", empty);
    take(seg, "n_words", c.segmenter.n_words);
    if (seg.contains("strategy")) c.segmenter.strategy = parse_strategy(seg.at("strategy").get<std::string>());
    take(seg, "fixed_chunk_words", c.segmenter.fixed_chunk_words);
    take(seg, "fixed_overlap_words", c.segmenter.fixed_overlap_words);

    auto& p = c.pipeline;
    const auto& emb = j.value("embedder", empty);
    if (emb.contains("backend")) p.embedder.backend = parse_embedder_backend(emb.at("backend").get<std::string>());
    take(emb, "dim", p.embedder.dim);
    if (emb.contains("endpoint_url")) p.embedder.endpoint_url = emb.at("endpoint_url").get<std::string>();
    if (emb.contains("model_name")) p.embedder.model_name = emb.at("model_name").get<std::string>();
    take(emb, "batch_size", p.embedder.batch_size);
    take(emb, "timeout_seconds", p.embedder.timeout_seconds);
    take(emb, "max_retries", p.embedder.retry.max_retries);
    take(emb, "backoff_base_ms", p.embedder.retry.base_delay_ms);
    p.embedder.apply_env();

    take(j.value("retriever", empty), "k", p.retriever.k);

    const auto& pr = j.value("prompt", empty);
    std::string prompts_path;
    take(pr, "prompts_path", prompts_path);
    if (!prompts_path.empty()) p.prompts = PromptLibrary::load(detail::resolve_path(base_dir, prompts_path));
    take(pr, "variant", p.prompt_variant);
    take(pr, "budget_words", p.prompt.budget_words);
    take(pr, "history_turns", p.prompt.history_turns);
    take(pr, "use_shots", p.use_shots);

    const auto& llm = j.value("llm", empty);
    if (llm.contains("backend")) p.llm.backend = parse_llm_backend(llm.at("backend").get<std::string>());
    if (llm.contains("endpoint_url")) p.llm.endpoint_url = llm.at("endpoint_url").get<std::string>();
    take(llm, "model_name", p.llm.model_name);
    take(llm, "temperature", p.llm.temperature);
    take(llm, "max_output_tokens", p.llm.max_output_tokens);
    take(llm, "timeout_seconds", p.llm.timeout_seconds);
    take(llm, "max_retries", p.llm.max_retries);
    take(llm, "backoff_base_ms", p.llm.backoff_base_ms);
    take(llm, "canned_text", p.llm.canned_text);
    p.llm.apply_env();

    c.issues = IssueTrackerConfig::from_env();
    const auto& iss = j.value("issues", empty);
    take(iss, "url", c.issues.url);
    take(iss, "timeout_seconds", c.issues.timeout_seconds);

    c.corpus_path = detail::resolve_path(base_dir, c.corpus_path);
    c.index_path = detail::resolve_path(base_dir, c.index_path);
    c.state_dir = detail::resolve_path(base_dir, c.state_dir);
    c.experts_path = detail::resolve_path(base_dir, c.experts_path);
    return c;
}

inline ServiceConfig load_service_config(const std::string& path) {
    auto j = toml::parse_file(path);
    auto base = std::filesystem::absolute(path).parent_path();
    return service_config_from_json(j, base);
}

/// Load corpus and index and check they describe the same chunks.
inline std::shared_ptr<const KnowledgeBase> load_knowledge_base(const std::string& corpus_path,
                                                                const std::string& index_path,
                                                                const EmbedderConfig& embedder) {
    auto chunks = read_corpus(corpus_path);
    auto index = VectorIndex::load(index_path);
    if (index.size() != chunks.size())
        throw ConfigError("index has " + std::to_string(index.size()) + " entries but corpus has " +
                          std::to_string(chunks.size()) + " chunks");
    if (index.dim() != embedder.dim)
        throw ConfigError("index dim " + std::to_string(index.dim()) + " does not match embedder dim " +
                          std::to_string(embedder.dim));
    return std::make_shared<const KnowledgeBase>(std::move(chunks), std::move(index), embedder);
}

struct Reply {
    int status = 200;
    nlohmann::json body;  // null for no content
};

class Service {
public:
    explicit Service(ServiceConfig cfg, const http::Sleeper& sleep = http::real_sleep)
        : cfg_(std::move(cfg)),
          sleep_(sleep),
          ids_(cfg_.seed ? std::make_shared<IdGenerator>(*cfg_.seed) : std::make_shared<IdGenerator>()),
          sessions_(ids_, cfg_.state_dir.empty() ? std::string() : cfg_.state_dir + "/sessions"),
          feedback_(cfg_.state_dir.empty() ? std::string() : ensure_dir(cfg_.state_dir) + "/feedback.jsonl"),
          requests_(cfg_.state_dir.empty() ? std::string("expert_requests") : cfg_.state_dir + "/expert_requests",
                    cfg_.issues, ids_) {
        if (!cfg_.experts_path.empty()) experts_ = ExpertRegistry::load(cfg_.experts_path);
        install_routes();
    }

    ~Service() { stop(); }

    /// Read corpus and index; health flips to "ready" afterwards.
    void load() {
        auto kb = load_knowledge_base(cfg_.corpus_path, cfg_.index_path, cfg_.pipeline.embedder);
        use(std::move(kb));
    }

    /// Serve an already built knowledge base.
    void use(std::shared_ptr<const KnowledgeBase> kb) {
        std::lock_guard lock(store_mutex_);
        store_ = std::make_shared<KnowledgeStore>(std::move(kb), KnowledgeStore::Paths{cfg_.corpus_path, cfg_.index_path});
        ready_ = true;
    }

    bool ready() const noexcept { return ready_; }

    Reply handle_session(const std::string& body) {
        if (!text::trim(body).empty()) {
            nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
            if (j.is_discarded() || !j.is_object() || !j.empty())
                return error(400, "request body must be empty or {}");
        }
        return {200, {{"session_id", sessions_.create()}, {"disclaimer", cfg_.disclaimer_text}}};
    }

    Reply handle_query(const std::string& body) {
        auto j = parse_object(body);
        if (!j) return error(400, "request body must be a JSON object");
        auto sid = j->value("session_id", std::string());
        auto query = (*j).contains("query") && (*j)["query"].is_string() ? (*j)["query"].get<std::string>() : "";
        auto slot = sessions_.find(sid);
        if (!slot) return error(404, "unknown session");
        if (text::trim(query).empty()) return error(400, "empty query");
        auto store = current_store();
        if (!store) return error(503, "index not loaded");
        std::lock_guard lock(slot->mutex);
        auto kb = store->snapshot();
        try {
            auto rec = answer(query, slot->session, *kb, cfg_.pipeline, sleep_);
            slot->records.push_back(rec);
            sessions_.persist_turn(*slot);
            auto out = to_json(rec);
            out["turn_index"] = slot->records.size() - 1;
            return {200, out};
        } catch (const StageError& e) {
            auto r = error(e.is_transport() ? 502 : 500, e.what());
            r.body["stage"] = e.stage();
            return r;
        }
    }

    Reply handle_feedback(const std::string& body) {
        auto j = parse_object(body);
        if (!j) return error(400, "request body must be a JSON object");
        auto sid = j->value("session_id", std::string());
        if (!sessions_.find(sid)) return error(404, "unknown session");
        if (!(*j).contains("turn_index") || !(*j)["turn_index"].is_number_unsigned())
            return error(400, "turn_index must be a non-negative integer");
        try {
            FeedbackRecord rec{sid, (*j)["turn_index"].get<std::size_t>(),
                               parse_verdict(j->value("verdict", std::string())), {}};
            feedback_.record(std::move(rec), sessions_);
        } catch (const NotFound& e) {
            return error(404, e.what());
        } catch (const InvalidArgument& e) {
            return error(400, e.what());
        }
        return {204, nullptr};
    }

    Reply handle_expert_request(const std::string& body) {
        auto j = parse_object(body);
        if (!j) return error(400, "request body must be a JSON object");
        auto slot = sessions_.find(j->value("session_id", std::string()));
        if (!slot) return error(404, "unknown session");
        if (!(*j).contains("turn_index") || !(*j)["turn_index"].is_number_unsigned())
            return error(400, "turn_index must be a non-negative integer");
        auto turn = (*j)["turn_index"].get<std::size_t>();
        AnswerRecord rec;
        {
            std::lock_guard lock(slot->mutex);
            if (turn >= slot->records.size()) return error(404, "unknown turn");
            rec = slot->records[turn];
        }
        auto store = current_store();
        if (!store) return error(503, "index not loaded");
        auto r = requests_.create(rec, *store->snapshot());
        return {200, {{"request_id", r.request_id}}};
    }

    /// Expert resolution: {request_id, expert_id, text} -> {chunk_ids}.
    Reply handle_resolution(const std::string& body) {
        auto j = parse_object(body);
        if (!j) return error(400, "request body must be a JSON object");
        auto store = current_store();
        if (!store) return error(503, "index not loaded");
        try {
            auto chunks = requests_.resolve(j->value("request_id", std::string()), j->value("expert_id", std::string()),
                                            j->value("text", std::string()), experts_, *store, cfg_.segmenter);
            nlohmann::json ids = nlohmann::json::array();
            for (const auto& c : chunks) ids.push_back(c.chunk_id);
            return {200, {{"chunk_ids", ids}}};
        } catch (const NotFound& e) {
            return error(404, e.what());
        } catch (const AuthorizationError& e) {
            return error(403, e.what());
        } catch (const StateError& e) {
            return error(409, e.what());
        } catch (const InvalidArgument& e) {
            return error(400, e.what());
        }
    }

    Reply handle_health() const {
        auto store = current_store();
        if (!ready_ || !store) return {200, {{"status", "starting"}, {"corpus_chunks", 0}, {"index_size", 0}}};
        auto kb = store->snapshot();
        return {200, {{"status", "ready"}, {"corpus_chunks", kb->chunks().size()}, {"index_size", kb->index().size()}}};
    }

    httplib::Server& server() noexcept { return server_; }

    /// Bind and serve on a background thread. Returns the bound port.
    int start(const std::string& host, int port) {
        int bound = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
        if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        return bound;
    }

    void stop() {
        server_.stop();
        if (thread_.joinable()) thread_.join();
    }

    const ServiceConfig& config() const noexcept { return cfg_; }
    FeedbackLog& feedback() noexcept { return feedback_; }
    ExpertRequestQueue& requests() noexcept { return requests_; }
    SessionStore& sessions() noexcept { return sessions_; }

private:
    static std::string ensure_dir(const std::string& d) {
        std::filesystem::create_directories(d);
        return d;
    }

    static Reply error(int status, const std::string& what) { return {status, {{"error", what}}}; }

    static std::optional<nlohmann::json> parse_object(const std::string& body) {
        auto j = nlohmann::json::parse(body, nullptr, false);
        if (j.is_discarded() || !j.is_object()) return std::nullopt;
        return j;
    }

    std::shared_ptr<KnowledgeStore> current_store() const {
        std::lock_guard lock(store_mutex_);
        return store_;
    }

    void install_routes() {
        auto wrap = [this](auto fn) {
            return [this, fn](const httplib::Request& req, httplib::Response& res) {
                Reply r;
                try {
                    r = fn(req);
                } catch (const Error& e) {
                    r = error(500, e.what());
                } catch (const std::exception& e) {
                    r = error(500, e.what());
                }
                res.status = r.status;
                if (!r.body.is_null()) res.set_content(r.body.dump(), "application/json; charset=utf-8");
            };
        };
        server_.set_default_headers({{"Access-Control-Allow-Origin", cfg_.cors_origin},
                                     {"Access-Control-Allow-Headers", "Content-Type"},
                                     {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
        server_.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
        server_.Post("/api/session", wrap([this](const httplib::Request& q) { return handle_session(q.body); }));
        server_.Post("/api/query", wrap([this](const httplib::Request& q) { return handle_query(q.body); }));
        server_.Post("/api/feedback", wrap([this](const httplib::Request& q) { return handle_feedback(q.body); }));
        server_.Post("/api/expert-request",
                     wrap([this](const httplib::Request& q) { return handle_expert_request(q.body); }));
        server_.Post("/api/expert-resolution",
                     wrap([this](const httplib::Request& q) { return handle_resolution(q.body); }));
        server_.Get("/api/health", wrap([this](const httplib::Request&) { return handle_health(); }));
    }

    ServiceConfig cfg_;
    http::Sleeper sleep_;
    std::shared_ptr<IdGenerator> ids_;
    SessionStore sessions_;
    FeedbackLog feedback_;
    ExpertRequestQueue requests_;
    ExpertRegistry experts_;
    mutable std::mutex store_mutex_;
    std::shared_ptr<KnowledgeStore> store_;
    std::atomic<bool> ready_{false};
    httplib::Server server_;
    std::thread thread_;
};

}  // namespace specrag
