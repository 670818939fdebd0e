#pragma once

// Like/dislike log and the expert-request queue. Requests live as
// requests/{id}.json; an optional issue tracker mirrors them remotely.

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "specrag/corpus.hpp"
#include "specrag/error.hpp"
#include "specrag/http.hpp"
#include "specrag/pipeline.hpp"

namespace specrag {

enum class Verdict { like, dislike };

inline std::string to_string(Verdict v) { return v == Verdict::like ? "like" : "dislike"; }

inline Verdict parse_verdict(std::string_view s) {
    if (s == "like") return Verdict::like;
    if (s == "dislike") return Verdict::dislike;
    throw InvalidArgument("verdict must be 'like' or 'dislike'");
}

struct FeedbackRecord {
    std::string session_id;
    std::size_t turn_index = 0;
    Verdict verdict = Verdict::like;
    std::string timestamp;
};

/// One verdict per (session, turn); later verdicts overwrite earlier ones.
/// Every call is also appended to a JSONL file when a path is given, so
/// replaying the file (last line wins) restores the same state.
class FeedbackLog {
public:
    explicit FeedbackLog(std::string path = {}) : path_(std::move(path)) {
        if (path_.empty() || !std::filesystem::exists(path_)) return;
        std::ifstream in(path_);
        std::string line;
        while (std::getline(in, line)) {
            if (text::trim(line).empty()) continue;
            auto j = nlohmann::json::parse(line);
            FeedbackRecord r{j.at("session_id").get<std::string>(), j.at("turn_index").get<std::size_t>(),
                             parse_verdict(j.at("verdict").get<std::string>()), j.value("timestamp", "")};
            entries_[{r.session_id, r.turn_index}] = r;
        }
    }

    /// `turn_count` is the number of turns the session currently has.
    void record(FeedbackRecord rec, std::size_t turn_count) {
        if (rec.turn_index >= turn_count)
            throw NotFound("turn " + std::to_string(rec.turn_index) + " does not exist in session " + rec.session_id);
        if (rec.timestamp.empty()) rec.timestamp = utc_timestamp();
        std::lock_guard lock(mutex_);
        if (!path_.empty()) {
            std::ofstream out(path_, std::ios::app | std::ios::binary);
            out << nlohmann::json{{"session_id", rec.session_id},
                                  {"turn_index", rec.turn_index},
                                  {"verdict", to_string(rec.verdict)},
                                  {"timestamp", rec.timestamp}}
                       .dump()
                << '\n';
        }
        entries_[{rec.session_id, rec.turn_index}] = std::move(rec);
    }

    void record(FeedbackRecord rec, const SessionStore& sessions) {
        auto slot = sessions.get(rec.session_id);
        std::size_t turns = 0;
        {
            std::lock_guard lock(slot->mutex);
            turns = slot->session.turns.size();
        }
        record(std::move(rec), turns);
    }

    std::optional<Verdict> verdict(const std::string& session_id, std::size_t turn) const {
        std::lock_guard lock(mutex_);
        auto it = entries_.find({session_id, turn});
        if (it == entries_.end()) return std::nullopt;
        return it->second.verdict;
    }

    std::size_t size() const {
        std::lock_guard lock(mutex_);
        return entries_.size();
    }

private:
    std::string path_;
    mutable std::mutex mutex_;
    std::map<std::pair<std::string, std::size_t>, FeedbackRecord> entries_;
};

// ---- issue tracker --------------------------------------------------------

/// Minimal issue API: POST {url} {"title","body"} -> {"number": N};
/// PATCH {url}/{N} {"state":"closed"} to close.
struct IssueTrackerConfig {
    std::string url;
    std::string token;
    int timeout_seconds = 30;

    bool enabled() const noexcept { return !url.empty(); }

    static IssueTrackerConfig from_env() {
        return {http::env_or("ISSUES_API_URL"), http::env_or("ISSUES_TOKEN"), 30};
    }
};

inline std::int64_t create_issue(const IssueTrackerConfig& cfg, const std::string& title, const std::string& body) {
    auto resp = http::post_json(cfg.url, {{"title", title}, {"body", body}}, cfg.token, cfg.timeout_seconds);
    if (resp.status < 200 || resp.status >= 300)
        throw TransportError("issues: HTTP " + std::to_string(resp.status), resp.status);
    try {
        auto j = nlohmann::json::parse(resp.body);
        return j.at("number").get<std::int64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(std::string("issues: bad response: ") + e.what());
    }
}

inline void close_issue(const IssueTrackerConfig& cfg, std::int64_t number) {
    std::string url = cfg.url;
    while (!url.empty() && url.back() == '/') url.pop_back();
    auto resp = http::post_json(url + "/" + std::to_string(number), {{"state", "closed"}}, cfg.token,
                                cfg.timeout_seconds, "PATCH");
    if (resp.status < 200 || resp.status >= 300)
        throw TransportError("issues: HTTP " + std::to_string(resp.status), resp.status);
}

// ---- expert requests ------------------------------------------------------

enum class RequestStatus { open, resolved };

inline std::string to_string(RequestStatus s) { return s == RequestStatus::open ? "open" : "resolved"; }

struct ContextItem {
    std::string text;
    std::string source;
};

struct ExpertRequest {
    std::string request_id;
    std::string query;
    std::vector<ContextItem> context;
    std::string response;
    RequestStatus status = RequestStatus::open;
    std::optional<std::string> resolver_expert_id;
    std::optional<std::string> resolution_text;
    std::optional<std::int64_t> issue_number;
    bool pending_sync = false;        // local state not yet mirrored remotely
    bool remote_closed = false;
    std::vector<std::string> resolution_chunk_ids;
};

inline nlohmann::ordered_json to_json(const ExpertRequest& r) {
    nlohmann::ordered_json j;
    j["request_id"] = r.request_id;
    j["query"] = r.query;
    j["context"] = nlohmann::ordered_json::array();
    for (const auto& c : r.context) j["context"].push_back({{"text", c.text}, {"source", c.source}});
    j["response"] = r.response;
    j["status"] = to_string(r.status);
    j["resolver_expert_id"] = r.resolver_expert_id ? nlohmann::ordered_json(*r.resolver_expert_id) : nullptr;
    j["resolution_text"] = r.resolution_text ? nlohmann::ordered_json(*r.resolution_text) : nullptr;
    j["issue_number"] = r.issue_number ? nlohmann::ordered_json(*r.issue_number) : nullptr;
    j["pending_sync"] = r.pending_sync;
    j["remote_closed"] = r.remote_closed;
    j["resolution_chunk_ids"] = r.resolution_chunk_ids;
    return j;
}

inline ExpertRequest expert_request_from_json(const nlohmann::json& j) {
    ExpertRequest r;
    r.request_id = j.at("request_id").get<std::string>();
    r.query = j.at("query").get<std::string>();
    for (const auto& c : j.at("context")) r.context.push_back({c.at("text"), c.at("source")});
    r.response = j.at("response").get<std::string>();
    r.status = j.at("status").get<std::string>() == "resolved" ? RequestStatus::resolved : RequestStatus::open;
    if (!j.value("resolver_expert_id", nlohmann::json()).is_null())
        r.resolver_expert_id = j["resolver_expert_id"].get<std::string>();
    if (!j.value("resolution_text", nlohmann::json()).is_null())
        r.resolution_text = j["resolution_text"].get<std::string>();
    if (!j.value("issue_number", nlohmann::json()).is_null()) r.issue_number = j["issue_number"].get<std::int64_t>();
    r.pending_sync = j.value("pending_sync", false);
    r.remote_closed = j.value("remote_closed", false);
    r.resolution_chunk_ids = j.value("resolution_chunk_ids", std::vector<std::string>{});
    return r;
}

inline std::string issue_title(const ExpertRequest& r) {
    std::string q = text::collapse_whitespace(r.query);
    if (q.size() > 80) q = q.substr(0, 77) + "...";
    return "Expert request: " + q;
}

/// Markdown with "## Query", "## Context" (one "Source: ..." line per
/// context item) and "## Response".
inline std::string issue_body(const ExpertRequest& r) {
    std::string b = "## Query\n\n" + r.query + "\n\n## Context\n\n";
    for (std::size_t i = 0; i < r.context.size(); ++i) {
        b += "### Context " + std::to_string(i + 1) + "\n\n";
        b += r.context[i].text + "\n\nSource: " + r.context[i].source + "\n\n";
    }
    b += "## Response\n\n" + r.response + "\n";
    return b;
}

class ExpertRequestQueue {
public:
    ExpertRequestQueue(std::string dir, IssueTrackerConfig tracker = {},
                       std::shared_ptr<IdGenerator> ids = std::make_shared<IdGenerator>())
        : dir_(std::move(dir)), tracker_(std::move(tracker)), ids_(std::move(ids)) {
        std::filesystem::create_directories(dir_);
    }

    /// Persist a request for `turn`, then try to mirror it as an issue. A
    /// failed remote call leaves the request open with pending_sync set.
    ExpertRequest create(const AnswerRecord& turn, const KnowledgeBase& kb) {
        ExpertRequest r;
        r.query = turn.query;
        r.response = turn.response_text;
        for (const auto& id : turn.context_ids) {
            const auto& c = kb.chunk(id);
            r.context.push_back({std::string(c.body()), c.source});
        }
        std::lock_guard lock(mutex_);
        if (tracker_.enabled()) {
            try {
                r.issue_number = create_issue(tracker_, issue_title(r), issue_body(r));
                r.request_id = std::to_string(*r.issue_number);
            } catch (const Error&) {
                r.pending_sync = true;
            }
        }
        if (r.request_id.empty()) r.request_id = ids_->next();
        if (std::filesystem::exists(path_for(r.request_id)))
            throw StateError("request " + r.request_id + " already exists");
        save(r);
        return r;
    }

    ExpertRequest load(const std::string& request_id) const {
        auto p = path_for(request_id);
        std::ifstream in(p);
        if (!in) throw NotFound("unknown expert request '" + request_id + "'");
        try {
            return expert_request_from_json(nlohmann::json::parse(in));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(p.string(), 0, e.what());
        }
    }

    std::vector<ExpertRequest> list() const {
        std::vector<std::filesystem::path> files;
        for (const auto& e : std::filesystem::directory_iterator(dir_))
            if (e.path().extension() == ".json") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        std::vector<ExpertRequest> out;
        for (const auto& f : files) out.push_back(load(f.stem().string()));
        return out;
    }

    /// Turn the expert's text into attributed chunks, add them to the
    /// knowledge store (rebuilding the index) and mark the request resolved.
    std::vector<Chunk> resolve(const std::string& request_id, const std::string& expert_id,
                               const std::string& resolution_text, const ExpertRegistry& registry,
                               KnowledgeStore& store, const SegmenterConfig& seg = {}) {
        std::lock_guard lock(mutex_);
        auto r = load(request_id);
        if (r.status == RequestStatus::resolved) throw StateError("request " + request_id + " already resolved");
        auto chunks = add_expert_chunk(resolution_text, expert_id, registry, seg);
        auto kb = store.snapshot();
        for (auto& c : chunks) {
            // The same expert resubmitting identical text yields the same ids.
            std::string base = c.chunk_id;
            for (int n = 1; kb->index().contains(c.chunk_id); ++n) c.chunk_id = base + "~" + std::to_string(n);
        }
        store.add_chunks(chunks);
        r.status = RequestStatus::resolved;
        r.resolver_expert_id = expert_id;
        r.resolution_text = resolution_text;
        for (const auto& c : chunks) r.resolution_chunk_ids.push_back(c.chunk_id);
        if (tracker_.enabled()) r.pending_sync = !try_sync(r);
        save(r);
        return chunks;
    }

    /// Retry every request whose remote mirror is behind. Returns how many
    /// are still pending afterwards.
    std::size_t sync_pending() {
        std::lock_guard lock(mutex_);
        std::size_t still = 0;
        if (!tracker_.enabled()) return 0;
        for (auto r : list()) {
            if (!r.pending_sync) continue;
            r.pending_sync = !try_sync(r);
            if (r.pending_sync) ++still;
            save(r);
        }
        return still;
    }

    const std::string& dir() const noexcept { return dir_; }

private:
    std::filesystem::path path_for(const std::string& id) const {
        if (id.empty() || id.find('/') != std::string::npos || id.find("..") != std::string::npos)
            throw InvalidArgument("bad request id '" + id + "'");
        return std::filesystem::path(dir_) / (id + ".json");
    }

    void save(const ExpertRequest& r) const {
        auto p = path_for(r.request_id);
        auto tmp = p;
        tmp += ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            out << to_json(r).dump(2) << '\n';
        }
        std::filesystem::rename(tmp, p);
    }

    bool try_sync(ExpertRequest& r) const {
        try {
            if (!r.issue_number) r.issue_number = create_issue(tracker_, issue_title(r), issue_body(r));
            if (r.status == RequestStatus::resolved && !r.remote_closed) {
                close_issue(tracker_, *r.issue_number);
                r.remote_closed = true;
            }
            return true;
        } catch (const Error&) {
            return false;
        }
    }

    std::string dir_;
    IssueTrackerConfig tracker_;
    std::shared_ptr<IdGenerator> ids_;
    mutable std::mutex mutex_;
};

}  // namespace specrag
