#pragma once

// Query path: embed -> retrieve -> assemble -> complete, plus the session and
// knowledge-base state it runs against.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "specrag/corpus.hpp"
#include "specrag/embedder.hpp"
#include "specrag/error.hpp"
#include "specrag/llm_client.hpp"
#include "specrag/prompting.hpp"
#include "specrag/vector_index.hpp"

namespace specrag {

// ---- knowledge base -------------------------------------------------------

/// Chunks plus their index; immutable once built.
class KnowledgeBase {
public:
    KnowledgeBase(std::vector<Chunk> chunks, VectorIndex index, EmbedderConfig embedder)
        : chunks_(std::move(chunks)), index_(std::move(index)), embedder_(std::move(embedder)) {
        for (std::size_t i = 0; i < chunks_.size(); ++i) {
            if (!by_id_.emplace(chunks_[i].chunk_id, i).second)
                throw InvalidArgument("duplicate chunk_id '" + chunks_[i].chunk_id + "'");
        }
        for (const auto& id : index_.ids())
            if (!by_id_.count(id)) throw InvalidArgument("index entry '" + id + "' not in corpus");
    }

    const std::vector<Chunk>& chunks() const noexcept { return chunks_; }
    const VectorIndex& index() const noexcept { return index_; }
    const EmbedderConfig& embedder() const noexcept { return embedder_; }

    const Chunk& chunk(const std::string& id) const {
        auto it = by_id_.find(id);
        if (it == by_id_.end()) throw NotFound("unknown chunk_id '" + id + "'");
        return chunks_[it->second];
    }

private:
    std::vector<Chunk> chunks_;
    VectorIndex index_;
    EmbedderConfig embedder_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

inline VectorIndex embed_and_index(const std::vector<Chunk>& chunks, const EmbedderConfig& cfg,
                                   const http::Sleeper& sleep = http::real_sleep) {
    std::vector<IndexEntry> entries;
    if (!chunks.empty()) {
        std::vector<std::string> texts;
        texts.reserve(chunks.size());
        for (const auto& c : chunks) texts.push_back(c.text);
        auto vectors = embed_batch(texts, cfg, sleep);
        entries.reserve(chunks.size());
        for (std::size_t i = 0; i < chunks.size(); ++i) entries.push_back({chunks[i].chunk_id, std::move(vectors[i])});
    }
    return build_index(std::move(entries), cfg.dim);
}

inline std::shared_ptr<const KnowledgeBase> build_knowledge_base(std::vector<Chunk> chunks,
                                                                 const EmbedderConfig& cfg,
                                                                 const http::Sleeper& sleep = http::real_sleep) {
    auto index = embed_and_index(chunks, cfg, sleep);
    return std::make_shared<const KnowledgeBase>(std::move(chunks), std::move(index), cfg);
}

/// Holds the current knowledge base and swaps in rebuilt ones atomically.
/// Readers keep whatever snapshot they took; writers are serialized.
class KnowledgeStore {
public:
    struct Paths {
        std::string corpus;  // appended on additions when non-empty
        std::string index;   // rewritten after each rebuild when non-empty
    };

    explicit KnowledgeStore(std::shared_ptr<const KnowledgeBase> kb, Paths paths = {})
        : current_(std::move(kb)), paths_(std::move(paths)) {}

    std::shared_ptr<const KnowledgeBase> snapshot() const {
        std::lock_guard lock(swap_mutex_);
        return current_;
    }

    /// Embed `added`, rebuild the index over old + new chunks, persist, swap.
    std::shared_ptr<const KnowledgeBase> add_chunks(const std::vector<Chunk>& added,
                                                    const http::Sleeper& sleep = http::real_sleep) {
        std::lock_guard writer(write_mutex_);
        auto base = snapshot();
        std::vector<IndexEntry> entries;
        for (std::size_t i = 0; i < base->index().size(); ++i)
            entries.push_back({base->index().ids()[i], base->index().vector_at(i)});
        if (!added.empty()) {
            std::vector<std::string> texts;
            for (const auto& c : added) texts.push_back(c.text);
            auto vectors = embed_batch(texts, base->embedder(), sleep);
            for (std::size_t i = 0; i < added.size(); ++i) entries.push_back({added[i].chunk_id, std::move(vectors[i])});
        }
        auto chunks = base->chunks();
        chunks.insert(chunks.end(), added.begin(), added.end());
        auto next = std::make_shared<const KnowledgeBase>(
            std::move(chunks), build_index(std::move(entries), base->embedder().dim), base->embedder());
        if (!paths_.corpus.empty()) append_corpus(paths_.corpus, added);
        if (!paths_.index.empty()) {
            auto tmp = paths_.index + ".tmp";
            next->index().save(tmp);
            std::filesystem::rename(tmp, paths_.index);
        }
        {
            std::lock_guard lock(swap_mutex_);
            current_ = next;
        }
        return next;
    }

private:
    mutable std::mutex swap_mutex_;
    std::mutex write_mutex_;
    std::shared_ptr<const KnowledgeBase> current_;
    Paths paths_;
};

// ---- sessions -------------------------------------------------------------

/// RFC 4122 version-4 identifiers from a seedable engine.
class IdGenerator {
public:
    IdGenerator() : engine_(std::random_device{}()) {}
    explicit IdGenerator(std::uint64_t seed) : engine_(seed) {}

    std::string next() {
        std::lock_guard lock(mutex_);
        std::uint64_t hi = engine_(), lo = engine_();
        hi = (hi & 0xFFFFFFFFFFFF0FFFULL) | 0x0000000000004000ULL;
        lo = (lo & 0x3FFFFFFFFFFFFFFFULL) | 0x8000000000000000ULL;
        auto h = text::hex64(hi) + text::hex64(lo);
        return h.substr(0, 8) + "-" + h.substr(8, 4) + "-" + h.substr(12, 4) + "-" + h.substr(16, 4) + "-" +
               h.substr(20, 12);
    }

private:
    std::mutex mutex_;
    std::mt19937_64 engine_;
};

inline std::string utc_timestamp() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct SessionTurn {
    std::string query;
    std::string response;
    std::vector<std::string> context_ids;
    std::string timestamp;
};

struct Session {
    std::string session_id;
    std::vector<SessionTurn> turns;

    std::vector<HistoryTurn> history(std::size_t last_n) const {
        std::vector<HistoryTurn> h;
        std::size_t start = turns.size() > last_n ? turns.size() - last_n : 0;
        for (std::size_t i = start; i < turns.size(); ++i) h.push_back({turns[i].query, turns[i].response});
        return h;
    }
};

struct AnswerRecord {
    std::string query;
    std::string response_text;
    std::vector<std::string> citations;
    std::vector<std::string> context_ids;
    std::vector<double> scores;
    std::size_t prompt_words = 0;
    std::string model_name;
};

inline nlohmann::json to_json(const AnswerRecord& r) {
    return {{"query", r.query},
            {"response_text", r.response_text},
            {"citations", r.citations},
            {"context_ids", r.context_ids},
            {"scores", r.scores},
            {"prompt_words", r.prompt_words},
            {"model_name", r.model_name}};
}

/// In-memory sessions, each behind its own mutex so one session runs one
/// query at a time. With a persistence directory, each turn is appended to
/// `{dir}/{session_id}.jsonl`.
class SessionStore {
public:
    struct Slot {
        std::mutex mutex;
        Session session;
        std::vector<AnswerRecord> records;  // parallel to session.turns
    };

    explicit SessionStore(std::shared_ptr<IdGenerator> ids = std::make_shared<IdGenerator>(),
                          std::string persist_dir = {})
        : ids_(std::move(ids)), persist_dir_(std::move(persist_dir)) {
        if (!persist_dir_.empty()) std::filesystem::create_directories(persist_dir_);
    }

    std::string create() {
        auto slot = std::make_shared<Slot>();
        std::lock_guard lock(mutex_);
        std::string id;
        do {
            id = ids_->next();
        } while (slots_.count(id));
        slot->session.session_id = id;
        slots_[id] = slot;
        return id;
    }

    std::shared_ptr<Slot> find(const std::string& id) const {
        std::lock_guard lock(mutex_);
        auto it = slots_.find(id);
        return it == slots_.end() ? nullptr : it->second;
    }

    std::shared_ptr<Slot> get(const std::string& id) const {
        auto s = find(id);
        if (!s) throw NotFound("unknown session '" + id + "'");
        return s;
    }

    /// Caller holds slot.mutex.
    void persist_turn(const Slot& slot) const {
        if (persist_dir_.empty() || slot.session.turns.empty()) return;
        const auto& t = slot.session.turns.back();
        nlohmann::json j{{"query", t.query},
                         {"response", t.response},
                         {"context_ids", t.context_ids},
                         {"timestamp", t.timestamp}};
        std::ofstream out(std::filesystem::path(persist_dir_) / (slot.session.session_id + ".jsonl"),
                          std::ios::app | std::ios::binary);
        out << j.dump() << '\n';
    }

    std::size_t size() const {
        std::lock_guard lock(mutex_);
        return slots_.size();
    }

private:
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Slot>> slots_;
    std::shared_ptr<IdGenerator> ids_;
    std::string persist_dir_;
};

// ---- answer ---------------------------------------------------------------

struct PipelineConfig {
    EmbedderConfig embedder;
    RetrieverConfig retriever;
    PromptConfig prompt;
    std::string prompt_variant = std::string(kDefaultVariant);
    PromptLibrary prompts;
    bool use_shots = true;
    LlmConfig llm;
};

namespace detail {

template <typename F>
auto run_stage(const char* stage, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const TransportError& e) {
        throw StageError(stage, e.what(), true);
    } catch (const ProtocolError& e) {
        throw StageError(stage, e.what(), true);
    } catch (const Error& e) {
        throw StageError(stage, e.what(), false);
    }
}

}  // namespace detail

/// Answer one query in `session` and append the turn. Citations are the
/// source fields of the retrieved chunks, in score order.
inline AnswerRecord answer(const std::string& query, Session& session, const KnowledgeBase& kb,
                           const PipelineConfig& cfg, const http::Sleeper& sleep = http::real_sleep,
                           AssembledPrompt* prompt_out = nullptr) {
    if (text::trim(query).empty()) throw InvalidArgument("empty query");

    auto qvec = detail::run_stage("embed", [&] { return embed_query(query, kb.embedder(), sleep); });
    auto hits = detail::run_stage("retrieve", [&] { return search_top_k(kb.index(), qvec, cfg.retriever); });

    std::vector<Chunk> contexts;
    for (const auto& h : hits) contexts.push_back(kb.chunk(h.chunk_id));
    static const std::vector<FewShotExample> kNoShots;
    auto prompt = detail::run_stage("assemble", [&] {
        return assemble(query, contexts, session.history(cfg.prompt.history_turns), cfg.prompts.get(cfg.prompt_variant),
                        cfg.use_shots ? cfg.prompts.shots : kNoShots, cfg.prompt.budget_words);
    });
    auto completion = detail::run_stage("complete", [&] { return complete(prompt, cfg.llm, sleep); });

    AnswerRecord rec;
    rec.query = query;
    rec.response_text = completion.text;
    for (const auto& h : hits) {
        rec.context_ids.push_back(h.chunk_id);
        rec.citations.push_back(kb.chunk(h.chunk_id).source);
        rec.scores.push_back(h.score);
    }
    rec.prompt_words = prompt.estimated_words;
    rec.model_name = cfg.llm.model_name;
    if (prompt_out) *prompt_out = prompt;

    session.turns.push_back({query, completion.text, rec.context_ids, utc_timestamp()});
    return rec;
}

}  // namespace specrag
