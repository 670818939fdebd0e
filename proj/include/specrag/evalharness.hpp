#pragma once

// Benchmark loading, end-to-end scoring runs and one-axis ablation sweeps.

#include <cstdio>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "specrag/corpus.hpp"
#include "specrag/error.hpp"
#include "specrag/metrics.hpp"
#include "specrag/pipeline.hpp"

namespace specrag {

struct BenchmarkItem {
    std::string item_id;
    std::string query;
    std::string reference_response;
    std::optional<std::string> source_spec;
};

/// JSON lines: {"item_id","query","reference_response","source_spec"?}.
inline std::vector<BenchmarkItem> load_benchmark(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open benchmark " + path);
    std::vector<BenchmarkItem> items;
    std::string line;
    std::uint64_t offset = 0;
    while (std::getline(in, line)) {
        if (!text::trim(line).empty()) {
            try {
                auto j = nlohmann::json::parse(line);
                BenchmarkItem it;
                it.item_id = j.at("item_id").get<std::string>();
                it.query = j.at("query").get<std::string>();
                it.reference_response = j.at("reference_response").get<std::string>();
                if (j.contains("source_spec") && !j["source_spec"].is_null())
                    it.source_spec = j["source_spec"].get<std::string>();
                if (text::trim(it.query).empty() || text::trim(it.reference_response).empty())
                    throw ParseError(path, offset, "item " + it.item_id + " has an empty query or reference");
                items.push_back(std::move(it));
            } catch (const nlohmann::json::exception& e) {
                throw ParseError(path, offset, e.what());
            }
        }
        offset += line.size() + 1;
    }
    return items;
}

inline void write_benchmark(const std::string& path, const std::vector<BenchmarkItem>& items) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    for (const auto& it : items) {
        nlohmann::ordered_json j;
        j["item_id"] = it.item_id;
        j["query"] = it.query;
        j["reference_response"] = it.reference_response;
        if (it.source_spec) j["source_spec"] = *it.source_spec;
        out << j.dump() << '\n';
    }
}

struct ItemScores {
    std::string item_id;
    double bleu = 0.0;
    double rouge1_f1 = 0.0;
    double rouge2_f1 = 0.0;
    double rougeL_f1 = 0.0;
    double bertscore_f1 = 0.0;
    double cosine_sim = 0.0;
    std::optional<std::string> error;
    std::string response;
};

struct MetricReport {
    std::vector<ItemScores> per_item;
    ItemScores aggregates;  // item_id "mean"
    nlohmann::ordered_json config_snapshot;
};

/// Column means of `rows`.
inline ItemScores mean_scores(const std::vector<ItemScores>& rows) {
    ItemScores m;
    m.item_id = "mean";
    if (rows.empty()) return m;
    for (const auto& r : rows) {
        m.bleu += r.bleu;
        m.rouge1_f1 += r.rouge1_f1;
        m.rouge2_f1 += r.rouge2_f1;
        m.rougeL_f1 += r.rougeL_f1;
        m.bertscore_f1 += r.bertscore_f1;
        m.cosine_sim += r.cosine_sim;
    }
    double n = static_cast<double>(rows.size());
    m.bleu /= n;
    m.rouge1_f1 /= n;
    m.rouge2_f1 /= n;
    m.rougeL_f1 /= n;
    m.bertscore_f1 /= n;
    m.cosine_sim /= n;
    return m;
}

inline nlohmann::ordered_json scores_json(const ItemScores& s, bool with_response) {
    nlohmann::ordered_json j;
    j["item_id"] = s.item_id;
    j["bleu"] = s.bleu;
    j["rouge1_f1"] = s.rouge1_f1;
    j["rouge2_f1"] = s.rouge2_f1;
    j["rougeL_f1"] = s.rougeL_f1;
    j["bertscore_f1"] = s.bertscore_f1;
    j["cosine_sim"] = s.cosine_sim;
    if (with_response) {
        j["error"] = s.error ? nlohmann::ordered_json(*s.error) : nullptr;
        j["response"] = s.response;
    }
    return j;
}

inline nlohmann::ordered_json to_json(const MetricReport& r) {
    nlohmann::ordered_json j;
    j["per_item"] = nlohmann::ordered_json::array();
    for (const auto& s : r.per_item) j["per_item"].push_back(scores_json(s, true));
    j["aggregates"] = scores_json(r.aggregates, false);
    j["config_snapshot"] = r.config_snapshot;
    return j;
}

inline std::string report_json_string(const MetricReport& r) { return to_json(r).dump(2) + "\n"; }

// ---- run configuration -----------------------------------------------------

struct EvalSetup {
    PipelineConfig pipeline;
    SegmenterConfig segmenter;
    CleanupRules cleanup;
    std::vector<RawDocument> documents;       // needed whenever chunks must be rebuilt
    std::shared_ptr<const KnowledgeBase> kb;  // built from documents when null
    EmbedderConfig metric_embedder;           // response cosine and BERTScore tokens
    bool corpus_level_bleu = false;
};

inline std::vector<Chunk> segment_documents(const std::vector<RawDocument>& docs, const SegmenterConfig& seg,
                                            const CleanupRules& rules = {}) {
    std::vector<Chunk> chunks;
    for (const auto& d : docs)
        for (auto& c : segment(preprocess(d, rules), seg)) chunks.push_back(std::move(c));
    return chunks;
}

inline std::shared_ptr<const KnowledgeBase> ensure_kb(EvalSetup& setup, const http::Sleeper& sleep) {
    if (!setup.kb) {
        if (setup.documents.empty()) throw InvalidArgument("no knowledge base and no documents to build one");
        setup.kb = build_knowledge_base(segment_documents(setup.documents, setup.segmenter, setup.cleanup),
                                        setup.pipeline.embedder, sleep);
    }
    return setup.kb;
}

inline metrics::TokenEmbedder token_embedder_for(const EmbedderConfig& cfg) {
    if (cfg.backend == EmbedderBackend::local_hashed) return metrics::local_token_embedder(cfg.dim);
    return [cfg](const metrics::Tokens& toks) { return embed_batch(toks, cfg); };
}

inline nlohmann::ordered_json config_snapshot(const EvalSetup& s) {
    const auto& p = s.pipeline;
    nlohmann::ordered_json j;
    j["segmenter"] = {{"strategy", to_string(s.segmenter.strategy)},
                      {"n_words", s.segmenter.n_words},
                      {"fixed_chunk_words", s.segmenter.fixed_chunk_words},
                      {"fixed_overlap_words", s.segmenter.fixed_overlap_words}};
    const auto& emb = s.kb ? s.kb->embedder() : p.embedder;
    j["embedder"] = {{"backend", to_string(emb.backend)},
                     {"dim", emb.dim},
                     {"model_name", emb.model_name.value_or("")},
                     {"normalize", emb.normalize}};
    j["retriever"] = {{"k", p.retriever.k}, {"metric", "cosine"}, {"search", "flat_exact"}};
    j["prompt"] = {{"variant", p.prompt_variant},
                   {"budget_words", p.prompt.budget_words},
                   {"history_turns", p.prompt.history_turns},
                   {"few_shot_examples", p.use_shots ? p.prompts.shots.size() : 0}};
    j["llm"] = {{"backend", to_string(p.llm.backend)},
                {"model_name", p.llm.model_name},
                {"temperature", p.llm.temperature},
                {"max_output_tokens", p.llm.max_output_tokens}};
    j["metrics"] = {{"tokenizer", "lowercase, split on non-alphanumeric"},
                    {"bleu", s.corpus_level_bleu ? "corpus-level" : "mean of sentence-level"},
                    {"bleu_max_n", 4},
                    {"bleu_smoothing", "add-epsilon 1e-9 on zero-match orders; orders longer than the candidate skipped"},
                    {"rouge", "raw tokens, no stemming, no stopword removal"},
                    {"bertscore", "greedy matching, no baseline rescaling"},
                    {"metric_embedder", {{"backend", to_string(s.metric_embedder.backend)}, {"dim", s.metric_embedder.dim}}}};
    j["corpus_chunks"] = s.kb ? s.kb->chunks().size() : 0;
    return j;
}

inline ItemScores score_response(const std::string& item_id, const std::string& candidate,
                                 const std::string& reference, const metrics::TokenEmbedder& tok_embed,
                                 const EmbedderConfig& metric_embedder) {
    ItemScores s;
    s.item_id = item_id;
    s.response = candidate;
    s.bleu = metrics::bleu(candidate, reference);
    s.rouge1_f1 = metrics::rouge_n(candidate, reference, 1).f1;
    s.rouge2_f1 = metrics::rouge_n(candidate, reference, 2).f1;
    s.rougeL_f1 = metrics::rouge_l(candidate, reference).f1;
    s.bertscore_f1 = metrics::bertscore_f1(candidate, reference, tok_embed);
    try {
        s.cosine_sim = metrics::response_cosine(candidate, reference, metric_embedder);
    } catch (const InvalidArgument&) {
        s.cosine_sim = 0.0;
    }
    return s;
}

/// One fresh session per item; a failing item is scored 0 with its error
/// recorded and the run continues.
inline MetricReport run_benchmark(const std::vector<BenchmarkItem>& dataset, EvalSetup setup,
                                  const http::Sleeper& sleep = http::real_sleep) {
    if (dataset.empty()) throw InvalidArgument("empty benchmark");
    auto kb = ensure_kb(setup, sleep);
    auto tok_embed = token_embedder_for(setup.metric_embedder);

    MetricReport report;
    std::vector<std::pair<std::string, std::string>> pairs;
    for (const auto& item : dataset) {
        Session session;
        session.session_id = "bench-" + item.item_id;
        try {
            auto rec = answer(item.query, session, *kb, setup.pipeline, sleep);
            report.per_item.push_back(
                score_response(item.item_id, rec.response_text, item.reference_response, tok_embed, setup.metric_embedder));
            pairs.emplace_back(rec.response_text, item.reference_response);
        } catch (const Error& e) {
            ItemScores s;
            s.item_id = item.item_id;
            s.error = e.what();
            report.per_item.push_back(std::move(s));
            pairs.emplace_back("", item.reference_response);
        }
    }
    report.aggregates = mean_scores(report.per_item);
    if (setup.corpus_level_bleu) report.aggregates.bleu = metrics::corpus_bleu(pairs);
    report.config_snapshot = config_snapshot(setup);
    return report;
}

inline std::string fmt3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

/// Plain-text metric table, one row per labelled report.
inline std::string render_table(const std::vector<std::pair<std::string, const MetricReport*>>& rows,
                                const std::string& first_column = "Approach") {
    std::size_t w = first_column.size();
    for (const auto& [label, _] : rows) w = std::max(w, label.size());
    std::ostringstream os;
    auto pad = [&](const std::string& s) { return s + std::string(w - s.size(), ' '); };
    os << pad(first_column) << " | BLEU  | ROUGE-1 | ROUGE-2 | ROUGE-L | BERTScore | Cosine Sim.\n";
    os << std::string(w, '-') << "-|-------|---------|---------|---------|-----------|------------\n";
    for (const auto& [label, r] : rows) {
        const auto& a = r->aggregates;
        os << pad(label) << " | " << fmt3(a.bleu) << " | " << fmt3(a.rouge1_f1) << "   | " << fmt3(a.rouge2_f1)
           << "   | " << fmt3(a.rougeL_f1) << "   | " << fmt3(a.bertscore_f1) << "     | " << fmt3(a.cosine_sim)
           << "\n";
    }
    return os.str();
}

// ---- ablations --------------------------------------------------------------

enum class AblationAxis { k, prompt_variant, segmentation, model, embedder };

inline AblationAxis parse_axis(std::string_view s) {
    if (s == "k") return AblationAxis::k;
    if (s == "prompt_variant" || s == "prompt") return AblationAxis::prompt_variant;
    if (s == "segmentation") return AblationAxis::segmentation;
    if (s == "model") return AblationAxis::model;
    if (s == "embedder") return AblationAxis::embedder;
    throw InvalidArgument("unknown ablation axis '" + std::string(s) + "'");
}

inline std::string to_string(AblationAxis a) {
    switch (a) {
        case AblationAxis::k: return "k";
        case AblationAxis::prompt_variant: return "prompt_variant";
        case AblationAxis::segmentation: return "segmentation";
        case AblationAxis::model: return "model";
        case AblationAxis::embedder: return "embedder";
    }
    return "k";
}

struct AblationRun {
    std::string value;
    MetricReport report;
};

/// "local_hashed", "local_hashed:DIM" or "remote_http:MODEL".
inline EmbedderConfig parse_embedder_value(const std::string& value, EmbedderConfig base) {
    auto colon = value.find(':');
    std::string kind = value.substr(0, colon);
    std::string arg = colon == std::string::npos ? std::string() : value.substr(colon + 1);
    base.backend = parse_embedder_backend(kind);
    if (base.backend == EmbedderBackend::local_hashed) {
        if (!arg.empty()) {
            std::size_t used = 0;
            unsigned long dim = 0;
            try {
                dim = std::stoul(arg, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != arg.size() || dim == 0) throw InvalidArgument("bad embedder dim in '" + value + "'");
            base.dim = dim;
        }
    } else {
        if (!arg.empty()) base.model_name = arg;
    }
    base.validate();
    return base;
}

inline std::size_t parse_k_value(const std::string& value) {
    std::size_t used = 0;
    long long k = 0;
    try {
        k = std::stoll(value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != value.size() || k < 1) throw InvalidArgument("k must be a positive integer, got '" + value + "'");
    return static_cast<std::size_t>(k);
}

/// One run_benchmark per value with only `axis` changed. Every value is
/// validated before the first run starts.
inline std::vector<AblationRun> run_ablation(AblationAxis axis, const std::vector<std::string>& values,
                                             const std::vector<BenchmarkItem>& dataset, EvalSetup setup,
                                             const http::Sleeper& sleep = http::real_sleep) {
    if (values.empty()) throw InvalidArgument("ablation needs at least one value");
    if (dataset.empty()) throw InvalidArgument("empty benchmark");

    std::vector<EvalSetup> variants;
    for (const auto& v : values) {
        EvalSetup s = setup;
        switch (axis) {
            case AblationAxis::k: {
                s.pipeline.retriever.k = parse_k_value(v);
                auto kb = ensure_kb(setup, sleep);
                s.kb = kb;
                if (s.pipeline.retriever.k > kb->index().size())
                    throw InvalidArgument("k=" + v + " exceeds index size " + std::to_string(kb->index().size()));
                break;
            }
            case AblationAxis::prompt_variant:
                s.pipeline.prompts.get(v);
                s.pipeline.prompt_variant = v;
                break;
            case AblationAxis::segmentation:
                if (setup.documents.empty())
                    throw InvalidArgument("segmentation ablation needs the source documents");
                s.segmenter.strategy = parse_strategy(v);
                s.segmenter.validate();
                s.kb.reset();
                break;
            case AblationAxis::model:
                if (text::trim(v).empty()) throw InvalidArgument("empty model name");
                s.pipeline.llm.model_name = v;
                break;
            case AblationAxis::embedder:
                s.pipeline.embedder = parse_embedder_value(v, setup.pipeline.embedder);
                if (setup.documents.empty() && !setup.kb)
                    throw InvalidArgument("embedder ablation needs documents or a corpus");
                if (setup.documents.empty()) {
                    // Re-embed the existing chunks with the new embedder.
                    s.documents.clear();
                    s.kb = build_knowledge_base(setup.kb->chunks(), s.pipeline.embedder, sleep);
                } else {
                    s.kb.reset();
                }
                break;
        }
        variants.push_back(std::move(s));
    }

    std::vector<AblationRun> runs;
    for (std::size_t i = 0; i < values.size(); ++i) runs.push_back({values[i], run_benchmark(dataset, variants[i], sleep)});
    return runs;
}

inline std::string render_ablation_table(AblationAxis axis, const std::vector<AblationRun>& runs) {
    std::vector<std::pair<std::string, const MetricReport*>> rows;
    for (const auto& r : runs) rows.emplace_back(r.value, &r.report);
    return render_table(rows, to_string(axis));
}

inline nlohmann::ordered_json to_json(AblationAxis axis, const std::vector<AblationRun>& runs) {
    nlohmann::ordered_json j;
    j["axis"] = to_string(axis);
    j["runs"] = nlohmann::ordered_json::array();
    for (const auto& r : runs) j["runs"].push_back({{"value", r.value}, {"report", to_json(r.report)}});
    return j;
}

}  // namespace specrag
