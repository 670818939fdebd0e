#pragma once

// Command implementations behind the specrag tool. Each takes a plain options
// struct and writes its artifacts; argument parsing lives in tools/.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "specrag/corpus.hpp"
#include "specrag/evalharness.hpp"
#include "specrag/extract.hpp"
#include "specrag/feedback.hpp"
#include "specrag/pipeline.hpp"
#include "specrag/service.hpp"

namespace specrag::cli {

inline void ensure_parent(const std::string& path) {
    auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
}

inline void write_text(const std::string& path, const std::string& content) {
    ensure_parent(path);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path);
    out << content;
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            out.push_back(std::string(text::trim(cur)));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(std::string(text::trim(cur)));
    return out;
}

// ---- shared option groups ---------------------------------------------------

struct ModelOptions {
    std::string embedder = "local_hashed";
    std::string llm_backend = "mock_echo_context";
    std::string llm_url;
    std::string model = "gpt-4";
    double temperature = 0.0;
    int max_output_tokens = 1000;
    std::string canned_text;
    std::string prompt_variant = std::string(kDefaultVariant);
    std::string prompts_path;
    bool no_shots = false;
    std::size_t budget_words = 3000;
    std::size_t k = 3;

    PipelineConfig pipeline() const {
        PipelineConfig p;
        p.embedder = parse_embedder_value(embedder, EmbedderConfig{}.apply_env());
        p.retriever.k = k;
        p.prompt.budget_words = budget_words;
        if (!prompts_path.empty()) p.prompts = PromptLibrary::load(prompts_path);
        p.prompt_variant = prompt_variant;
        p.prompts.get(prompt_variant);
        p.use_shots = !no_shots;
        p.llm.backend = parse_llm_backend(llm_backend);
        if (!llm_url.empty()) p.llm.endpoint_url = llm_url;
        p.llm.model_name = model;
        p.llm.temperature = temperature;
        p.llm.max_output_tokens = max_output_tokens;
        p.llm.canned_text = canned_text;
        p.llm.apply_env();
        p.llm.validate();
        return p;
    }
};

struct SegmentOptions {
    std::size_t n_words = 360;
    std::string strategy = "section_aware";
    bool drop_code_lines = false;

    SegmenterConfig segmenter() const {
        SegmenterConfig s;
        s.n_words = n_words;
        s.strategy = parse_strategy(strategy);
        s.validate();
        return s;
    }

    CleanupRules cleanup() const {
        CleanupRules r;
        r.drop_code_lines = drop_code_lines;
        return r;
    }
};

// ---- ingest -------------------------------------------------------------------

struct IngestOptions {
    std::string input_dir;
    std::string out;
    SegmentOptions seg;
};

/// Extract every document under input_dir and write the chunk corpus.
inline std::size_t ingest(const IngestOptions& o, std::ostream& log = std::cerr) {
    auto docs = extract_directory(o.input_dir);
    if (docs.empty()) throw InvalidArgument("no documents under " + o.input_dir);
    auto chunks = segment_documents(docs, o.seg.segmenter(), o.seg.cleanup());
    ensure_parent(o.out);
    write_corpus(o.out, chunks);
    log << "ingested " << docs.size() << " documents into " << chunks.size() << " chunks -> " << o.out << "\n";
    return chunks.size();
}

// ---- index --------------------------------------------------------------------

struct IndexOptions {
    std::string corpus;
    std::string embedder = "local_hashed";
    std::string out;
};

inline std::size_t index(const IndexOptions& o, std::ostream& log = std::cerr) {
    auto cfg = parse_embedder_value(o.embedder, EmbedderConfig{}.apply_env());
    auto chunks = read_corpus(o.corpus);
    auto idx = embed_and_index(chunks, cfg);
    ensure_parent(o.out);
    idx.save(o.out);
    log << "indexed " << idx.size() << " chunks (dim " << idx.dim() << ") -> " << o.out << "\n";
    return idx.size();
}

// ---- query --------------------------------------------------------------------

struct QueryOptions {
    std::string index;
    std::string corpus;
    std::string query;
    ModelOptions model;
    bool json = false;
};

inline AnswerRecord query(const QueryOptions& o, std::ostream& out = std::cout) {
    auto p = o.model.pipeline();
    auto kb = load_knowledge_base(o.corpus, o.index, p.embedder);
    Session session;
    auto rec = answer(o.query, session, *kb, p);
    if (o.json) {
        out << to_json(rec).dump(2) << "\n";
    } else {
        out << rec.response_text << "\n\n";
        for (std::size_t i = 0; i < rec.citations.size(); ++i)
            out << "[" << i + 1 << "] " << rec.citations[i] << " (" << fmt3(rec.scores[i]) << ")\n";
    }
    return rec;
}

// ---- eval / ablate ------------------------------------------------------------

struct EvalOptions {
    std::string benchmark;
    std::string index;
    std::string corpus;
    std::string input_dir;  // alternative to corpus + index
    std::string report;
    std::string table;
    std::string label = "specrag";
    bool corpus_bleu = false;
    SegmentOptions seg;
    ModelOptions model;
};

inline EvalSetup make_setup(const EvalOptions& o) {
    EvalSetup s;
    s.pipeline = o.model.pipeline();
    s.segmenter = o.seg.segmenter();
    s.cleanup = o.seg.cleanup();
    s.corpus_level_bleu = o.corpus_bleu;
    if (!o.input_dir.empty()) s.documents = extract_directory(o.input_dir);
    if (!o.corpus.empty() && !o.index.empty()) {
        s.kb = load_knowledge_base(o.corpus, o.index, s.pipeline.embedder);
    } else if (!o.corpus.empty()) {
        s.kb = build_knowledge_base(read_corpus(o.corpus), s.pipeline.embedder);
    } else if (s.documents.empty()) {
        throw InvalidArgument("need --corpus (and optionally --index) or --input-dir");
    }
    return s;
}

inline MetricReport eval(const EvalOptions& o, std::ostream& out = std::cout) {
    auto items = load_benchmark(o.benchmark);
    auto report = run_benchmark(items, make_setup(o));
    if (!o.report.empty()) write_text(o.report, report_json_string(report));
    auto table = render_table({{o.label, &report}});
    if (!o.table.empty()) write_text(o.table, table);
    out << table;
    return report;
}

struct AblateOptions {
    EvalOptions eval;
    std::string axis;
    std::string values;
    std::string out_dir;
};

/// Writes one report per value as {out_dir}/{axis}_{value}.json plus
/// ablation_{axis}.txt and ablation_{axis}.json.
inline std::vector<AblationRun> ablate(const AblateOptions& o, std::ostream& out = std::cout) {
    auto axis = parse_axis(o.axis);
    auto values = split_list(o.values);
    auto items = load_benchmark(o.eval.benchmark);
    auto runs = run_ablation(axis, values, items, make_setup(o.eval));
    auto table = render_ablation_table(axis, runs);
    if (!o.out_dir.empty()) {
        std::filesystem::create_directories(o.out_dir);
        for (const auto& r : runs) {
            std::string safe = r.value;
            for (char& c : safe)
                if (c == '/' || c == ':' || c == ' ') c = '_';
            write_text((std::filesystem::path(o.out_dir) / (to_string(axis) + "_" + safe + ".json")).string(),
                       report_json_string(r.report));
        }
        write_text((std::filesystem::path(o.out_dir) / ("ablation_" + to_string(axis) + ".txt")).string(), table);
        write_text((std::filesystem::path(o.out_dir) / ("ablation_" + to_string(axis) + ".json")).string(),
                   to_json(axis, runs).dump(2) + "\n");
    }
    out << table;
    return runs;
}

// ---- resolve ------------------------------------------------------------------

struct ResolveOptions {
    std::string request_id;
    std::string expert_id;
    std::string text_file;
    std::string requests_dir = "state/expert_requests";
    std::string experts;
    std::string corpus;
    std::string index;
    std::string embedder = "local_hashed";
    SegmentOptions seg;
};

inline std::vector<Chunk> resolve(const ResolveOptions& o, std::ostream& out = std::cout) {
    auto registry = ExpertRegistry::load(o.experts);
    auto cfg = parse_embedder_value(o.embedder, EmbedderConfig{}.apply_env());
    KnowledgeStore store(load_knowledge_base(o.corpus, o.index, cfg), {o.corpus, o.index});
    ExpertRequestQueue queue(o.requests_dir, IssueTrackerConfig::from_env());
    auto bytes = read_file_bytes(o.text_file);
    std::string resolution(bytes.begin(), bytes.end());
    auto chunks = queue.resolve(o.request_id, o.expert_id, resolution, registry, store, o.seg.segmenter());
    for (const auto& c : chunks) out << c.chunk_id << "\n";
    return chunks;
}

// ---- serve --------------------------------------------------------------------

inline Service* g_service = nullptr;

inline int serve(const std::string& config_path, std::ostream& log = std::cerr) {
    auto cfg = load_service_config(config_path);
    cfg.validate();
    Service service(cfg);
    g_service = &service;
    std::signal(SIGINT, [](int) {
        if (g_service) g_service->server().stop();
    });
    std::signal(SIGTERM, [](int) {
        if (g_service) g_service->server().stop();
    });
    if (!service.server().bind_to_port(cfg.bind_address, cfg.port))
        throw Error("cannot bind " + cfg.bind_address + ":" + std::to_string(cfg.port));
    std::thread loader([&] {
        try {
            service.load();
            log << "ready: serving on " << cfg.bind_address << ":" << cfg.port << "\n";
        } catch (const std::exception& e) {
            log << "load failed: " << e.what() << "\n";
            service.server().stop();
        }
    });
    service.server().listen_after_bind();
    loader.join();
    g_service = nullptr;
    return service.ready() ? 0 : 1;
}

}  // namespace specrag::cli
