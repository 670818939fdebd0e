#include <iostream>

#include <CLI11.hpp>

#include "specrag/cli.hpp"

namespace {

void add_model_options(CLI::App* cmd, specrag::cli::ModelOptions& m) {
    cmd->add_option("--embedder", m.embedder, "local_hashed[:DIM] or remote_http[:MODEL]")->capture_default_str();
    cmd->add_option("--k", m.k, "contexts per query")->capture_default_str();
    cmd->add_option("--llm-backend", m.llm_backend, "remote_http, mock_echo_context or mock_canned")
        ->capture_default_str();
    cmd->add_option("--llm-url", m.llm_url, "chat completions base URL (else LLM_BASE_URL)");
    cmd->add_option("--model", m.model, "model name sent to the backend")->capture_default_str();
    cmd->add_option("--temperature", m.temperature)->capture_default_str();
    cmd->add_option("--max-output-tokens", m.max_output_tokens)->capture_default_str();
    cmd->add_option("--canned-text", m.canned_text, "response for mock_canned");
    cmd->add_option("--prompt-variant", m.prompt_variant)->capture_default_str();
    cmd->add_option("--prompts", m.prompts_path, "prompt library JSON");
    cmd->add_option("--budget-words", m.budget_words)->capture_default_str();
    cmd->add_flag("--no-shots", m.no_shots, "leave few-shot examples out of the prompt");
}

void add_segment_options(CLI::App* cmd, specrag::cli::SegmentOptions& s) {
    cmd->add_option("--n-words", s.n_words, "maximum words per chunk body")->capture_default_str();
    cmd->add_option("--strategy", s.strategy, "section_aware or fixed_overlap")->capture_default_str();
    cmd->add_flag("--drop-code-lines", s.drop_code_lines);
}

void add_eval_options(CLI::App* cmd, specrag::cli::EvalOptions& e) {
    cmd->add_option("--benchmark", e.benchmark, "benchmark JSONL")->required();
    cmd->add_option("--corpus", e.corpus, "chunk corpus JSONL");
    cmd->add_option("--index", e.index, "index file matching --corpus");
    cmd->add_option("--input-dir", e.input_dir, "raw documents, segmented on the fly");
    cmd->add_flag("--corpus-bleu", e.corpus_bleu, "aggregate BLEU at corpus level");
    add_segment_options(cmd, e.seg);
    add_model_options(cmd, e.model);
}

}  // namespace

int main(int argc, char** argv) {
    namespace cli = specrag::cli;
    CLI::App app{"Retrieval-augmented question answering over technical specifications"};
    app.require_subcommand(1);

    cli::IngestOptions ingest;
    auto* c_ingest = app.add_subcommand("ingest", "extract and segment documents into a chunk corpus");
    c_ingest->add_option("--input-dir", ingest.input_dir)->required();
    c_ingest->add_option("--out", ingest.out)->required();
    add_segment_options(c_ingest, ingest.seg);

    cli::IndexOptions index;
    auto* c_index = app.add_subcommand("index", "embed a corpus and write the vector index");
    c_index->add_option("--corpus", index.corpus)->required();
    c_index->add_option("--embedder", index.embedder)->capture_default_str();
    c_index->add_option("--out", index.out)->required();

    cli::QueryOptions query;
    auto* c_query = app.add_subcommand("query", "answer one question");
    c_query->add_option("--index", query.index)->required();
    c_query->add_option("--corpus", query.corpus)->required();
    c_query->add_option("query", query.query)->required();
    c_query->add_flag("--json", query.json, "print the full answer record");
    add_model_options(c_query, query.model);

    cli::EvalOptions eval;
    auto* c_eval = app.add_subcommand("eval", "score the pipeline on a benchmark");
    c_eval->add_option("--report", eval.report, "metric report JSON");
    c_eval->add_option("--table", eval.table, "rendered table");
    c_eval->add_option("--label", eval.label)->capture_default_str();
    add_eval_options(c_eval, eval);

    cli::AblateOptions ablate;
    auto* c_ablate = app.add_subcommand("ablate", "sweep one configuration axis");
    c_ablate->add_option("--axis", ablate.axis, "k, prompt_variant, segmentation, model or embedder")->required();
    c_ablate->add_option("--values", ablate.values, "comma-separated values")->required();
    c_ablate->add_option("--out-dir", ablate.out_dir, "where reports and tables go");
    add_eval_options(c_ablate, ablate.eval);

    cli::ResolveOptions resolve;
    auto* c_resolve = app.add_subcommand("resolve", "attach an expert resolution to a request");
    c_resolve->add_option("--request", resolve.request_id)->required();
    c_resolve->add_option("--expert", resolve.expert_id)->required();
    c_resolve->add_option("--text-file", resolve.text_file)->required();
    c_resolve->add_option("--requests-dir", resolve.requests_dir)->capture_default_str();
    c_resolve->add_option("--experts", resolve.experts, "expert registry, one id per line")->required();
    c_resolve->add_option("--corpus", resolve.corpus)->required();
    c_resolve->add_option("--index", resolve.index)->required();
    c_resolve->add_option("--embedder", resolve.embedder)->capture_default_str();
    c_resolve->add_option("--n-words", resolve.seg.n_words)->capture_default_str();

    std::string config;
    auto* c_serve = app.add_subcommand("serve", "run the HTTP service");
    c_serve->add_option("--config", config, "service.toml")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*c_ingest) cli::ingest(ingest);
        else if (*c_index) cli::index(index);
        else if (*c_query) cli::query(query);
        else if (*c_eval) cli::eval(eval);
        else if (*c_ablate) cli::ablate(ablate);
        else if (*c_resolve) cli::resolve(resolve);
        else if (*c_serve) return cli::serve(config);
    } catch (const specrag::StageError& e) {
        std::cerr << "error in stage " << e.stage() << ": " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
