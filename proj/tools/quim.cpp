// quim: command-line front end for the question-matching RAG pipeline.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "quim/corpus.hpp"
#include "quim/error.hpp"
#include "quim/evaluation.hpp"
#include "quim/generation.hpp"
#include "quim/http_providers.hpp"
#include "quim/ingest.hpp"
#include "quim/jsonl.hpp"
#include "quim/qindex.hpp"
#include "quim/question_gen.hpp"
#include "quim/retrieval.hpp"
#include "quim/service.hpp"

namespace fs = std::filesystem;
using namespace quim;

namespace {

void print_json(const nlohmann::json& j) { std::cout << j.dump(2) << "\n"; }

void write_json_file(const std::string& path, const nlohmann::json& j) {
    write_file_atomic(path, j.dump(2) + "\n");
}

RagPrompt rag_prompt(const std::string& path, const std::string& refusal) {
    const RagPrompt builtin = RagPrompt::default_prompt();
    const std::string r = refusal.empty() ? builtin.refusal_text : refusal;
    return path.empty() ? RagPrompt{builtin.template_text, r} : RagPrompt::from_file(path, r);
}

struct IndexArgs {
    std::string index_path;
    std::string corpus_path;  // override for the chunks file recorded in the index
};

struct Loaded {
    std::shared_ptr<const Snapshot> snap;
};

Loaded load_for_query(const IndexArgs& a) {
    return {load_snapshot(a.index_path, a.corpus_path,
                          [](const IndexHeader& h) { return embedder_for_index(h.embedder_id, h.dim); })};
}

int run_ingest(const std::string& input, const std::string& out, int min_chars, std::size_t max_pages, int delay_ms,
               bool no_follow) {
    std::vector<RawPage> pages;
    if (fs::is_directory(input)) {
        pages = load_html_dir(input);
    } else {
        CrawlOptions opts;
        opts.max_pages = max_pages;
        opts.delay = std::chrono::milliseconds(delay_ms);
        opts.follow_links = !no_follow;
        std::vector<std::string> failed;
        pages = crawl(read_url_list(input), HttpFetcher{}, opts, &failed);
        for (const auto& f : failed) spdlog::warn("fetch failed: {}", f);
    }
    std::vector<Document> docs;
    for (const auto& p : pages) {
        try {
            docs.push_back(clean_html(p));
        } catch (const Error& e) {
            spdlog::warn("skipping page: {}", e.what());
        }
    }
    ChunkingConfig cfg;
    cfg.min_doc_chars = min_chars;
    const auto kept = filter_documents(docs, cfg);
    const auto m = write_corpus(kept, {}, out);
    spdlog::info("{} pages, {} documents kept -> {}", pages.size(), m.documents, out);
    return 0;
}

int run_chunk(const std::string& corpus, const std::string& out, int size_tokens, int overlap_chars) {
    ChunkingConfig cfg;
    cfg.chunk_size_tokens = size_tokens;
    cfg.overlap_chars = overlap_chars;
    cfg.validate();
    const WhitespaceTokenizer tok;
    const Corpus c = read_corpus(corpus);
    std::vector<Chunk> chunks;
    for (const auto& d : c.documents) {
        auto cs = chunk_document(d, cfg, tok);
        chunks.insert(chunks.end(), std::make_move_iterator(cs.begin()), std::make_move_iterator(cs.end()));
    }
    const auto m = write_corpus(c.documents, chunks, out);
    spdlog::info("{} documents -> {} chunks -> {}", m.documents, m.chunks, out);
    return 0;
}

int run_genq(const std::string& chunks_path, const std::string& provider, const std::string& prompt_path,
             const std::string& out, int max_per_chunk, std::uint64_t seed) {
    const Corpus c = read_corpus(chunks_path);
    const auto gen = make_generator(provider, seed);
    const QuestionGenPrompt prompt = prompt_path.empty() ? QuestionGenPrompt::default_prompt()
                                                         : QuestionGenPrompt::from_file(prompt_path);
    QuestionGenOptions opts;
    opts.max_questions_per_chunk = max_per_chunk;
    std::vector<GeneratedQuestion> all;
    std::size_t skipped = 0;
    for (const auto& chunk : c.chunks) {
        try {
            auto qs = generate_questions(chunk, *gen, prompt, opts);
            all.insert(all.end(), std::make_move_iterator(qs.begin()), std::make_move_iterator(qs.end()));
        } catch (const Error& e) {
            if (e.code() != Errc::EmptyGeneration && e.code() != Errc::EmptyText) throw;
            ++skipped;
            spdlog::warn("{}: {}", chunk.chunk_id, e.what());
        }
    }
    write_questions(all, out);
    spdlog::info("{} questions from {} chunks ({} without questions) -> {}", all.size(), c.chunks.size(), skipped, out);
    return 0;
}

int run_index(const std::string& chunks_path, const std::string& questions_path, const std::string& out,
              const std::string& prototypes, std::uint64_t seed, int max_iters, const ProviderSettings& ps,
              std::size_t embed_batch, bool no_chunk_vectors) {
    const Corpus c = read_corpus(chunks_path);
    const auto questions = read_questions(questions_path);
    const auto embedder = make_embedder(ps);

    BuildOptions opts;
    if (prototypes != "auto") {
        try {
            opts.k_p = std::stoi(prototypes);
        } catch (const std::exception&) {
            throw Error(Errc::ConfigError, "--prototypes expects a number or 'auto'");
        }
        if (opts.k_p < 1) throw Error(Errc::ConfigError, "--prototypes must be >= 1");
    }
    opts.seed = seed;
    opts.max_iters = max_iters;
    opts.embed_batch = embed_batch;
    opts.embed_chunks = !no_chunk_vectors;
    const fs::path out_dir = fs::absolute(out).parent_path();
    opts.corpus_path = fs::absolute(chunks_path).lexically_relative(out_dir).generic_string();

    const InvertedIndex index = build_index(c.chunks, questions, *embedder, opts);
    save_index(index, out);
    spdlog::info("{} questions in {} buckets ({}) -> {}", index.num_questions(), index.header().k_p,
                 index.header().embedder_id, out);
    return 0;
}

int run_query(const std::string& text, const IndexArgs& ia, int k, int n_probe, bool baseline) {
    const auto l = load_for_query(ia);
    Query q{text, k, n_probe};
    const auto bundle = baseline ? baseline_retrieve(q, l.snap->index, l.snap->store, *l.snap->embedder)
                                 : match_query(q, l.snap->index, l.snap->store, *l.snap->embedder);
    print_json(to_json(bundle));
    return 0;
}

int run_ask(const std::string& text, const IndexArgs& ia, const std::string& llm_kind, int k, int n_probe,
            bool baseline, const std::string& prompt_path, const std::string& refusal, int max_tokens) {
    const auto l = load_for_query(ia);
    const RagPrompt prompt = rag_prompt(prompt_path, refusal);
    const auto llm = make_llm(llm_kind, prompt.refusal_text);
    Query q{text, k, n_probe};
    const auto bundle = baseline ? baseline_retrieve(q, l.snap->index, l.snap->store, *l.snap->embedder)
                                 : match_query(q, l.snap->index, l.snap->store, *l.snap->embedder);
    const WhitespaceTokenizer tok;
    print_json(to_json(generate_answer(bundle, text, *llm, prompt, tok, {max_tokens})));
    return 0;
}

int run_eval_cmd(const std::string& gt_path, const IndexArgs& ia, const std::string& pipeline, const std::string& out,
                 const std::string& llm_kind, int k, int n_probe, int ar_questions, std::size_t workers) {
    const auto items = read_ground_truth(gt_path);
    const auto l = load_for_query(ia);
    const RagPrompt prompt = RagPrompt::default_prompt();
    const auto llm = make_llm(llm_kind, prompt.refusal_text);
    const RuleJudge judge(*l.snap->embedder);
    const WhitespaceTokenizer tok;
    EvalContext ctx{l.snap->index, l.snap->store, *l.snap->embedder, *llm, judge, tok, prompt};
    EvalOptions opts;
    if (pipeline == "both") opts.pipelines = {Pipeline::Quim, Pipeline::Baseline};
    else opts.pipelines = {pipeline_from_string(pipeline)};
    opts.top_k = k;
    opts.n_probe = n_probe;
    opts.ar_questions = ar_questions;
    opts.workers = workers;
    const EvalReport report = run_eval(items, ctx, opts);
    if (!out.empty()) write_json_file(out, to_json(report));
    std::cout << format_table(report);
    return 0;
}

int run_serve(const std::string& config_path, std::optional<int> port) {
    ServiceConfig cfg = load_service_config(config_path);
    if (port) cfg.port = *port;
    const RagPrompt builtin = RagPrompt::default_prompt();
    auto llm = make_llm(cfg.llm, cfg.refusal_text.empty() ? builtin.refusal_text : cfg.refusal_text);
    Service service(cfg, std::move(llm));
    if (auto err = service.load(); !err.empty()) spdlog::error("index not loaded: {}", err);
    return serve(service);
}

}  // namespace

int main(int argc, char** argv) {
    spdlog::set_default_logger(spdlog::stderr_color_mt("quim"));
    spdlog::set_pattern("%^%l%$: %v");

    CLI::App app{"Question-matching retrieval-augmented generation"};
    app.require_subcommand(1);

    std::string input, out, corpus, chunks, questions, provider = "mock", prompt, gt, pipeline = "both";
    std::string index_path, corpus_override, prototypes = "auto", llm = "mock", refusal, config, text;
    int min_chars = 250, size_tokens = 1000, overlap_chars = 200, max_per_chunk = 32, max_iters = 50;
    int k = 3, n_probe = 1, max_tokens = 512, ar_questions = 3, delay_ms = 500;
    std::size_t max_pages = 200, embed_batch = 64, workers = 1;
    std::uint64_t seed = 42;
    bool baseline = false, no_follow = false, no_chunk_vectors = false;
    std::optional<int> port;
    ProviderSettings ps;

    auto* ingest = app.add_subcommand("ingest", "Clean saved or fetched HTML pages into a document corpus");
    ingest->add_option("--input", input, "Directory of .html files, or a file listing URLs")->required();
    ingest->add_option("--out", out, "Corpus JSONL to write")->required();
    ingest->add_option("--min-chars", min_chars, "Drop documents shorter than this")->capture_default_str();
    ingest->add_option("--max-pages", max_pages, "Crawl cap for URL lists")->capture_default_str();
    ingest->add_option("--delay-ms", delay_ms, "Pause between fetches")->capture_default_str();
    ingest->add_flag("--no-follow", no_follow, "Fetch only the listed URLs");

    auto* chunk = app.add_subcommand("chunk", "Split documents into overlapping token windows");
    chunk->add_option("--corpus", corpus, "Corpus JSONL from ingest")->required();
    chunk->add_option("--out", out, "Chunks JSONL to write")->required();
    chunk->add_option("--size-tokens", size_tokens, "Tokens per chunk")->capture_default_str();
    chunk->add_option("--overlap-chars", overlap_chars, "Characters shared by neighbouring chunks")->capture_default_str();

    auto* genq = app.add_subcommand("genq", "Generate questions for every chunk");
    genq->add_option("--chunks", chunks, "Chunks JSONL")->required();
    genq->add_option("--out", out, "Questions JSONL to write")->required();
    genq->add_option("--provider", provider, "mock or http")->capture_default_str();
    genq->add_option("--prompt", prompt, "Prompt template with {chunk_text}");
    genq->add_option("--max-per-chunk", max_per_chunk, "Question cap per chunk")->capture_default_str();
    genq->add_option("--seed", seed, "Seed for the mock provider")->capture_default_str();

    auto* index = app.add_subcommand("index", "Embed questions and build the inverted index");
    index->add_option("--chunks", chunks, "Chunks JSONL")->required();
    index->add_option("--questions", questions, "Questions JSONL")->required();
    index->add_option("--out", out, "Index file to write")->required();
    index->add_option("--prototypes", prototypes, "Number of prototypes, or auto")->capture_default_str();
    index->add_option("--seed", seed, "k-means seed")->capture_default_str();
    index->add_option("--max-iters", max_iters, "k-means iteration cap")->capture_default_str();
    index->add_option("--embedder", ps.embedder, "hash or http")->capture_default_str();
    index->add_option("--dim", ps.dim, "Embedding dimension")->capture_default_str();
    index->add_option("--embed-seed", ps.embed_seed, "Hash embedder seed")->capture_default_str();
    index->add_option("--embed-batch", embed_batch, "Texts per embedding call")->capture_default_str();
    index->add_flag("--no-chunk-vectors", no_chunk_vectors, "Skip chunk embeddings (disables --baseline)");

    auto add_index_opts = [&](CLI::App* sub) {
        sub->add_option("--index", index_path, "Index file")->required();
        sub->add_option("--corpus", corpus_override, "Chunks JSONL (default: the one recorded in the index)");
        sub->add_option("--k", k, "Matches to keep")->capture_default_str();
        sub->add_option("--n-probe", n_probe, "Buckets to search")->capture_default_str();
    };

    auto* query = app.add_subcommand("query", "Retrieve context for a question");
    query->add_option("text", text, "Question")->required();
    add_index_opts(query);
    query->add_flag("--baseline", baseline, "Rank chunk embeddings instead of matching questions");

    auto* ask = app.add_subcommand("ask", "Answer a question from the retrieved context");
    ask->add_option("text", text, "Question")->required();
    add_index_opts(ask);
    ask->add_flag("--baseline", baseline, "Rank chunk embeddings instead of matching questions");
    ask->add_option("--llm", llm, "mock or http")->capture_default_str();
    ask->add_option("--prompt", prompt, "Answer prompt with {context} and {question}");
    ask->add_option("--refusal-text", refusal, "Sentence the model uses when it cannot answer");
    ask->add_option("--max-tokens", max_tokens, "Completion token cap")->capture_default_str();

    auto* eval = app.add_subcommand("eval", "Score pipelines against ground-truth answers");
    eval->add_option("--gt", gt, "Ground-truth JSONL")->required();
    add_index_opts(eval);
    eval->add_option("--pipeline", pipeline, "quim, baseline or both")->capture_default_str();
    eval->add_option("--out", out, "Report JSON to write");
    eval->add_option("--llm", llm, "mock or http")->capture_default_str();
    eval->add_option("--ar-questions", ar_questions, "Questions generated per answer for answer relevance")
        ->capture_default_str();
    eval->add_option("--workers", workers, "Items evaluated in parallel")->capture_default_str();

    auto* serve_cmd = app.add_subcommand("serve", "Run the JSON API");
    serve_cmd->add_option("--config", config, "Config file")->required();
    serve_cmd->add_option("--port", port, "Override the configured port");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest) return run_ingest(input, out, min_chars, max_pages, delay_ms, no_follow);
        if (*chunk) return run_chunk(corpus, out, size_tokens, overlap_chars);
        if (*genq) return run_genq(chunks, provider, prompt, out, max_per_chunk, seed);
        if (*index) return run_index(chunks, questions, out, prototypes, seed, max_iters, ps, embed_batch, no_chunk_vectors);
        const IndexArgs ia{index_path, corpus_override};
        if (*query) return run_query(text, ia, k, n_probe, baseline);
        if (*ask) return run_ask(text, ia, llm, k, n_probe, baseline, prompt, refusal, max_tokens);
        if (*eval) return run_eval_cmd(gt, ia, pipeline, out, llm, k, n_probe, ar_questions, workers);
        if (*serve_cmd) return run_serve(config, port);
    } catch (const Error& e) {
        spdlog::error("{}", e.what());
        return e.code() == Errc::ConfigError || e.code() == Errc::InvalidArgument ? 2 : 1;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
