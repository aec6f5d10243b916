#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "quim/embedding.hpp"
#include "quim/generation.hpp"
#include "quim/qindex.hpp"
#include "quim/retrieval.hpp"

namespace quim {

struct GroundTruthItem {
    std::string question;
    std::string reference_answer;
    std::vector<std::string> source_urls;
    std::optional<std::vector<std::string>> relevant_chunk_ids;
};

/// Plain JSON lines, one item per line; blank lines skipped. FormatError
/// names the offending line.
std::vector<GroundTruthItem> read_ground_truth(const std::filesystem::path& path);
std::vector<GroundTruthItem> parse_ground_truth(std::string_view text);

/// Tokens of a text and one embedding per token.
struct TokenEmbeddings {
    std::vector<std::string> tokens;
    std::vector<EmbeddingVector> vectors;
};

/// Tokens are words(); each is embedded on its own. Throws EmptySequence
/// when the text has no words.
TokenEmbeddings embed_tokens(std::string_view text, const EmbedderProvider& embedder);

struct BertScoreResult {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Greedy matching: precision averages each candidate token's best cosine to
/// the reference, recall the reverse. Throws EmptySequence.
BertScoreResult bert_score(const TokenEmbeddings& candidate, const TokenEmbeddings& reference);

struct ClaimVerdict {
    std::string claim;
    bool verified = false;
};

/// Verified share. Throws NoClaims on an empty list.
double faithfulness(const std::vector<ClaimVerdict>& verdicts);

class JudgeProvider {
public:
    virtual ~JudgeProvider() = default;
    virtual std::vector<std::string> extract_claims(const std::string& answer) const = 0;
    virtual bool verify(const std::string& claim, const std::string& context) const = 0;
    virtual std::vector<std::string> extract_relevant_sentences(const std::string& question,
                                                                const std::vector<std::string>& sentences) const = 0;
    virtual std::vector<std::string> generate_questions_from_answer(const std::string& answer, int n) const = 0;
    virtual std::string provider_id() const = 0;
};

/// Deterministic judge. Claims are answer sentences; a claim is verified when
/// its normalized text occurs in the normalized context or its embedding is
/// within `threshold` cosine of some context sentence. Relevant sentences
/// share a content word with the question. Questions are built from windows
/// of the answer's content words.
class RuleJudge final : public JudgeProvider {
public:
    explicit RuleJudge(const EmbedderProvider& embedder, double threshold = 0.8)
        : embedder_(embedder), threshold_(threshold) {}

    std::vector<std::string> extract_claims(const std::string& answer) const override;
    bool verify(const std::string& claim, const std::string& context) const override;
    std::vector<std::string> extract_relevant_sentences(const std::string& question,
                                                        const std::vector<std::string>& sentences) const override;
    std::vector<std::string> generate_questions_from_answer(const std::string& answer, int n) const override;
    std::string provider_id() const override { return "rule"; }

private:
    const EmbedderProvider& embedder_;
    double threshold_;
};

/// Mean cosine between the question and each of n questions the judge writes
/// from the answer. Throws EmptyGeneration when the judge writes none.
double answer_relevance(const std::string& original_question, const std::string& answer, const JudgeProvider& judge,
                        const EmbedderProvider& embedder, int n);

/// Share of context sentences the judge calls relevant. Throws EmptyContext,
/// or JudgeHallucination when the judge returns a sentence not in the input.
double context_relevance(const std::string& question, const std::vector<std::string>& context_sentences,
                         const JudgeProvider& judge);

/// Set precision and recall of retrieved ids against relevant ids. Throws
/// EmptyRetrieval with nothing retrieved, InvalidArgument with nothing relevant.
std::pair<double, double> context_precision_recall(const std::vector<std::string>& retrieved,
                                                   const std::vector<std::string>& relevant);

enum class Pipeline { Quim, Baseline };

std::string to_string(Pipeline p);
Pipeline pipeline_from_string(std::string_view s);

/// Per-item metrics; a metric is absent when it is undefined for the item
/// (for example faithfulness of a refusal).
struct ItemMetrics {
    std::optional<double> faithfulness;
    std::optional<double> answer_relevance;
    std::optional<double> context_relevance;
    std::optional<double> context_precision;
    std::optional<double> context_recall;
    std::optional<BertScoreResult> bert;
};

struct ItemResult {
    std::size_t index = 0;
    std::string question;
    std::optional<std::string> error;  // "<ErrorClass>: message" when the item failed
    std::string answer;
    bool refused = false;
    std::vector<std::string> retrieved_chunk_ids;
    ItemMetrics metrics;
};

struct PipelineReport {
    Pipeline pipeline = Pipeline::Quim;
    std::vector<ItemResult> items;
    std::map<std::string, double> means;  // metric name -> mean over items where defined
    std::size_t failures = 0;
};

struct EvalReport {
    std::vector<PipelineReport> pipelines;
};

struct EvalContext {
    const InvertedIndex& index;
    const ChunkStore& store;
    const EmbedderProvider& embedder;
    const LlmProvider& llm;
    const JudgeProvider& judge;
    const TokenizerProvider& tokenizer;
    RagPrompt prompt = RagPrompt::default_prompt();
};

struct EvalOptions {
    std::vector<Pipeline> pipelines{Pipeline::Quim, Pipeline::Baseline};
    int top_k = 3;
    int n_probe = 1;
    int ar_questions = 3;
    std::size_t workers = 1;
    GenerationOptions generation;
};

/// Runs every item through each pipeline. Item failures are recorded and the
/// run continues; means cover the remaining items. Throws InvalidArgument
/// ("no items") on empty input.
EvalReport run_eval(const std::vector<GroundTruthItem>& items, const EvalContext& ctx, const EvalOptions& opts = {});

nlohmann::json to_json(const EvalReport& report);

/// Metrics as rows, pipelines as columns, two decimals.
std::string format_table(const EvalReport& report);

}  // namespace quim
