#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "quim/corpus.hpp"
#include "quim/embedding.hpp"
#include "quim/qindex.hpp"

namespace quim {

struct Query {
    std::string text;
    int top_k = 3;
    int n_probe = 1;
    /// Question matches must score strictly above this, so a query sharing
    /// nothing with the indexed questions retrieves nothing. The chunk
    /// baseline ranks every chunk and ignores it.
    double min_score = 0.0;
};

struct MatchedQuestion {
    std::string question_id;
    std::string question_text;
    std::string chunk_id;
    double score = 0.0;

    friend bool operator==(const MatchedQuestion&, const MatchedQuestion&) = default;
};

struct ContextChunk {
    std::string chunk_id;
    std::string text;
    std::string source_url;
    double score = 0.0;  // best score that pulled this chunk in

    friend bool operator==(const ContextChunk&, const ContextChunk&) = default;
};

/// Ranked matches plus the distinct chunks they point at, best first.
struct ContextBundle {
    std::vector<MatchedQuestion> matches;
    std::vector<ContextChunk> chunks;

    bool empty() const noexcept { return chunks.empty(); }

    friend bool operator==(const ContextBundle&, const ContextBundle&) = default;
};

/// chunk_id -> Chunk lookup over a loaded corpus.
class ChunkStore {
public:
    ChunkStore() = default;
    explicit ChunkStore(std::vector<Chunk> chunks);

    const Chunk* find(const std::string& chunk_id) const;
    const std::vector<Chunk>& chunks() const noexcept { return chunks_; }
    std::size_t size() const noexcept { return chunks_.size(); }

private:
    std::vector<Chunk> chunks_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

/// Pools the postings of the n_probe prototypes nearest to `query_vector`,
/// scores them by cosine and returns the top_k above min_score (score
/// descending, ties by question_id).
std::vector<MatchedQuestion> match_questions(const Query& q, const InvertedIndex& index,
                                             const EmbeddingVector& query_vector);

/// Resolves matches to distinct chunks, keeping first-occurrence order.
/// Throws ReferentialIntegrity if a chunk is missing from the store.
ContextBundle assemble_context(std::vector<MatchedQuestion> matches, const ChunkStore& store);

/// Question-to-question retrieval. Throws EmbedderMismatch if the provider is
/// not the one the index was built with, EmptyIndex for an index without
/// questions, InvalidArgument for an empty query or top_k/n_probe < 1.
ContextBundle match_query(const Query& q, const InvertedIndex& index, const ChunkStore& store,
                          const EmbedderProvider& provider);

/// Chunk ranking baseline ("retrieve-read"): ranks the index's chunk
/// embeddings directly against the query (score descending, ties by
/// chunk_id). No question matching.
ContextBundle baseline_retrieve(const Query& q, const InvertedIndex& index, const ChunkStore& store,
                                const EmbedderProvider& provider);

nlohmann::json to_json(const MatchedQuestion& m);
nlohmann::json to_json(const ContextBundle& bundle);

}  // namespace quim
