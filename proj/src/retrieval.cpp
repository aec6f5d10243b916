#include "quim/retrieval.hpp"

#include <algorithm>
#include <unordered_set>

#include "quim/error.hpp"
#include "quim/quantizer.hpp"
#include "quim/text.hpp"

namespace quim {

ChunkStore::ChunkStore(std::vector<Chunk> chunks) : chunks_(std::move(chunks)) {
    for (std::size_t i = 0; i < chunks_.size(); ++i) by_id_.emplace(chunks_[i].chunk_id, i);
}

const Chunk* ChunkStore::find(const std::string& chunk_id) const {
    auto it = by_id_.find(chunk_id);
    return it == by_id_.end() ? nullptr : &chunks_[it->second];
}

namespace {

void validate_query(const Query& q) {
    if (trim(q.text).empty()) throw Error(Errc::InvalidArgument, "query text is empty");
    if (q.top_k < 1) throw Error(Errc::InvalidArgument, "top_k must be >= 1");
    if (q.n_probe < 1) throw Error(Errc::InvalidArgument, "n_probe must be >= 1");
}

void check_embedder(const InvertedIndex& index, const EmbedderProvider& provider) {
    if (provider.embedder_id() != index.header().embedder_id) {
        throw Error(Errc::EmbedderMismatch,
                    "index built with " + index.header().embedder_id + ", query embedder is " + provider.embedder_id());
    }
}

}  // namespace

std::vector<MatchedQuestion> match_questions(const Query& q, const InvertedIndex& index,
                                             const EmbeddingVector& query_vector) {
    std::vector<MatchedQuestion> pool;
    for (int pid : nearest_prototypes(query_vector, index.prototypes(), q.n_probe)) {
        for (const auto& p : index.lookup(pid)) {
            const double s = cosine_similarity(query_vector, p.vector);
            if (s > q.min_score) pool.push_back({p.question_id, p.question_text, p.chunk_id, s});
        }
    }
    const auto take = std::min(pool.size(), static_cast<std::size_t>(q.top_k));
    std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take), pool.end(),
                      [](const MatchedQuestion& a, const MatchedQuestion& b) {
                          return a.score != b.score ? a.score > b.score : a.question_id < b.question_id;
                      });
    pool.resize(take);
    return pool;
}

ContextBundle assemble_context(std::vector<MatchedQuestion> matches, const ChunkStore& store) {
    ContextBundle bundle;
    std::unordered_set<std::string> seen;
    for (const auto& m : matches) {
        if (!seen.insert(m.chunk_id).second) continue;
        const Chunk* c = store.find(m.chunk_id);
        if (!c) throw Error(Errc::ReferentialIntegrity, "chunk " + m.chunk_id + " not found in corpus");
        bundle.chunks.push_back({c->chunk_id, c->text, c->source_url, m.score});
    }
    bundle.matches = std::move(matches);
    return bundle;
}

ContextBundle match_query(const Query& q, const InvertedIndex& index, const ChunkStore& store,
                          const EmbedderProvider& provider) {
    validate_query(q);
    check_embedder(index, provider);
    if (index.num_questions() == 0) throw Error(Errc::EmptyIndex, "index holds no questions");
    const EmbeddingVector v = embed_text(q.text, provider);
    return assemble_context(match_questions(q, index, v), store);
}

ContextBundle baseline_retrieve(const Query& q, const InvertedIndex& index, const ChunkStore& store,
                                const EmbedderProvider& provider) {
    validate_query(q);
    check_embedder(index, provider);
    if (index.chunk_vectors().empty()) throw Error(Errc::EmptyIndex, "index holds no chunk embeddings");
    const EmbeddingVector v = embed_text(q.text, provider);

    std::vector<std::pair<double, std::size_t>> scored;
    const auto& cvs = index.chunk_vectors();
    for (std::size_t i = 0; i < cvs.size(); ++i) {
        scored.emplace_back(cosine_similarity(v, cvs[i].vector), i);
    }
    const auto take = std::min(scored.size(), static_cast<std::size_t>(q.top_k));
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(),
                      [&](const auto& a, const auto& b) {
                          return a.first != b.first ? a.first > b.first : cvs[a.second].chunk_id < cvs[b.second].chunk_id;
                      });

    ContextBundle bundle;
    for (std::size_t i = 0; i < take; ++i) {
        const auto& id = cvs[scored[i].second].chunk_id;
        const Chunk* c = store.find(id);
        if (!c) throw Error(Errc::ReferentialIntegrity, "chunk " + id + " not found in corpus");
        bundle.chunks.push_back({c->chunk_id, c->text, c->source_url, scored[i].first});
    }
    return bundle;
}

nlohmann::json to_json(const MatchedQuestion& m) {
    return {{"question_id", m.question_id}, {"question_text", m.question_text}, {"chunk_id", m.chunk_id}, {"score", m.score}};
}

nlohmann::json to_json(const ContextBundle& bundle) {
    nlohmann::json matches = nlohmann::json::array();
    for (const auto& m : bundle.matches) matches.push_back(to_json(m));
    nlohmann::json chunks = nlohmann::json::array();
    for (const auto& c : bundle.chunks) {
        chunks.push_back({{"chunk_id", c.chunk_id}, {"text", c.text}, {"source_url", c.source_url}, {"score", c.score}});
    }
    return {{"matches", std::move(matches)}, {"chunks", std::move(chunks)}};
}

}  // namespace quim
