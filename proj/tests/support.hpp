#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "quim/corpus.hpp"
#include "quim/embedding.hpp"
#include "quim/ingest.hpp"
#include "quim/error.hpp"
#include "quim/qindex.hpp"
#include "quim/quantizer.hpp"
#include "quim/question_gen.hpp"
#include "quim/retrieval.hpp"
#include "quim/text.hpp"

namespace qtest {

inline std::filesystem::path fixtures() { return QUIM_FIXTURES_DIR; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("quim-test-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

/// One axis per vocabulary word; a text embeds to the normalized count
/// vector of its known words. Texts with no known word are rejected.
class OneHotEmbedder final : public quim::EmbedderProvider {
public:
    explicit OneHotEmbedder(std::vector<std::string> vocab) : vocab_(std::move(vocab)) {
        for (std::size_t i = 0; i < vocab_.size(); ++i) axis_[vocab_[i]] = i;
    }

    std::vector<quim::EmbeddingVector> embed(const std::vector<std::string>& texts) const override {
        std::vector<quim::EmbeddingVector> out;
        for (const auto& t : texts) {
            std::vector<double> v(vocab_.size(), 0.0);
            bool any = false;
            for (const auto& w : quim::words(t)) {
                auto it = axis_.find(w);
                if (it == axis_.end()) continue;
                v[it->second] += 1.0;
                any = true;
            }
            if (!any) throw quim::Error(quim::Errc::EmptyText, "no vocabulary word in \"" + t + "\"");
            out.push_back(quim::EmbeddingVector::normalized(std::span<const double>(v)));
        }
        return out;
    }
    std::size_t dim() const override { return vocab_.size(); }
    std::string embedder_id() const override { return "onehot-" + std::to_string(vocab_.size()); }

    std::size_t axis(const std::string& w) const { return axis_.at(w); }

private:
    std::vector<std::string> vocab_;
    std::map<std::string, std::size_t> axis_;
};

/// Looks texts up in a fixed table of vectors.
class TableEmbedder final : public quim::EmbedderProvider {
public:
    TableEmbedder(std::size_t dim, std::string id = "table") : dim_(dim), id_(std::move(id)) {}

    void add(const std::string& text, quim::EmbeddingVector v) { table_.insert_or_assign(text, std::move(v)); }

    std::vector<quim::EmbeddingVector> embed(const std::vector<std::string>& texts) const override {
        std::vector<quim::EmbeddingVector> out;
        for (const auto& t : texts) {
            auto it = table_.find(t);
            if (it == table_.end()) throw quim::Error(quim::Errc::ProviderError, "unknown text " + t);
            out.push_back(it->second);
        }
        return out;
    }
    std::size_t dim() const override { return dim_; }
    std::string embedder_id() const override { return id_; }

private:
    std::size_t dim_;
    std::string id_;
    std::map<std::string, quim::EmbeddingVector> table_;
};

inline quim::EmbeddingVector random_unit(std::mt19937_64& rng, std::size_t dim) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> v(dim);
    for (auto& x : v) x = n(rng);
    return quim::EmbeddingVector::normalized(std::span<const double>(v));
}

inline quim::EmbeddingVector unit_from(std::vector<double> v) {
    return quim::EmbeddingVector::normalized(std::span<const double>(v));
}

inline double plain_dot(const quim::EmbeddingVector& a, const quim::EmbeddingVector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) s += static_cast<double>(a.values()[i]) * static_cast<double>(b.values()[i]);
    return std::clamp(s, -1.0, 1.0);
}

/// Brute-force nearest prototype: scan all, keep the first strict maximum.
inline int oracle_argmax(const quim::EmbeddingVector& v, const quim::PrototypeSet& ps) {
    int best = -1;
    double best_s = -2.0;
    for (const auto& p : ps.prototypes) {
        const double s = plain_dot(v, p.vector);
        if (s > best_s) {
            best_s = s;
            best = p.proto_id;
        }
    }
    return best;
}

/// Exhaustive question search: every posting in every bucket, fully sorted.
inline std::vector<std::string> oracle_top_questions(const quim::InvertedIndex& index, const quim::EmbeddingVector& q,
                                                     int top_k, double min_score) {
    std::vector<std::pair<double, std::string>> all;
    for (const auto& bucket : index.buckets()) {
        for (const auto& p : bucket) {
            const double s = plain_dot(q, p.vector);
            if (s > min_score) all.emplace_back(s, p.question_id);
        }
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < all.size() && i < static_cast<std::size_t>(top_k); ++i) ids.push_back(all[i].second);
    return ids;
}

/// Exhaustive chunk ranking over the index's chunk vectors.
inline std::vector<std::string> oracle_top_chunks(const quim::InvertedIndex& index, const quim::EmbeddingVector& q,
                                                  int top_k) {
    std::vector<std::pair<double, std::string>> all;
    for (const auto& cv : index.chunk_vectors()) all.emplace_back(plain_dot(q, cv.vector), cv.chunk_id);
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < all.size() && i < static_cast<std::size_t>(top_k); ++i) ids.push_back(all[i].second);
    return ids;
}

/// BERTScore from the full candidate x reference similarity matrix.
struct OracleBert {
    double p, r, f;
};
inline OracleBert oracle_bert(const std::vector<quim::EmbeddingVector>& cand, const std::vector<quim::EmbeddingVector>& ref) {
    std::vector<std::vector<double>> m(cand.size(), std::vector<double>(ref.size()));
    for (std::size_t i = 0; i < cand.size(); ++i)
        for (std::size_t j = 0; j < ref.size(); ++j) m[i][j] = plain_dot(cand[i], ref[j]);
    double p = 0.0, r = 0.0;
    for (std::size_t i = 0; i < cand.size(); ++i) p += *std::max_element(m[i].begin(), m[i].end());
    for (std::size_t j = 0; j < ref.size(); ++j) {
        double best = -2.0;
        for (std::size_t i = 0; i < cand.size(); ++i) best = std::max(best, m[i][j]);
        r += best;
    }
    p /= static_cast<double>(cand.size());
    r /= static_cast<double>(ref.size());
    return {p, r, (p + r) == 0.0 ? 0.0 : 2 * p * r / (p + r)};
}

inline quim::Chunk make_chunk(const std::string& id, const std::string& text, const std::string& url = "https://example.org/p") {
    quim::Chunk c;
    c.chunk_id = id;
    c.doc_id = "d-" + id;
    c.text = text;
    c.token_count = static_cast<int>(quim::words(text).size());
    c.char_span = {0, text.size()};
    c.source_url = url;
    return c;
}

/// A synthetic corpus of n_chunks chunks with `per_chunk` questions each and
/// random embeddings served by a TableEmbedder; chunk vectors are included.
struct RandomCorpus {
    std::vector<quim::Chunk> chunks;
    std::vector<quim::GeneratedQuestion> questions;
    std::shared_ptr<TableEmbedder> embedder;
};

inline RandomCorpus random_corpus(std::uint64_t seed, std::size_t n_questions, std::size_t dim, std::size_t per_chunk = 4) {
    std::mt19937_64 rng(seed);
    RandomCorpus rc;
    rc.embedder = std::make_shared<TableEmbedder>(dim, "table-" + std::to_string(seed));
    const std::size_t n_chunks = (n_questions + per_chunk - 1) / per_chunk;
    for (std::size_t c = 0; c < n_chunks; ++c) {
        char id[32];
        std::snprintf(id, sizeof id, "c%05zu", c);
        rc.chunks.push_back(make_chunk(id, std::string("chunk text ") + id, "https://example.org/" + std::to_string(c % 7)));
        rc.embedder->add(rc.chunks.back().text, random_unit(rng, dim));
    }
    for (std::size_t i = 0; i < n_questions; ++i) {
        quim::GeneratedQuestion q;
        q.chunk_id = rc.chunks[i / per_chunk].chunk_id;
        q.question_id = quim::make_question_id(q.chunk_id, static_cast<int>(i % per_chunk));
        q.text = "question " + std::to_string(i) + "?";
        rc.embedder->add(q.text, random_unit(rng, dim));
        rc.questions.push_back(q);
    }
    return rc;
}

/// The shipped fixture site run through ingest, chunking and the template
/// question generator, in memory.
struct SiteCorpus {
    std::vector<quim::Document> documents;
    std::vector<quim::Chunk> chunks;
    std::vector<quim::GeneratedQuestion> questions;
};

inline SiteCorpus site_corpus(int size_tokens = 60, int overlap_chars = 40, std::uint64_t seed = 42) {
    SiteCorpus sc;
    quim::ChunkingConfig cfg{size_tokens, overlap_chars, 250};
    std::vector<quim::Document> docs;
    for (const auto& page : quim::load_html_dir(fixtures() / "site")) docs.push_back(quim::clean_html(page));
    sc.documents = quim::filter_documents(docs, cfg);
    quim::WhitespaceTokenizer tok;
    quim::TemplateQuestionGenerator gen(seed);
    for (const auto& d : sc.documents) {
        for (auto& c : quim::chunk_document(d, cfg, tok)) {
            try {
                for (auto& q : quim::generate_questions(c, gen, quim::QuestionGenPrompt::default_prompt())) {
                    sc.questions.push_back(std::move(q));
                }
            } catch (const quim::Error& e) {
                if (e.code() != quim::Errc::EmptyGeneration) throw;
            }
            sc.chunks.push_back(std::move(c));
        }
    }
    return sc;
}

}  // namespace qtest
