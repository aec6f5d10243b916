#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "quim/text.hpp"

namespace quim {

/// A fetched page before cleaning.
struct RawPage {
    std::string url;
    std::string title;  // empty: taken from the page's <title>
    std::string html;
    std::string fetched_at;  // ISO-8601 UTC
};

struct Document {
    std::string doc_id;
    std::string url;
    std::string title;
    std::string text;

    friend bool operator==(const Document&, const Document&) = default;
};

enum class ReviewFlag { Unreviewed, Accepted, Reprocess };

std::string_view to_string(ReviewFlag f) noexcept;
ReviewFlag review_flag_from_string(std::string_view s);

struct Chunk {
    std::string chunk_id;
    std::string doc_id;
    int seq = 0;
    std::string text;
    int token_count = 0;
    TokenSpan char_span;  // byte offsets into Document::text
    std::string source_url;
    ReviewFlag review_flag = ReviewFlag::Unreviewed;

    friend bool operator==(const Chunk&, const Chunk&) = default;
};

struct ChunkingConfig {
    int chunk_size_tokens = 1000;
    int overlap_chars = 200;
    int min_doc_chars = 250;

    /// Throws ConfigError when a field is out of range.
    void validate() const;
};

/// Absolute URL with a scheme and (except for file:) a host.
bool is_valid_url(std::string_view url);

std::string make_doc_id(std::string_view url);
std::string make_chunk_id(std::string_view url, int seq);

/// Number of UTF-8 code points in s.
std::size_t utf8_length(std::string_view s) noexcept;

/// Throws MalformedUrl when page.url is not a valid absolute URL.
Document clean_html(const RawPage& page);

/// Drops documents shorter than cfg.min_doc_chars characters and documents
/// titled "404 page not found" (any case). Order is preserved.
std::vector<Document> filter_documents(const std::vector<Document>& docs, const ChunkingConfig& cfg);

/// Token windows of at most cfg.chunk_size_tokens tokens. Step overlap_chars
/// characters back from the previous window's end: the next window starts at
/// the token under that offset, or at the following token if the offset falls
/// between tokens. The first chunk starts at offset 0, the last one ends at the
/// end of the text and neighbouring spans touch or overlap, so the chunks
/// cover the document.
/// Throws EmptyDocument for text without tokens, ConfigError when the overlap
/// swallows a whole window.
std::vector<Chunk> chunk_document(const Document& doc, const ChunkingConfig& cfg,
                                  const TokenizerProvider& tokenizer);

struct CorpusManifest {
    std::filesystem::path path;
    std::size_t documents = 0;
    std::size_t chunks = 0;
};

struct Corpus {
    std::vector<Document> documents;
    std::vector<Chunk> chunks;

    friend bool operator==(const Corpus&, const Corpus&) = default;
};

inline constexpr std::string_view kCorpusFormat = "quim-corpus";
inline constexpr int kCorpusVersion = 1;

CorpusManifest write_corpus(const std::vector<Document>& docs, const std::vector<Chunk>& chunks,
                            const std::filesystem::path& path);
Corpus read_corpus(const std::filesystem::path& path);

}  // namespace quim
