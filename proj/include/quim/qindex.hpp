#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "quim/corpus.hpp"
#include "quim/embedding.hpp"
#include "quim/quantizer.hpp"
#include "quim/question_gen.hpp"

namespace quim {

/// One indexed question: its embedding and the chunk it was generated from.
struct Posting {
    std::string question_id;
    std::string chunk_id;
    std::string question_text;
    EmbeddingVector vector;

    friend bool operator==(const Posting&, const Posting&) = default;
};

/// Chunk embedding kept for the chunk-ranking baseline.
struct ChunkVector {
    std::string chunk_id;
    EmbeddingVector vector;

    friend bool operator==(const ChunkVector&, const ChunkVector&) = default;
};

struct IndexHeader {
    int version = 1;
    std::size_t dim = 0;
    int k_p = 0;
    std::string embedder_id;
    std::string built_at;     // ISO-8601 UTC
    std::string corpus_path;  // chunks file the index was built from

    friend bool operator==(const IndexHeader&, const IndexHeader&) = default;
};

/// Prototype id -> postings of the questions quantized to it. Immutable once
/// built or loaded.
class InvertedIndex {
public:
    InvertedIndex() = default;
    InvertedIndex(IndexHeader header, PrototypeSet prototypes, std::vector<std::vector<Posting>> buckets,
                  std::vector<ChunkVector> chunk_vectors);

    const IndexHeader& header() const noexcept { return header_; }
    const PrototypeSet& prototypes() const noexcept { return prototypes_; }
    const std::vector<std::vector<Posting>>& buckets() const noexcept { return buckets_; }
    const std::vector<ChunkVector>& chunk_vectors() const noexcept { return chunk_vectors_; }

    /// Postings stored under proto_id. Throws UnknownPrototype when out of range.
    std::span<const Posting> lookup(int proto_id) const;

    std::size_t num_questions() const noexcept;

    friend bool operator==(const InvertedIndex&, const InvertedIndex&) = default;

private:
    IndexHeader header_;
    PrototypeSet prototypes_;
    std::vector<std::vector<Posting>> buckets_;
    std::vector<ChunkVector> chunk_vectors_;
};

struct BuildOptions {
    /// Supplied prototypes; when empty they are learned from the question
    /// embeddings with k_p (0 = ceil(sqrt(#questions))), seed and max_iters.
    std::optional<PrototypeSet> prototypes;
    int k_p = 0;
    std::uint64_t seed = 42;
    int max_iters = 50;
    std::size_t embed_batch = 64;
    bool embed_chunks = true;
    std::string built_at;  // empty: current UTC time (or SOURCE_DATE_EPOCH)
    std::string corpus_path;
    /// When set, receives (question_id, proto_id) for every question in input order.
    std::vector<std::pair<std::string, int>>* assignment_log = nullptr;
};

/// Embeds every question, quantizes it and appends it to its bucket; buckets
/// are ordered by question_id. Throws ReferentialIntegrity for questions
/// whose chunk is missing or duplicate question ids, EmbedderMismatch if
/// supplied prototypes came from a different embedder.
InvertedIndex build_index(const std::vector<Chunk>& chunks, const std::vector<GeneratedQuestion>& questions,
                          const EmbedderProvider& provider, const BuildOptions& opts = {});

inline constexpr std::string_view kIndexFormat = "quim-index";
inline constexpr int kIndexVersion = 1;

/// File layout: one JSON header line; little-endian float32 blocks for the
/// prototypes, the postings (bucket order) and the chunk vectors; one JSON
/// directory line with ids and question texts; and a trailer line
/// "crc32 <8 hex digits>" covering every preceding byte.
std::string serialize_index(const InvertedIndex& index);
InvertedIndex deserialize_index(std::string_view bytes);

/// Writes through a temp file and renames it into place.
void save_index(const InvertedIndex& index, const std::filesystem::path& path);

/// Throws IoError, VersionMismatch (checked before the checksum),
/// ChecksumError, or FormatError.
InvertedIndex load_index(const std::filesystem::path& path);

/// Current UTC time, or SOURCE_DATE_EPOCH when set, as ISO-8601.
std::string build_timestamp();

}  // namespace quim
