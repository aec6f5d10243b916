#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace quim {

/// Unit-L2-norm float vector. Construction either normalizes raw values or
/// validates values that are already unit-norm (e.g. read back from disk).
class EmbeddingVector {
public:
    EmbeddingVector() = default;

    /// Throws InvalidVector for empty, zero, NaN or infinite input.
    static EmbeddingVector normalized(std::span<const float> raw);
    static EmbeddingVector normalized(std::span<const double> raw);

    /// Keeps the values bit-for-bit; throws InvalidVector unless the norm is
    /// within `tolerance` of 1.
    static EmbeddingVector from_unit(std::vector<float> values, double tolerance = 1e-5);

    std::size_t dim() const noexcept { return values_.size(); }
    std::span<const float> values() const noexcept { return values_; }
    double norm() const noexcept;

    friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

private:
    explicit EmbeddingVector(std::vector<float> v) : values_(std::move(v)) {}
    std::vector<float> values_;
};

/// Sequential double-precision dot product. Throws DimMismatch.
double dot(std::span<const float> a, std::span<const float> b);

/// dot(a,b)/(|a||b|) clamped to [-1, 1]. Since both operands are unit-norm
/// this is the clamped dot product.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

/// Text encoder. Implementations must be safe to call concurrently and must
/// map identical text to identical vectors within one process.
class EmbedderProvider {
public:
    virtual ~EmbedderProvider() = default;
    virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) const = 0;
    virtual std::size_t dim() const = 0;
    virtual std::string embedder_id() const = 0;
};

/// Throws EmptyText for blank input; DimMismatch if the provider returns a
/// vector of the wrong size.
EmbeddingVector embed_text(std::string_view text, const EmbedderProvider& provider);

/// Embeds in provider calls of at most batch_size texts; output aligned with input.
std::vector<EmbeddingVector> embed_all(const std::vector<std::string>& texts,
                                       const EmbedderProvider& provider, std::size_t batch_size = 64);

/// Offline feature-hashing embedder: lowercase, split on non-alphanumerics,
/// drop stopwords (unless nothing else is left), add +/-1 for each token into
/// bucket hash(token) mod dim, L2-normalize.
class HashEmbedder final : public EmbedderProvider {
public:
    HashEmbedder(std::size_t dim, std::uint64_t seed);

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) const override;
    std::size_t dim() const override { return dim_; }
    std::string embedder_id() const override;

    /// Bucket index and sign assigned to a (lowercased) token.
    std::pair<std::size_t, float> feature(std::string_view token) const;

private:
    std::size_t dim_;
    std::uint64_t seed_;
};

/// Deterministic offline stand-in; dim must be >= 8.
std::unique_ptr<HashEmbedder> test_embedder(std::size_t dim, std::uint64_t seed);

/// Rebuilds a HashEmbedder from its embedder_id ("hash-d<dim>-s<seed>");
/// returns nullptr for any other id.
std::unique_ptr<HashEmbedder> hash_embedder_from_id(std::string_view embedder_id);

}  // namespace quim
