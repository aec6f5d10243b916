#include "quim/embedding.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "quim/error.hpp"
#include "quim/text.hpp"

namespace quim {

namespace {

template <typename T>
EmbeddingVector normalize_impl(std::span<const T> raw, std::vector<float>& out) {
    if (raw.empty()) throw Error(Errc::InvalidVector, "empty vector");
    double sq = 0.0;
    for (T x : raw) {
        if (!std::isfinite(static_cast<double>(x))) throw Error(Errc::InvalidVector, "non-finite component");
        sq += static_cast<double>(x) * static_cast<double>(x);
    }
    if (sq == 0.0) throw Error(Errc::InvalidVector, "zero vector cannot be normalized");
    const double inv = 1.0 / std::sqrt(sq);
    out.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = static_cast<float>(static_cast<double>(raw[i]) * inv);
    return EmbeddingVector::from_unit(std::move(out));
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

EmbeddingVector EmbeddingVector::normalized(std::span<const float> raw) {
    std::vector<float> out;
    return normalize_impl(raw, out);
}

EmbeddingVector EmbeddingVector::normalized(std::span<const double> raw) {
    std::vector<float> out;
    return normalize_impl(raw, out);
}

EmbeddingVector EmbeddingVector::from_unit(std::vector<float> values, double tolerance) {
    if (values.empty()) throw Error(Errc::InvalidVector, "empty vector");
    double sq = 0.0;
    for (float x : values) {
        if (!std::isfinite(x)) throw Error(Errc::InvalidVector, "non-finite component");
        sq += static_cast<double>(x) * x;
    }
    if (std::abs(std::sqrt(sq) - 1.0) > tolerance) {
        throw Error(Errc::InvalidVector, "vector is not unit-norm (norm " + std::to_string(std::sqrt(sq)) + ")");
    }
    return EmbeddingVector(std::move(values));
}

double EmbeddingVector::norm() const noexcept {
    double sq = 0.0;
    for (float x : values_) sq += static_cast<double>(x) * x;
    return std::sqrt(sq);
}

double dot(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) {
        throw Error(Errc::DimMismatch, std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return s;
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    return std::clamp(dot(a.values(), b.values()), -1.0, 1.0);
}

EmbeddingVector embed_text(std::string_view text, const EmbedderProvider& provider) {
    if (trim(text).empty()) throw Error(Errc::EmptyText, "cannot embed blank text");
    auto out = provider.embed({std::string(text)});
    if (out.size() != 1) throw Error(Errc::ProviderError, "embedder returned " + std::to_string(out.size()) + " vectors for 1 text");
    if (out[0].dim() != provider.dim()) {
        throw Error(Errc::DimMismatch, "embedder returned dim " + std::to_string(out[0].dim()) +
                                           ", expected " + std::to_string(provider.dim()));
    }
    return std::move(out[0]);
}

std::vector<EmbeddingVector> embed_all(const std::vector<std::string>& texts,
                                       const EmbedderProvider& provider, std::size_t batch_size) {
    if (batch_size == 0) batch_size = 1;
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); i += batch_size) {
        std::vector<std::string> batch(texts.begin() + static_cast<std::ptrdiff_t>(i),
                                       texts.begin() + static_cast<std::ptrdiff_t>(std::min(texts.size(), i + batch_size)));
        for (const auto& t : batch) {
            if (trim(t).empty()) throw Error(Errc::EmptyText, "cannot embed blank text");
        }
        auto vecs = provider.embed(batch);
        if (vecs.size() != batch.size()) {
            throw Error(Errc::ProviderError, "embedder returned " + std::to_string(vecs.size()) +
                                                 " vectors for " + std::to_string(batch.size()) + " texts");
        }
        for (auto& v : vecs) {
            if (v.dim() != provider.dim()) throw Error(Errc::DimMismatch, "embedder returned wrong dimension");
            out.push_back(std::move(v));
        }
    }
    return out;
}

HashEmbedder::HashEmbedder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim < 8) throw Error(Errc::ConfigError, "hash embedder dim must be >= 8");
}

std::string HashEmbedder::embedder_id() const {
    return "hash-d" + std::to_string(dim_) + "-s" + std::to_string(seed_);
}

std::pair<std::size_t, float> HashEmbedder::feature(std::string_view token) const {
    const std::uint64_t h = fnv1a64(token, 0xcbf29ce484222325ULL ^ splitmix64(seed_));
    return {static_cast<std::size_t>(h % dim_), (h >> 63) ? -1.0f : 1.0f};
}

std::vector<EmbeddingVector> HashEmbedder::embed(const std::vector<std::string>& texts) const {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    std::vector<double> acc(dim_);
    for (const auto& t : texts) {
        std::fill(acc.begin(), acc.end(), 0.0);
        auto toks = words(t);
        if (toks.empty()) throw Error(Errc::EmptyText, "no embeddable tokens in \"" + t + "\"");
        std::vector<std::string> content;
        std::copy_if(toks.begin(), toks.end(), std::back_inserter(content), [](const std::string& w) { return !is_stopword(w); });
        if (!content.empty()) toks = std::move(content);
        for (const auto& w : toks) {
            auto [bucket, sign] = feature(w);
            acc[bucket] += sign;
        }
        // Features can cancel exactly; fall back to the smallest token's axis.
        if (std::all_of(acc.begin(), acc.end(), [](double x) { return x == 0.0; })) {
            auto [bucket, sign] = feature(*std::min_element(toks.begin(), toks.end()));
            acc[bucket] = sign;
        }
        out.push_back(EmbeddingVector::normalized(std::span<const double>(acc)));
    }
    return out;
}

std::unique_ptr<HashEmbedder> test_embedder(std::size_t dim, std::uint64_t seed) {
    return std::make_unique<HashEmbedder>(dim, seed);
}

std::unique_ptr<HashEmbedder> hash_embedder_from_id(std::string_view id) {
    constexpr std::string_view prefix = "hash-d";
    if (id.substr(0, prefix.size()) != prefix) return nullptr;
    id.remove_prefix(prefix.size());
    auto sep = id.find("-s");
    if (sep == std::string_view::npos) return nullptr;
    std::size_t dim = 0;
    std::uint64_t seed = 0;
    auto d = id.substr(0, sep), s = id.substr(sep + 2);
    auto r1 = std::from_chars(d.data(), d.data() + d.size(), dim);
    auto r2 = std::from_chars(s.data(), s.data() + s.size(), seed);
    if (r1.ec != std::errc{} || r1.ptr != d.data() + d.size() || r2.ec != std::errc{} ||
        r2.ptr != s.data() + s.size() || dim < 8) {
        return nullptr;
    }
    return std::make_unique<HashEmbedder>(dim, seed);
}

}  // namespace quim
