#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "quim/embedding.hpp"

namespace quim {

struct Prototype {
    int proto_id = 0;
    EmbeddingVector vector;

    friend bool operator==(const Prototype&, const Prototype&) = default;
};

/// Coarse quantizer: k_p unit-norm centers with dense ids 0..k_p-1.
struct PrototypeSet {
    std::vector<Prototype> prototypes;
    std::string embedder_id;
    std::uint64_t seed = 0;

    int k_p() const noexcept { return static_cast<int>(prototypes.size()); }
    std::size_t dim() const noexcept { return prototypes.empty() ? 0 : prototypes.front().vector.dim(); }

    friend bool operator==(const PrototypeSet&, const PrototypeSet&) = default;
};

struct KMeansOptions {
    int k_p = 1;
    std::uint64_t seed = 42;
    int max_iters = 50;
};

/// Result of a k-means run, with the final assignment kept for inspection.
struct KMeansResult {
    PrototypeSet prototypes;
    std::vector<int> assignment;  // proto_id per input vector
    int iterations = 0;
    bool converged = false;
};

/// Spherical k-means. Centers are seeded with k-means++ over cosine distance
/// (1 - cos) using a seeded mt19937_64; each iteration assigns every vector to
/// its most similar center and moves each center to the normalized mean of
/// its members. A center whose cluster is empty (or whose mean is zero) is
/// reseeded from the member vector least similar to its own center. Stops
/// after max_iters or once an assignment pass changes nothing.
///
/// Throws TooFewVectors if k_p > vectors.size(), InvalidArgument if k_p < 1
/// or vectors is empty, DimMismatch on mixed dimensions.
KMeansResult spherical_kmeans(const std::vector<EmbeddingVector>& vectors, const KMeansOptions& opts);

PrototypeSet learn_prototypes(const std::vector<EmbeddingVector>& vectors, int k_p, std::uint64_t seed,
                              int max_iters = 50);

/// ceil(sqrt(n)), at least 1.
int default_prototype_count(std::size_t num_vectors) noexcept;

/// Id of the most cosine-similar prototype; ties go to the smaller id.
/// Throws DimMismatch; InvalidArgument for an empty set.
int quantize(const EmbeddingVector& v, const PrototypeSet& ps);

/// The n most similar prototype ids, best first (ties by smaller id); n is
/// clamped to k_p.
std::vector<int> nearest_prototypes(const EmbeddingVector& v, const PrototypeSet& ps, int n);

}  // namespace quim
