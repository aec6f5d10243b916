#include "quim/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "quim/error.hpp"

namespace quim {

namespace {

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

struct Assignment {
    int proto = 0;
    double sim = 0.0;
};

Assignment best_center(const EmbeddingVector& v, const std::vector<EmbeddingVector>& centers) {
    Assignment best{0, cosine_similarity(v, centers[0])};
    for (std::size_t c = 1; c < centers.size(); ++c) {
        double s = cosine_similarity(v, centers[c]);
        if (s > best.sim) best = {static_cast<int>(c), s};
    }
    return best;
}

std::vector<EmbeddingVector> seed_centers(const std::vector<EmbeddingVector>& vectors, int k,
                                          std::mt19937_64& rng) {
    const std::size_t n = vectors.size();
    std::vector<char> chosen(n, 0);
    std::vector<double> best_sim(n, -1.0);
    std::vector<EmbeddingVector> centers;
    centers.reserve(static_cast<std::size_t>(k));

    auto take = [&](std::size_t idx) {
        chosen[idx] = 1;
        centers.push_back(vectors[idx]);
        for (std::size_t i = 0; i < n; ++i) {
            best_sim[i] = std::max(best_sim[i], cosine_similarity(vectors[i], vectors[idx]));
        }
    };

    take(std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n))));
    while (static_cast<int>(centers.size()) < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) total += std::max(0.0, 1.0 - best_sim[i]);
        std::size_t pick = n;
        if (total > 0.0) {
            const double r = uniform01(rng) * total;
            double cum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double w = std::max(0.0, 1.0 - best_sim[i]);
                if (w <= 0.0) continue;
                cum += w;
                pick = i;
                if (cum > r) break;
            }
        }
        if (pick == n) {
            // Every vector already coincides with a center.
            pick = static_cast<std::size_t>(std::find(chosen.begin(), chosen.end(), 0) - chosen.begin());
        }
        take(pick);
    }
    return centers;
}

}  // namespace

KMeansResult spherical_kmeans(const std::vector<EmbeddingVector>& vectors, const KMeansOptions& opts) {
    if (vectors.empty()) throw Error(Errc::InvalidArgument, "no vectors to cluster");
    if (opts.k_p < 1) throw Error(Errc::InvalidArgument, "k_p must be >= 1");
    if (static_cast<std::size_t>(opts.k_p) > vectors.size()) {
        throw Error(Errc::TooFewVectors, "k_p=" + std::to_string(opts.k_p) + " exceeds " +
                                             std::to_string(vectors.size()) + " vectors");
    }
    const std::size_t dim = vectors.front().dim();
    for (const auto& v : vectors) {
        if (v.dim() != dim) throw Error(Errc::DimMismatch, "mixed embedding dimensions");
    }

    std::mt19937_64 rng(opts.seed);
    std::vector<EmbeddingVector> centers = seed_centers(vectors, opts.k_p, rng);
    const std::size_t n = vectors.size();
    const auto k = static_cast<std::size_t>(opts.k_p);

    KMeansResult result;
    std::vector<int> assignment(n, -1);
    std::vector<Assignment> current(n);
    for (int iter = 0; iter < std::max(1, opts.max_iters); ++iter) {
        for (std::size_t i = 0; i < n; ++i) current[i] = best_center(vectors[i], centers);
        result.iterations = iter + 1;
        bool unchanged = true;
        for (std::size_t i = 0; i < n; ++i) {
            if (assignment[i] != current[i].proto) {
                unchanged = false;
                assignment[i] = current[i].proto;
            }
        }
        if (unchanged) {
            result.converged = true;
            break;
        }

        std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            auto& s = sums[static_cast<std::size_t>(assignment[i])];
            auto vals = vectors[i].values();
            for (std::size_t d = 0; d < dim; ++d) s[d] += vals[d];
            ++counts[static_cast<std::size_t>(assignment[i])];
        }

        // Reseed candidates: worst-fitting vectors first, ties by index.
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return current[a].sim < current[b].sim; });
        std::size_t next_candidate = 0;

        for (std::size_t c = 0; c < k; ++c) {
            bool empty = counts[c] == 0 ||
                         std::all_of(sums[c].begin(), sums[c].end(), [](double x) { return x == 0.0; });
            if (!empty) {
                centers[c] = EmbeddingVector::normalized(std::span<const double>(sums[c]));
            } else {
                centers[c] = vectors[order[next_candidate % n]];
                ++next_candidate;
            }
        }
    }

    result.assignment = std::move(assignment);
    result.prototypes.seed = opts.seed;
    for (std::size_t c = 0; c < k; ++c) {
        result.prototypes.prototypes.push_back({static_cast<int>(c), std::move(centers[c])});
    }
    return result;
}

PrototypeSet learn_prototypes(const std::vector<EmbeddingVector>& vectors, int k_p, std::uint64_t seed,
                              int max_iters) {
    return spherical_kmeans(vectors, {k_p, seed, max_iters}).prototypes;
}

int default_prototype_count(std::size_t num_vectors) noexcept {
    auto r = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(num_vectors))));
    return std::max(1, r);
}

int quantize(const EmbeddingVector& v, const PrototypeSet& ps) {
    if (ps.prototypes.empty()) throw Error(Errc::InvalidArgument, "empty prototype set");
    if (v.dim() != ps.dim()) {
        throw Error(Errc::DimMismatch, "vector dim " + std::to_string(v.dim()) + " vs prototype dim " +
                                           std::to_string(ps.dim()));
    }
    int best = 0;
    double best_sim = cosine_similarity(v, ps.prototypes[0].vector);
    for (std::size_t i = 1; i < ps.prototypes.size(); ++i) {
        double s = cosine_similarity(v, ps.prototypes[i].vector);
        if (s > best_sim) {
            best_sim = s;
            best = static_cast<int>(i);
        }
    }
    return ps.prototypes[static_cast<std::size_t>(best)].proto_id;
}

std::vector<int> nearest_prototypes(const EmbeddingVector& v, const PrototypeSet& ps, int n) {
    if (ps.prototypes.empty()) throw Error(Errc::InvalidArgument, "empty prototype set");
    if (v.dim() != ps.dim()) throw Error(Errc::DimMismatch, "query dim does not match prototypes");
    std::vector<std::pair<double, int>> scored;
    scored.reserve(ps.prototypes.size());
    for (const auto& p : ps.prototypes) scored.emplace_back(cosine_similarity(v, p.vector), p.proto_id);
    const auto take = static_cast<std::size_t>(std::clamp(n, 1, ps.k_p()));
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(),
                      [](const auto& a, const auto& b) {
                          return a.first != b.first ? a.first > b.first : a.second < b.second;
                      });
    std::vector<int> ids;
    for (std::size_t i = 0; i < take; ++i) ids.push_back(scored[i].second);
    return ids;
}

}  // namespace quim
