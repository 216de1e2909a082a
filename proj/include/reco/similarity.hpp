#pragma once

#include <cstdint>
#include <list>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "reco/baseline.hpp"
#include "reco/dataset.hpp"

namespace reco {

enum class Orientation { User, Movie };
enum class SimMeasure { Cosine, PearsonBaseline };

// Top-k result for one anchor. Scores sorted descending, ties broken by
// ascending neighbor id; the anchor never appears.
struct NeighborList {
    std::uint32_t anchor = 0;
    std::vector<std::pair<std::uint32_t, double>> neighbors;
};

// Plain sparse cosine over (id, rating) rows; 0 when either norm is 0.
double cosine(std::span<const std::uint32_t> ids_a,
              std::span<const std::uint8_t> ratings_a,
              std::span<const std::uint32_t> ids_b,
              std::span<const std::uint8_t> ratings_b);

struct SimilarityConfig {
    double shrinkage = 100.0;   // pearson-baseline damping
    std::uint32_t min_support = 1;  // minimum co-rating count for cosine top-k
    std::size_t cache_capacity = 0;  // 0 disables the neighbor-list memo
};

// On-demand top-k similarity queries over an immutable matrix. There is
// deliberately no m x m precomputation: at Netflix scale that was measured
// in weeks, while one query only has to touch rows that overlap the
// anchor. Scoring walks the anchor's row through the opposite orientation
// (an inverted index), so users or movies with no common support are
// never visited.
class SimilarityEngine {
public:
    explicit SimilarityEngine(const SparseRatingMatrix& matrix,
                              SimilarityConfig config = {});

    // Cosine top-k among users who overlap u; when rated_movie is set,
    // candidates are restricted to raters of that movie (the feature
    // vector's "similar users that rated m_j").
    NeighborList top_k_similar_users(std::uint32_t u, std::size_t k,
                                     std::optional<std::uint32_t> rated_movie = {}) const;

    // Symmetric: movies overlapping j, optionally restricted to movies
    // rated by rated_by_user.
    NeighborList top_k_similar_movies(std::uint32_t j, std::size_t k,
                                      std::optional<std::uint32_t> rated_by_user = {}) const;

    // Shrunk correlation of baseline residuals over the co-rated support:
    //   sum(x*y) / sqrt(sum(x^2) * sum(y^2)) * n / (n + shrinkage)
    // with x, y the residuals r - b of the two anchors. Returns 0 when
    // fewer than 2 co-ratings or a residual vector is identically 0.
    double pearson_baseline(std::uint32_t a, std::uint32_t b,
                            const BaselineModel& baselines, double shrinkage,
                            Orientation orientation) const;

    // Pearson-baseline scores of `anchor` against each candidate, in
    // candidate order. Used by the KNN predictors; one inverted-index walk
    // scores the whole candidate set.
    std::vector<double> pearson_baseline_batch(
        std::uint32_t anchor, std::span<const std::uint32_t> candidates,
        const BaselineModel& baselines, double shrinkage,
        Orientation orientation) const;

    const SparseRatingMatrix& matrix() const { return matrix_; }
    const SimilarityConfig& config() const { return config_; }

private:
    NeighborList top_k(Orientation orientation, std::uint32_t anchor, std::size_t k,
                       std::optional<std::uint32_t> filter) const;

    const SparseRatingMatrix& matrix_;
    SimilarityConfig config_;
    std::vector<double> user_norms_;
    std::vector<double> movie_norms_;

    // Bounded LRU memo of neighbor lists. Purely an accelerator: eviction
    // cannot change results because entries are only ever recomputed from
    // the same immutable matrix.
    struct CacheKey {
        Orientation orientation;
        std::uint32_t anchor;
        std::uint64_t k;
        std::int64_t filter;  // -1 = none
        auto operator<=>(const CacheKey&) const = default;
    };
    mutable std::mutex cache_mutex_;
    mutable std::map<CacheKey, std::pair<NeighborList, std::uint64_t>> cache_;
    mutable std::uint64_t cache_clock_ = 0;
};

}  // namespace reco
