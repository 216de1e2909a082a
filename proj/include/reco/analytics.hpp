#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>

#include "reco/dataset.hpp"

namespace reco {

// Type-7 (linear interpolation) quantile of an ascending sequence:
// h = (n-1)p, result = x[floor(h)] + frac(h) * (x[floor(h)+1] - x[floor(h)]).
double quantile_sorted(std::span<const double> sorted, double p);

struct RatingHistogram {
    std::array<std::uint64_t, 5> counts{};  // index i holds star i+1

    std::uint64_t total() const {
        std::uint64_t t = 0;
        for (const auto c : counts) t += c;
        return t;
    }
    // Most frequent star; the lower star wins a tie.
    int modal_star() const {
        int best = 1;
        for (int s = 2; s <= 5; ++s)
            if (counts[s - 1] > counts[best - 1]) best = s;
        return best;
    }
};

struct QuantileTable {
    double min = 0.0;
    double q25 = 0.0;
    double median = 0.0;
    double q75 = 0.0;
    double max = 0.0;
    double mean = 0.0;
};

// Five-number summary (boxplot) of the star ratings in one bucket.
struct FiveNumber {
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
};

struct ColdStart {
    std::uint64_t users_missing = 0;   // distinct test users absent from train
    double users_percent = 0.0;        // of distinct users in train+test
    std::uint64_t movies_missing = 0;
    double movies_percent = 0.0;
};

struct EdaReport {
    RatingHistogram rating_histogram;
    QuantileTable per_user_count_quantiles;
    std::array<std::uint64_t, 7> weekday_counts{};  // Monday = 0
    std::array<FiveNumber, 7> weekday_rating_quartiles{};
    double sparsity_percent = 0.0;
    std::optional<ColdStart> cold_start;
};

RatingHistogram rating_distribution(const SparseRatingMatrix& matrix);

// Quantiles of the per-user rating counts. Throws on an empty matrix.
QuantileTable user_activity_quantiles(const SparseRatingMatrix& matrix);

// Same summary over per-movie rating counts (popularity).
QuantileTable movie_popularity_quantiles(const SparseRatingMatrix& matrix);

struct WeekdayReport {
    std::array<std::uint64_t, 7> counts{};
    std::array<FiveNumber, 7> rating_quartiles{};  // zeros for empty buckets
};

WeekdayReport weekday_analysis(const RatingStore& store);

// 100 * (1 - nnz / (users * movies)). Throws if either dimension is zero.
double sparsity(const SparseRatingMatrix& matrix);

// Counts of test-only ids; percentages against the distinct ids of
// train and test combined.
ColdStart cold_start_report(const RatingStore& train, const RatingStore& test);

// Full report over a training store/matrix; cold_start is filled when a
// test store is supplied.
EdaReport build_eda_report(const RatingStore& train,
                           const SparseRatingMatrix& matrix,
                           const RatingStore* test = nullptr);

}  // namespace reco
