#include "reco/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "reco/date.hpp"

namespace reco {

double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty())
        throw std::invalid_argument("quantile_sorted: empty input");
    if (p < 0.0 || p > 1.0)
        throw std::invalid_argument("quantile_sorted: p outside [0,1]");
    const double h = double(sorted.size() - 1) * p;
    const std::size_t lo = std::size_t(h);
    const double frac = h - double(lo);
    if (frac == 0.0 || lo + 1 == sorted.size()) return sorted[lo];
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

namespace {

// Type-7 quantile of the multiset described by star counts, without
// materializing it. x[i] is recovered from cumulative counts.
double quantile_from_histogram(const std::array<std::uint64_t, 5>& counts,
                               double p) {
    std::uint64_t n = 0;
    for (const auto c : counts) n += c;
    if (n == 0) return 0.0;

    auto value_at = [&](std::uint64_t index) {
        std::uint64_t cum = 0;
        for (int s = 1; s <= 5; ++s) {
            cum += counts[s - 1];
            if (index < cum) return double(s);
        }
        return 5.0;
    };

    const double h = double(n - 1) * p;
    const auto lo = std::uint64_t(h);
    const double frac = h - double(lo);
    const double a = value_at(lo);
    if (frac == 0.0 || lo + 1 == n) return a;
    return a + frac * (value_at(lo + 1) - a);
}

QuantileTable count_quantiles(const SparseRatingMatrix::View& view,
                              std::uint64_t nnz) {
    if (view.rows() == 0)
        throw std::invalid_argument("activity quantiles: empty matrix");
    std::vector<double> sizes(view.rows());
    for (std::uint32_t r = 0; r < view.rows(); ++r)
        sizes[r] = double(view.row_size(r));
    std::sort(sizes.begin(), sizes.end());

    QuantileTable t;
    t.min = sizes.front();
    t.q25 = quantile_sorted(sizes, 0.25);
    t.median = quantile_sorted(sizes, 0.5);
    t.q75 = quantile_sorted(sizes, 0.75);
    t.max = sizes.back();
    t.mean = double(nnz) / double(view.rows());
    return t;
}

}  // namespace

RatingHistogram rating_distribution(const SparseRatingMatrix& matrix) {
    RatingHistogram h;
    for (const auto r : matrix.by_user.ratings) ++h.counts[r - 1];
    return h;
}

QuantileTable user_activity_quantiles(const SparseRatingMatrix& matrix) {
    return count_quantiles(matrix.by_user, matrix.nnz);
}

QuantileTable movie_popularity_quantiles(const SparseRatingMatrix& matrix) {
    return count_quantiles(matrix.by_movie, matrix.nnz);
}

WeekdayReport weekday_analysis(const RatingStore& store) {
    // 7x5 star histogram; quartiles come from the histogram rather than
    // a sorted copy of up to 100M ratings.
    std::array<std::array<std::uint64_t, 5>, 7> stars{};
    WeekdayReport report;
    for (const auto& t : store.triples) {
        const int wd = weekday_of_day(t.day);
        ++report.counts[wd];
        ++stars[wd][t.rating - 1];
    }
    for (int wd = 0; wd < 7; ++wd) {
        if (report.counts[wd] == 0) continue;
        FiveNumber& f = report.rating_quartiles[wd];
        f.min = quantile_from_histogram(stars[wd], 0.0);
        f.q1 = quantile_from_histogram(stars[wd], 0.25);
        f.median = quantile_from_histogram(stars[wd], 0.5);
        f.q3 = quantile_from_histogram(stars[wd], 0.75);
        f.max = quantile_from_histogram(stars[wd], 1.0);
    }
    return report;
}

double sparsity(const SparseRatingMatrix& matrix) {
    const double cells =
        double(matrix.user_count()) * double(matrix.movie_count());
    if (cells == 0.0)
        throw std::invalid_argument("sparsity: zero-dimension matrix");
    return 100.0 * (1.0 - double(matrix.nnz) / cells);
}

ColdStart cold_start_report(const RatingStore& train, const RatingStore& test) {
    auto count_missing = [](const IdIndex& train_ids, const IdIndex& test_ids,
                            std::uint64_t& missing, double& percent) {
        missing = 0;
        std::uint64_t total = train_ids.size();
        for (const auto ext : test_ids.externals()) {
            if (!train_ids.contains(ext)) {
                ++missing;
                ++total;  // test-only id extends the union
            }
        }
        percent = total == 0 ? 0.0 : 100.0 * double(missing) / double(total);
    };

    ColdStart cs;
    count_missing(train.user_index, test.user_index, cs.users_missing,
                  cs.users_percent);
    count_missing(train.movie_index, test.movie_index, cs.movies_missing,
                  cs.movies_percent);
    return cs;
}

EdaReport build_eda_report(const RatingStore& train,
                           const SparseRatingMatrix& matrix,
                           const RatingStore* test) {
    EdaReport report;
    report.rating_histogram = rating_distribution(matrix);
    report.per_user_count_quantiles = user_activity_quantiles(matrix);
    const auto wd = weekday_analysis(train);
    report.weekday_counts = wd.counts;
    report.weekday_rating_quartiles = wd.rating_quartiles;
    report.sparsity_percent = sparsity(matrix);
    if (test) report.cold_start = cold_start_report(train, *test);
    return report;
}

}  // namespace reco
