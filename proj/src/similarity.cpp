#include "reco/similarity.hpp"

#include <algorithm>
#include <cmath>

#include "reco/parallel.hpp"

namespace reco {

double cosine(std::span<const std::uint32_t> ids_a,
              std::span<const std::uint8_t> ratings_a,
              std::span<const std::uint32_t> ids_b,
              std::span<const std::uint8_t> ratings_b) {
    // Integer dot products are exact in double, so the score does not
    // depend on accumulation order.
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < ids_a.size(); ++i)
        na += double(ratings_a[i]) * double(ratings_a[i]);
    for (std::size_t i = 0; i < ids_b.size(); ++i)
        nb += double(ratings_b[i]) * double(ratings_b[i]);
    if (na == 0.0 || nb == 0.0) return 0.0;

    std::size_t i = 0, j = 0;
    while (i < ids_a.size() && j < ids_b.size()) {
        if (ids_a[i] < ids_b[j]) {
            ++i;
        } else if (ids_a[i] > ids_b[j]) {
            ++j;
        } else {
            dot += double(ratings_a[i]) * double(ratings_b[j]);
            ++i;
            ++j;
        }
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

namespace {

// Reusable per-thread scoring scratch; reset via the touched list so a
// query costs O(rows touched), not O(total rows).
struct Scratch {
    std::vector<double> dot;
    std::vector<std::uint32_t> count;
    std::vector<std::uint32_t> touched;

    void ensure(std::size_t n) {
        if (dot.size() < n) {
            dot.resize(n, 0.0);
            count.resize(n, 0);
        }
    }
    void reset() {
        for (const auto t : touched) {
            dot[t] = 0.0;
            count[t] = 0;
        }
        touched.clear();
    }
};

thread_local Scratch tls_scratch;

struct PearsonScratch {
    std::vector<std::int64_t> slot;  // -1 = not a candidate
    std::vector<std::uint32_t> touched;

    void ensure(std::size_t n) {
        if (slot.size() < n) slot.resize(n, -1);
    }
    void reset() {
        for (const auto t : touched) slot[t] = -1;
        touched.clear();
    }
};

thread_local PearsonScratch tls_pearson_scratch;

bool score_order(const std::pair<std::uint32_t, double>& a,
                 const std::pair<std::uint32_t, double>& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
}

}  // namespace

SimilarityEngine::SimilarityEngine(const SparseRatingMatrix& matrix,
                                   SimilarityConfig config)
    : matrix_(matrix), config_(config) {
    if (config_.min_support < 1) config_.min_support = 1;
    auto norms_of = [](const SparseRatingMatrix::View& view) {
        std::vector<double> norms(view.rows());
        parallel_for(view.rows(), [&](std::size_t r) {
            double s = 0.0;
            for (const auto rating : view.row_ratings(static_cast<std::uint32_t>(r)))
                s += double(rating) * double(rating);
            norms[r] = std::sqrt(s);
        });
        return norms;
    };
    user_norms_ = norms_of(matrix.by_user);
    movie_norms_ = norms_of(matrix.by_movie);
}

NeighborList SimilarityEngine::top_k(Orientation orientation, std::uint32_t anchor,
                                     std::size_t k,
                                     std::optional<std::uint32_t> filter) const {
    const CacheKey key{orientation, anchor, k,
                       filter ? std::int64_t(*filter) : -1};
    if (config_.cache_capacity > 0) {
        std::lock_guard lock(cache_mutex_);
        auto it = cache_.find(key);
        if (it != cache_.end()) {
            it->second.second = ++cache_clock_;
            return it->second.first;
        }
    }

    const bool user_mode = orientation == Orientation::User;
    const auto& primary = user_mode ? matrix_.by_user : matrix_.by_movie;
    const auto& secondary = user_mode ? matrix_.by_movie : matrix_.by_user;
    const auto& norms = user_mode ? user_norms_ : movie_norms_;

    if (anchor >= primary.rows())
        throw std::out_of_range("similarity anchor id out of range");

    auto& scratch = tls_scratch;
    scratch.ensure(primary.rows());
    scratch.reset();

    // Inverted-index accumulation: contributions to each candidate arrive
    // in ascending item order, identical to a direct merge join.
    const auto anchor_ids = primary.row_ids(anchor);
    const auto anchor_ratings = primary.row_ratings(anchor);
    for (std::size_t i = 0; i < anchor_ids.size(); ++i) {
        const auto item = anchor_ids[i];
        const double r_anchor = anchor_ratings[i];
        const auto co_ids = secondary.row_ids(item);
        const auto co_ratings = secondary.row_ratings(item);
        for (std::size_t c = 0; c < co_ids.size(); ++c) {
            const auto other = co_ids[c];
            if (other == anchor) continue;
            if (scratch.count[other] == 0) scratch.touched.push_back(other);
            scratch.dot[other] += r_anchor * double(co_ratings[c]);
            ++scratch.count[other];
        }
    }

    const double anchor_norm = norms[anchor];
    std::vector<std::pair<std::uint32_t, double>> scored;
    auto push_candidate = [&](std::uint32_t other) {
        if (other == anchor || scratch.count[other] < config_.min_support) return;
        scored.emplace_back(other,
                            scratch.dot[other] / (anchor_norm * norms[other]));
    };
    if (filter) {
        if (*filter >= secondary.rows())
            throw std::out_of_range("similarity candidate filter id out of range");
        for (const auto other : secondary.row_ids(*filter)) push_candidate(other);
    } else {
        std::sort(scratch.touched.begin(), scratch.touched.end());
        for (const auto other : scratch.touched) push_candidate(other);
    }

    const std::size_t take = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + take, scored.end(),
                      score_order);
    scored.resize(take);

    NeighborList result{anchor, std::move(scored)};
    if (config_.cache_capacity > 0) {
        std::lock_guard lock(cache_mutex_);
        cache_[key] = {result, ++cache_clock_};
        while (cache_.size() > config_.cache_capacity) {
            auto victim = cache_.begin();
            for (auto it = cache_.begin(); it != cache_.end(); ++it)
                if (it->second.second < victim->second.second) victim = it;
            cache_.erase(victim);
        }
    }
    return result;
}

NeighborList SimilarityEngine::top_k_similar_users(
    std::uint32_t u, std::size_t k, std::optional<std::uint32_t> rated_movie) const {
    return top_k(Orientation::User, u, k, rated_movie);
}

NeighborList SimilarityEngine::top_k_similar_movies(
    std::uint32_t j, std::size_t k, std::optional<std::uint32_t> rated_by_user) const {
    return top_k(Orientation::Movie, j, k, rated_by_user);
}

namespace {

// Baseline residual of one stored cell; `row` and `col` are in the sense
// of the active orientation (row = anchor side).
inline double residual(bool user_mode, const BaselineModel& b, std::uint32_t row,
                       std::uint32_t col, double rating) {
    return user_mode ? rating - b.value(row, col) : rating - b.value(col, row);
}

inline double shrunk(double sxy, double sxx, double syy, std::uint64_t n,
                     double shrinkage) {
    if (n < 2) return 0.0;
    const double denom = std::sqrt(sxx * syy);
    if (denom == 0.0) return 0.0;
    return (sxy / denom) * (double(n) / (double(n) + shrinkage));
}

}  // namespace

double SimilarityEngine::pearson_baseline(std::uint32_t a, std::uint32_t b,
                                          const BaselineModel& baselines,
                                          double shrinkage,
                                          Orientation orientation) const {
    const bool user_mode = orientation == Orientation::User;
    const auto& view = user_mode ? matrix_.by_user : matrix_.by_movie;
    if (a >= view.rows() || b >= view.rows())
        throw std::out_of_range("pearson_baseline id out of range");
    if (baselines.b_user.size() != matrix_.user_count() ||
        baselines.b_movie.size() != matrix_.movie_count())
        throw std::invalid_argument("baseline dimensions do not match matrix");

    const auto ids_a = view.row_ids(a), ids_b = view.row_ids(b);
    const auto ra = view.row_ratings(a), rb = view.row_ratings(b);

    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    std::uint64_t n = 0;
    std::size_t i = 0, j = 0;
    while (i < ids_a.size() && j < ids_b.size()) {
        if (ids_a[i] < ids_b[j]) {
            ++i;
        } else if (ids_a[i] > ids_b[j]) {
            ++j;
        } else {
            const double x = residual(user_mode, baselines, a, ids_a[i], ra[i]);
            const double y = residual(user_mode, baselines, b, ids_b[j], rb[j]);
            sxy += x * y;
            sxx += x * x;
            syy += y * y;
            ++n;
            ++i;
            ++j;
        }
    }
    return shrunk(sxy, sxx, syy, n, shrinkage);
}

std::vector<double> SimilarityEngine::pearson_baseline_batch(
    std::uint32_t anchor, std::span<const std::uint32_t> candidates,
    const BaselineModel& baselines, double shrinkage,
    Orientation orientation) const {
    const bool user_mode = orientation == Orientation::User;
    const auto& primary = user_mode ? matrix_.by_user : matrix_.by_movie;
    const auto& secondary = user_mode ? matrix_.by_movie : matrix_.by_user;
    if (anchor >= primary.rows())
        throw std::out_of_range("pearson_baseline anchor out of range");

    auto& scratch = tls_pearson_scratch;
    scratch.ensure(primary.rows());
    scratch.reset();

    struct Acc {
        double sxy = 0.0, sxx = 0.0, syy = 0.0;
        std::uint64_t n = 0;
    };
    std::vector<Acc> accs(candidates.size());
    for (std::size_t s = 0; s < candidates.size(); ++s) {
        const auto c = candidates[s];
        if (c >= primary.rows())
            throw std::out_of_range("pearson_baseline candidate out of range");
        scratch.slot[c] = static_cast<std::int64_t>(s);
        scratch.touched.push_back(c);
    }

    const auto anchor_ids = primary.row_ids(anchor);
    const auto anchor_ratings = primary.row_ratings(anchor);
    for (std::size_t i = 0; i < anchor_ids.size(); ++i) {
        const auto item = anchor_ids[i];
        const double x = residual(user_mode, baselines, anchor, item,
                                  anchor_ratings[i]);
        const auto co_ids = secondary.row_ids(item);
        const auto co_ratings = secondary.row_ratings(item);
        for (std::size_t c = 0; c < co_ids.size(); ++c) {
            const auto other = co_ids[c];
            const auto s = scratch.slot[other];
            if (s < 0) continue;
            const double y =
                residual(user_mode, baselines, other, item, co_ratings[c]);
            auto& acc = accs[static_cast<std::size_t>(s)];
            acc.sxy += x * y;
            acc.sxx += x * x;
            acc.syy += y * y;
            ++acc.n;
        }
    }

    std::vector<double> scores(candidates.size(), 0.0);
    for (std::size_t s = 0; s < candidates.size(); ++s)
        scores[s] = shrunk(accs[s].sxy, accs[s].sxx, accs[s].syy, accs[s].n,
                           shrinkage);
    return scores;
}

}  // namespace reco
