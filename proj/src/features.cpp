#include "reco/features.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "reco/parallel.hpp"
#include "reco/rng.hpp"

namespace reco {

AggregateStats compute_aggregates(const SparseRatingMatrix& matrix) {
    if (matrix.nnz == 0)
        throw std::invalid_argument("compute_aggregates: empty matrix");

    AggregateStats agg;
    double total = 0.0;
    for (const auto r : matrix.by_user.ratings) total += r;
    agg.g_avg = total / double(matrix.nnz);

    agg.u_avg.resize(matrix.user_count());
    for (std::uint32_t u = 0; u < matrix.user_count(); ++u) {
        const auto ratings = matrix.by_user.row_ratings(u);
        double s = 0.0;
        for (const auto r : ratings) s += r;
        agg.u_avg[u] = s / double(ratings.size());
    }
    agg.m_avg.resize(matrix.movie_count());
    for (std::uint32_t j = 0; j < matrix.movie_count(); ++j) {
        const auto ratings = matrix.by_movie.row_ratings(j);
        double s = 0.0;
        for (const auto r : ratings) s += r;
        agg.m_avg[j] = s / double(ratings.size());
    }
    return agg;
}

std::vector<std::string> base_schema(const FeatureConfig& config) {
    std::vector<std::string> names = {"GAvg", "UAvg", "MAvg"};
    for (std::size_t i = 1; i <= config.top_k; ++i)
        names.push_back("susr" + std::to_string(i));
    for (std::size_t i = 1; i <= config.top_k; ++i)
        names.push_back("smvr" + std::to_string(i));
    return names;
}

FeatureVector feature_vector(const TrainContext& ctx,
                             const AggregateStats& aggregates,
                             std::int32_t ext_user, std::int32_t ext_movie,
                             const FeatureConfig& config) {
    const auto du = ctx.store.user_index.dense(ext_user);
    const auto dj = ctx.store.movie_index.dense(ext_movie);
    const std::size_t k = config.top_k;
    const bool rating_mode = config.neighbor_feature == NeighborFeature::Rating;

    FeatureVector v;
    v.user = ext_user;
    v.movie = ext_movie;
    v.values.assign(3 + 2 * k, 0.0);
    v.values[0] = aggregates.g_avg;
    v.values[1] = du ? aggregates.u_avg[*du] : aggregates.g_avg;
    v.values[2] = dj ? aggregates.m_avg[*dj] : aggregates.g_avg;

    // susr: top-k users similar to u among raters of j.
    {
        const double pad = rating_mode ? v.values[2] : 0.0;
        for (std::size_t i = 0; i < k; ++i) v.values[3 + i] = pad;
        std::size_t filled = 0;
        if (du && dj) {
            const auto list = ctx.engine->top_k_similar_users(*du, k, *dj);
            for (std::size_t i = 0; i < list.neighbors.size(); ++i) {
                const auto [neighbor, score] = list.neighbors[i];
                v.values[3 + i] =
                    rating_mode
                        ? double(*ctx.matrix.by_movie.find(*dj, neighbor))
                        : score;
            }
            filled = list.neighbors.size();
        }
        if (filled < k) v.padded = true;
    }
    // smvr: top-k movies similar to j among movies u rated.
    {
        const double pad = rating_mode ? v.values[1] : 0.0;
        for (std::size_t i = 0; i < k; ++i) v.values[3 + k + i] = pad;
        std::size_t filled = 0;
        if (du && dj) {
            const auto list = ctx.engine->top_k_similar_movies(*dj, k, *du);
            for (std::size_t i = 0; i < list.neighbors.size(); ++i) {
                const auto [neighbor, score] = list.neighbors[i];
                v.values[3 + k + i] =
                    rating_mode
                        ? double(*ctx.matrix.by_user.find(*du, neighbor))
                        : score;
            }
            filled = list.neighbors.size();
        }
        if (filled < k) v.padded = true;
    }
    return v;
}

std::uint64_t FeatureTable::padded_rows() const {
    std::uint64_t n = 0;
    for (const auto& row : rows) n += row.padded ? 1 : 0;
    return n;
}

FeatureTable build_training_table(const TrainContext& ctx,
                                  const AggregateStats& aggregates,
                                  std::optional<std::uint64_t> sample,
                                  std::uint64_t seed,
                                  const FeatureConfig& config) {
    const auto& view = ctx.matrix.by_user;
    const std::uint64_t nnz = ctx.matrix.nnz;
    if (sample && *sample > nnz)
        throw std::invalid_argument("build_training_table: sample exceeds nnz");

    std::vector<std::uint64_t> picks;
    if (sample && *sample < nnz) {
        Rng rng(seed);
        picks = rng.sample_indices(nnz, *sample);
    } else {
        picks.resize(nnz);
        for (std::uint64_t i = 0; i < nnz; ++i) picks[i] = i;
    }

    FeatureTable table;
    table.schema = base_schema(config);
    table.rows.resize(picks.size());
    parallel_for(picks.size(), [&](std::size_t i) {
        const std::uint64_t flat = picks[i];
        // offsets is ascending; the owning row is the last offset <= flat.
        const auto it = std::upper_bound(view.offsets.begin(),
                                         view.offsets.end(), flat);
        const auto u = std::uint32_t(it - view.offsets.begin() - 1);
        const std::size_t pos = flat - view.offsets[u];
        const std::uint32_t j = view.row_ids(u)[pos];

        FeatureVector row = feature_vector(
            ctx, aggregates, ctx.store.user_index.external(u),
            ctx.store.movie_index.external(j), config);
        row.target = double(view.row_ratings(u)[pos]);
        row.has_target = true;
        table.rows[i] = std::move(row);
    });
    return table;
}

FeatureTable build_table_for(const TrainContext& ctx,
                             const AggregateStats& aggregates,
                             std::span<const RatingTriple> triples,
                             std::optional<std::uint64_t> sample,
                             std::uint64_t seed,
                             const FeatureConfig& config) {
    const std::uint64_t n = triples.size();
    if (sample && *sample > n)
        throw std::invalid_argument("build_table_for: sample exceeds rows");

    std::vector<std::uint64_t> picks;
    if (sample && *sample < n) {
        Rng rng(seed);
        picks = rng.sample_indices(n, *sample);
    } else {
        picks.resize(n);
        for (std::uint64_t i = 0; i < n; ++i) picks[i] = i;
    }

    FeatureTable table;
    table.schema = base_schema(config);
    table.rows.resize(picks.size());
    parallel_for(picks.size(), [&](std::size_t i) {
        const RatingTriple& t = triples[picks[i]];
        FeatureVector row =
            feature_vector(ctx, aggregates, t.user, t.movie, config);
        row.target = double(t.rating);
        row.has_target = true;
        table.rows[i] = std::move(row);
    });
    return table;
}

FeatureVector stack_predictions(FeatureVector base,
                                std::span<const NamedPredictor> predictors) {
    for (const auto& np : predictors)
        base.values.push_back(np.predictor->predict(base.user, base.movie).value);
    return base;
}

void stack_table(FeatureTable& table,
                 std::span<const NamedPredictor> predictors) {
    for (const auto& np : predictors)
        table.schema.push_back("pred_" + np.name);
    parallel_for(table.rows.size(), [&](std::size_t i) {
        table.rows[i] = stack_predictions(std::move(table.rows[i]), predictors);
    });
}

void write_feature_csv(const FeatureTable& table,
                       const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    out << "user,movie";
    for (const auto& name : table.schema) out << ',' << name;
    out << ",target\n";
    char buf[32];
    for (const auto& row : table.rows) {
        out << row.user << ',' << row.movie;
        for (const double v : row.values) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out << ',' << buf;
        }
        if (row.has_target) {
            std::snprintf(buf, sizeof buf, "%.17g", row.target);
            out << ',' << buf << '\n';
        } else {
            out << ",\n";
        }
    }
    if (!out) throw std::runtime_error("short write to " + file.string());
}

}  // namespace reco
