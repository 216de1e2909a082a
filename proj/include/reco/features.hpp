#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "reco/predictors.hpp"

namespace reco {

// Observed-rating means. Entries exist for every dense id (a dense id
// implies at least one rating), so lookups never divide by zero.
struct AggregateStats {
    double g_avg = 0.0;
    std::vector<double> u_avg;
    std::vector<double> m_avg;
};

AggregateStats compute_aggregates(const SparseRatingMatrix& matrix);

// The susr/smvr slots carry either the neighbor's similarity score (the
// literal reading) or the neighbor's rating.
enum class NeighborFeature { Similarity, Rating };

struct FeatureConfig {
    std::size_t top_k = 5;  // neighbors per side; 13 slots at the default
    NeighborFeature neighbor_feature = NeighborFeature::Similarity;
};

// Base slot order: GAvg, UAvg, MAvg, susr_1..susr_k, smvr_1..smvr_k.
// Stacked predictor outputs append after the base slots.
struct FeatureVector {
    std::int32_t user = 0;   // external ids
    std::int32_t movie = 0;
    std::vector<double> values;
    double target = 0.0;     // meaningful only when has_target
    bool has_target = false;
    bool padded = false;     // some susr/smvr slot fell back to its pad value
};

std::vector<std::string> base_schema(const FeatureConfig& config = {});

// Builds the base vector for (user, movie), observed or not. susr slots
// hold the top-k users similar to `user` among raters of `movie`
// (descending); smvr the top-k movies similar to `movie` among movies
// `user` rated. Missing neighbors pad with 0 similarity; under the
// rating reading they pad with the side's average, then g_avg. Unknown
// ids take g_avg for their mean slot and full padding.
FeatureVector feature_vector(const TrainContext& ctx,
                             const AggregateStats& aggregates,
                             std::int32_t ext_user, std::int32_t ext_movie,
                             const FeatureConfig& config = {});

struct FeatureTable {
    std::vector<std::string> schema;  // names of value slots
    std::vector<FeatureVector> rows;

    // How many rows had at least one padded neighbor slot; surfaced so
    // runs can flag that the pad-value decision fired.
    std::uint64_t padded_rows() const;
};

// One row per observed rating, target = rating. `sample` draws that many
// rows without replacement from the observed pairs (seeded, order
// deterministic); nullopt keeps all of them. Throws if sample > nnz.
FeatureTable build_training_table(const TrainContext& ctx,
                                  const AggregateStats& aggregates,
                                  std::optional<std::uint64_t> sample,
                                  std::uint64_t seed,
                                  const FeatureConfig& config = {});

// One row per triple, features computed against the train-side context;
// targets come from the triples (e.g. the held-out test store). Same
// sampling contract as build_training_table.
FeatureTable build_table_for(const TrainContext& ctx,
                             const AggregateStats& aggregates,
                             std::span<const RatingTriple> triples,
                             std::optional<std::uint64_t> sample,
                             std::uint64_t seed,
                             const FeatureConfig& config = {});

struct NamedPredictor {
    std::string name;
    const Predictor* predictor = nullptr;
};

// Appends each predictor's (clamped) prediction for (user, movie) as one
// extra slot, in list order.
FeatureVector stack_predictions(FeatureVector base,
                                std::span<const NamedPredictor> predictors);

// Same over a whole table; extends the schema with "pred_<name>" slots.
void stack_table(FeatureTable& table,
                 std::span<const NamedPredictor> predictors);

// CSV with a header row: user,movie,<slots...>,target.
void write_feature_csv(const FeatureTable& table,
                       const std::filesystem::path& file);

}  // namespace reco
