#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "reco/features.hpp"

namespace reco {

struct GbtConfig {
    int rounds = 100;
    int max_depth = 3;
    double shrinkage = 0.1;   // eta in (0,1]
    std::size_t min_leaf = 1;
    double lambda = 1.0;      // L2 on leaf values
    std::uint64_t seed = 0;   // reserved; exact greedy fitting uses no RNG
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    double value = 0.0;  // leaf output
    double gain = 0.0;   // split gain, feeds feature_importance
    std::int32_t left = -1;
    std::int32_t right = -1;

    bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // node 0 is the root

    // Routing rule: x[feature] < threshold goes left.
    double predict(std::span<const double> x) const;
};

struct GbtModel {
    double base_score = 0.0;
    double shrinkage = 0.1;
    std::vector<RegressionTree> trees;
    std::vector<std::string> feature_schema;
    std::vector<double> round_mse;  // train MSE after each boosting round

    // prediction = base_score + shrinkage * sum of tree outputs
};

// Squared-error boosting with exact greedy splits. Each round fits one
// depth-limited tree to the current residuals; leaf value is
// sum(resid)/(count+lambda). Split gain ties break on the lowest feature
// index, then the lowest threshold, so ensembles are bit-deterministic.
GbtModel fit_gbt(const FeatureTable& table, const GbtConfig& config = {});

// Raw ensemble output (unclamped). Throws on width mismatch.
double predict_gbt(const GbtModel& model, std::span<const double> values);

// Total split gain per feature slot, aligned with feature_schema.
std::vector<double> feature_importance(const GbtModel& model);

// Rating predictor over a fitted ensemble: assembles the base feature
// vector (unless the ensemble was trained on prediction slots only),
// appends the stacked predictors in order, then clamps the ensemble
// output.
class GbtPredictor : public Predictor {
public:
    GbtPredictor(std::shared_ptr<const TrainContext> ctx,
                 AggregateStats aggregates, FeatureConfig feature_config,
                 std::vector<std::pair<std::string, std::shared_ptr<const Predictor>>>
                     stacked,
                 GbtModel model, bool include_base_features = true);

    Prediction predict(std::int32_t ext_user, std::int32_t ext_movie) const override;

    const GbtModel& model() const { return model_; }

private:
    std::shared_ptr<const TrainContext> ctx_;
    AggregateStats aggregates_;
    FeatureConfig feature_config_;
    std::vector<std::pair<std::string, std::shared_ptr<const Predictor>>> stacked_;
    std::vector<NamedPredictor> stack_view_;
    GbtModel model_;
    bool include_base_features_ = true;
};

}  // namespace reco
