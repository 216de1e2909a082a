#include "reco/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "reco/numeric.hpp"
#include "reco/parallel.hpp"

namespace reco {

double RegressionTree::predict(std::span<const double> x) const {
    std::int32_t at = 0;
    while (!nodes[at].is_leaf()) {
        const TreeNode& n = nodes[at];
        at = x[n.feature] < n.threshold ? n.left : n.right;
    }
    return nodes[at].value;
}

namespace {

struct SplitChoice {
    double gain = 0.0;
    double threshold = 0.0;
    bool valid = false;
};

class TreeBuilder {
public:
    TreeBuilder(const std::vector<std::vector<double>>& cols,
                const std::vector<double>& resid, const GbtConfig& config)
        : cols_(cols), resid_(resid), config_(config) {}

    // Builds the tree and writes each sample's leaf value into out[i].
    RegressionTree run(std::vector<double>& out) {
        std::vector<std::uint32_t> all(resid_.size());
        for (std::uint32_t i = 0; i < all.size(); ++i) all[i] = i;
        out_ = &out;
        build(all, 0);
        return std::move(tree_);
    }

private:
    std::int32_t build(std::vector<std::uint32_t>& idx, int depth) {
        const auto id = std::int32_t(tree_.nodes.size());
        tree_.nodes.emplace_back();

        double sum = 0.0;
        for (const auto i : idx) sum += resid_[i];
        const double n = double(idx.size());
        const double leaf_value = sum / (n + config_.lambda);

        SplitChoice best;
        int best_feature = -1;
        if (depth < config_.max_depth && idx.size() >= 2 * config_.min_leaf) {
            const double parent_score = sum * sum / (n + config_.lambda);
            std::vector<SplitChoice> per_feature(cols_.size());
            parallel_for(cols_.size(), [&](std::size_t f) {
                per_feature[f] = best_split(idx, f, sum, parent_score);
            });
            for (std::size_t f = 0; f < per_feature.size(); ++f) {
                if (per_feature[f].valid && per_feature[f].gain > best.gain) {
                    best = per_feature[f];
                    best_feature = int(f);
                }
            }
        }

        if (best_feature < 0) {
            TreeNode& node = tree_.nodes[id];
            node.value = leaf_value;
            for (const auto i : idx) (*out_)[i] = leaf_value;
            return id;
        }

        std::vector<std::uint32_t> left, right;
        left.reserve(idx.size());
        for (const auto i : idx) {
            (cols_[best_feature][i] < best.threshold ? left : right).push_back(i);
        }
        idx.clear();
        idx.shrink_to_fit();

        const auto left_id = build(left, depth + 1);
        const auto right_id = build(right, depth + 1);
        TreeNode& node = tree_.nodes[id];
        node.feature = best_feature;
        node.threshold = best.threshold;
        node.gain = best.gain;
        node.left = left_id;
        node.right = right_id;
        return id;
    }

    SplitChoice best_split(const std::vector<std::uint32_t>& idx, std::size_t f,
                           double total, double parent_score) const {
        const auto& col = cols_[f];
        // (value, residual) pairs sorted by value; equal values stay in
        // idx order, which keeps the prefix sums deterministic.
        std::vector<std::pair<double, double>> pts;
        pts.reserve(idx.size());
        for (const auto i : idx) pts.emplace_back(col[i], resid_[i]);
        std::stable_sort(pts.begin(), pts.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });

        SplitChoice best;
        const double n = double(idx.size());
        double left_sum = 0.0;
        for (std::size_t t = 0; t + 1 < pts.size(); ++t) {
            left_sum += pts[t].second;
            if (pts[t].first == pts[t + 1].first) continue;  // no boundary here
            const double n_left = double(t + 1);
            const double n_right = n - n_left;
            if (n_left < double(config_.min_leaf) ||
                n_right < double(config_.min_leaf))
                continue;
            const double right_sum = total - left_sum;
            const double gain = left_sum * left_sum / (n_left + config_.lambda) +
                                right_sum * right_sum / (n_right + config_.lambda) -
                                parent_score;
            // Strict > keeps the lowest qualifying threshold on gain ties.
            if (gain > best.gain && gain > 0.0) {
                best.gain = gain;
                best.threshold = pts[t].first + (pts[t + 1].first - pts[t].first) / 2.0;
                best.valid = true;
            }
        }
        return best;
    }

    const std::vector<std::vector<double>>& cols_;
    const std::vector<double>& resid_;
    const GbtConfig& config_;
    RegressionTree tree_;
    std::vector<double>* out_ = nullptr;
};

}  // namespace

GbtModel fit_gbt(const FeatureTable& table, const GbtConfig& config) {
    const std::size_t n = table.rows.size();
    const std::size_t width = table.schema.size();
    if (n == 0) throw std::invalid_argument("fit_gbt: empty table");
    if (config.rounds < 1) throw std::invalid_argument("fit_gbt: rounds < 1");
    if (config.max_depth < 0) throw std::invalid_argument("fit_gbt: negative depth");
    if (config.shrinkage <= 0.0 || config.shrinkage > 1.0)
        throw std::invalid_argument("fit_gbt: shrinkage outside (0,1]");
    if (config.min_leaf < 1) throw std::invalid_argument("fit_gbt: min_leaf < 1");
    if (config.lambda < 0.0) throw std::invalid_argument("fit_gbt: negative lambda");

    // Column-major copy for cache-friendly split scans.
    std::vector<std::vector<double>> cols(width, std::vector<double>(n));
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        const FeatureVector& row = table.rows[i];
        if (row.values.size() != width)
            throw std::invalid_argument("fit_gbt: inconsistent row width");
        if (!row.has_target)
            throw std::invalid_argument("fit_gbt: row without target");
        if (!std::isfinite(row.target))
            throw std::invalid_argument("fit_gbt: non-finite target");
        for (std::size_t f = 0; f < width; ++f) {
            if (!std::isfinite(row.values[f]))
                throw std::invalid_argument("fit_gbt: non-finite feature");
            cols[f][i] = row.values[f];
        }
        y[i] = row.target;
    }

    GbtModel model;
    model.shrinkage = config.shrinkage;
    model.feature_schema = table.schema;
    double base = 0.0;
    for (const auto v : y) base += v;
    model.base_score = base / double(n);

    std::vector<double> pred(n, model.base_score);
    std::vector<double> resid(n);
    std::vector<double> tree_out(n);

    for (int round = 0; round < config.rounds; ++round) {
        for (std::size_t i = 0; i < n; ++i) resid[i] = y[i] - pred[i];
        TreeBuilder builder(cols, resid, config);
        model.trees.push_back(builder.run(tree_out));
        for (std::size_t i = 0; i < n; ++i)
            pred[i] += config.shrinkage * tree_out[i];

        std::vector<double> sq(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double e = y[i] - pred[i];
            sq[i] = e * e;
        }
        model.round_mse.push_back(pairwise_sum(sq) / double(n));
    }
    return model;
}

double predict_gbt(const GbtModel& model, std::span<const double> values) {
    if (values.size() != model.feature_schema.size())
        throw std::invalid_argument("predict_gbt: width mismatch");
    double acc = 0.0;
    for (const auto& tree : model.trees) acc += tree.predict(values);
    return model.base_score + model.shrinkage * acc;
}

std::vector<double> feature_importance(const GbtModel& model) {
    std::vector<double> imp(model.feature_schema.size(), 0.0);
    for (const auto& tree : model.trees)
        for (const auto& node : tree.nodes)
            if (!node.is_leaf()) imp[node.feature] += node.gain;
    return imp;
}

GbtPredictor::GbtPredictor(
    std::shared_ptr<const TrainContext> ctx, AggregateStats aggregates,
    FeatureConfig feature_config,
    std::vector<std::pair<std::string, std::shared_ptr<const Predictor>>> stacked,
    GbtModel model, bool include_base_features)
    : ctx_(std::move(ctx)),
      aggregates_(std::move(aggregates)),
      feature_config_(feature_config),
      stacked_(std::move(stacked)),
      model_(std::move(model)),
      include_base_features_(include_base_features) {
    stack_view_.reserve(stacked_.size());
    for (const auto& [name, predictor] : stacked_)
        stack_view_.push_back({name, predictor.get()});
}

Prediction GbtPredictor::predict(std::int32_t ext_user,
                                 std::int32_t ext_movie) const {
    FeatureVector base;
    if (include_base_features_) {
        base = feature_vector(*ctx_, aggregates_, ext_user, ext_movie,
                              feature_config_);
    } else {
        base.user = ext_user;
        base.movie = ext_movie;
    }
    FeatureVector v = stack_predictions(std::move(base), stack_view_);
    const double raw = predict_gbt(model_, v.values);

    const bool knows_user = ctx_->store.user_index.contains(ext_user);
    const bool knows_movie = ctx_->store.movie_index.contains(ext_movie);
    Prediction p;
    p.user = ext_user;
    p.movie = ext_movie;
    p.value = clamp_rating(raw);
    p.was_clamped = p.value != raw;
    p.fallback_level = knows_user && knows_movie ? FallbackLevel::Full
                       : knows_user              ? FallbackLevel::UserOnly
                       : knows_movie             ? FallbackLevel::MovieOnly
                                                 : FallbackLevel::Global;
    return p;
}

}  // namespace reco
