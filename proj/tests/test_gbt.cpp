#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "reco/gbt.hpp"
#include "reco/numeric.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using doctest::Approx;

namespace {

reco::FeatureTable make_table(std::vector<std::vector<double>> rows,
                              std::vector<double> targets) {
    reco::FeatureTable table;
    const std::size_t width = rows.empty() ? 0 : rows[0].size();
    for (std::size_t f = 0; f < width; ++f)
        table.schema.push_back("f" + std::to_string(f));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        reco::FeatureVector v;
        v.user = std::int32_t(i) + 1;
        v.movie = 1;
        v.values = std::move(rows[i]);
        v.target = targets[i];
        v.has_target = true;
        table.rows.push_back(std::move(v));
    }
    return table;
}

// Quantized values make duplicate feature levels (and therefore skipped
// boundaries) common instead of measure-zero.
reco::FeatureTable random_table(reco::Rng& rng, std::size_t max_rows = 60,
                                std::size_t max_width = 6) {
    const std::size_t n = 8 + std::size_t(rng.uniform_below(max_rows - 7));
    const std::size_t width = 2 + std::size_t(rng.uniform_below(max_width - 1));
    std::vector<std::vector<double>> rows(n, std::vector<double>(width));
    std::vector<double> targets(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t f = 0; f < width; ++f) {
            const double v = rng.uniform01() * 4.0 - 2.0;
            rows[i][f] = f % 2 == 0 ? std::round(v * 4.0) / 4.0 : v;
        }
        targets[i] = 1.0 + rng.uniform01() * 4.0;
    }
    return make_table(std::move(rows), std::move(targets));
}

// Rows reaching each split child, recomputed from scratch.
void check_min_leaf(const reco::RegressionTree& tree,
                    const reco::FeatureTable& table, std::size_t min_leaf) {
    std::vector<std::vector<std::uint32_t>> reach(tree.nodes.size());
    for (std::uint32_t i = 0; i < table.rows.size(); ++i) reach[0].push_back(i);
    for (std::size_t at = 0; at < tree.nodes.size(); ++at) {
        const auto& node = tree.nodes[at];
        if (node.is_leaf()) continue;
        for (const auto i : reach[at]) {
            const bool left =
                table.rows[i].values[std::size_t(node.feature)] < node.threshold;
            reach[std::size_t(left ? node.left : node.right)].push_back(i);
        }
        CHECK(reach[std::size_t(node.left)].size() >= min_leaf);
        CHECK(reach[std::size_t(node.right)].size() >= min_leaf);
    }
}

}  // namespace

TEST_CASE("gbt fit rejects malformed tables and configs") {
    auto table = make_table({{1.0, 2.0}, {3.0, 4.0}}, {1.0, 2.0});

    CHECK_THROWS_AS(reco::fit_gbt(reco::FeatureTable{}), std::invalid_argument);

    reco::GbtConfig cfg;
    cfg.rounds = 0;
    CHECK_THROWS_AS(reco::fit_gbt(table, cfg), std::invalid_argument);
    cfg = {};
    cfg.max_depth = -1;
    CHECK_THROWS_AS(reco::fit_gbt(table, cfg), std::invalid_argument);
    cfg = {};
    cfg.shrinkage = 0.0;
    CHECK_THROWS_AS(reco::fit_gbt(table, cfg), std::invalid_argument);
    cfg.shrinkage = 1.25;
    CHECK_THROWS_AS(reco::fit_gbt(table, cfg), std::invalid_argument);
    cfg = {};
    cfg.min_leaf = 0;
    CHECK_THROWS_AS(reco::fit_gbt(table, cfg), std::invalid_argument);
    cfg = {};
    cfg.lambda = -0.5;
    CHECK_THROWS_AS(reco::fit_gbt(table, cfg), std::invalid_argument);

    auto ragged = table;
    ragged.rows[1].values.pop_back();
    CHECK_THROWS_AS(reco::fit_gbt(ragged), std::invalid_argument);

    auto untargeted = table;
    untargeted.rows[0].has_target = false;
    CHECK_THROWS_AS(reco::fit_gbt(untargeted), std::invalid_argument);

    auto poisoned = table;
    poisoned.rows[0].values[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(reco::fit_gbt(poisoned), std::invalid_argument);
    poisoned = table;
    poisoned.rows[1].target = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(reco::fit_gbt(poisoned), std::invalid_argument);
}

TEST_CASE("a single stump reproduces the closed-form leaves and gain") {
    const auto table =
        make_table({{0.0}, {0.0}, {1.0}, {1.0}}, {1.0, 2.0, 4.0, 6.0});
    reco::GbtConfig cfg;
    cfg.rounds = 1;
    cfg.max_depth = 1;
    cfg.shrinkage = 1.0;
    cfg.lambda = 1.0;
    const auto model = reco::fit_gbt(table, cfg);

    CHECK(model.base_score == Approx(3.25));
    REQUIRE(model.trees.size() == 1);
    const auto& tree = model.trees[0];
    REQUIRE(tree.nodes.size() == 3);

    const auto& root = tree.nodes[0];
    CHECK(root.feature == 0);
    CHECK(root.threshold == 0.5);
    // residuals {-2.25, -1.25, 0.75, 2.75}; parent score is zero because
    // the base score already removed the mean.
    const double left_sum = -3.5, right_sum = 3.5;
    CHECK(root.gain ==
          Approx(left_sum * left_sum / 3.0 + right_sum * right_sum / 3.0));
    CHECK(tree.nodes[std::size_t(root.left)].value == Approx(left_sum / 3.0));
    CHECK(tree.nodes[std::size_t(root.right)].value == Approx(right_sum / 3.0));

    const double lo = reco::predict_gbt(model, std::vector<double>{0.0});
    const double hi = reco::predict_gbt(model, std::vector<double>{1.0});
    CHECK(lo == Approx(3.25 + left_sum / 3.0));
    CHECK(hi == Approx(3.25 + right_sum / 3.0));

    double mse = 0.0;
    for (const auto& row : table.rows) {
        const double pred = row.values[0] < 0.5 ? lo : hi;
        mse += (row.target - pred) * (row.target - pred);
    }
    REQUIRE(model.round_mse.size() == 1);
    CHECK(model.round_mse[0] == Approx(mse / 4.0).epsilon(1e-12));

    const auto imp = reco::feature_importance(model);
    REQUIRE(imp.size() == 1);
    CHECK(imp[0] == Approx(root.gain));
}

TEST_CASE("the root split matches the exhaustive oracle") {
    reco::Rng rng(3109);
    for (int trial = 0; trial < 40; ++trial) {
        const auto table = random_table(rng);
        reco::GbtConfig cfg;
        cfg.rounds = 1;
        cfg.max_depth = 1;
        cfg.min_leaf = 1 + std::size_t(rng.uniform_below(3));
        cfg.lambda = rng.uniform01() * 2.0;
        const auto model = reco::fit_gbt(table, cfg);

        std::vector<std::vector<double>> rows;
        std::vector<double> resid;
        for (const auto& row : table.rows) {
            rows.push_back(row.values);
            resid.push_back(row.target - model.base_score);
        }
        const auto expect =
            oracle::best_split(rows, resid, cfg.min_leaf, cfg.lambda);

        const auto& root = model.trees[0].nodes[0];
        if (!expect.valid) {
            CHECK(root.is_leaf());
            continue;
        }
        REQUIRE_FALSE(root.is_leaf());
        CHECK(root.feature == expect.feature);
        CHECK(root.threshold == expect.threshold);
        CHECK(root.gain == Approx(expect.gain).epsilon(1e-9));
    }
}

TEST_CASE("boosting never increases training mse and tracks its own predictions") {
    reco::Rng rng(3203);
    for (int trial = 0; trial < 6; ++trial) {
        const auto table = random_table(rng);
        reco::GbtConfig cfg;
        cfg.rounds = 40;
        cfg.max_depth = 3;
        const auto model = reco::fit_gbt(table, cfg);

        REQUIRE(model.round_mse.size() == 40);
        for (std::size_t r = 1; r < model.round_mse.size(); ++r)
            CHECK(model.round_mse[r] <= model.round_mse[r - 1]);

        double mse = 0.0;
        for (const auto& row : table.rows) {
            const double e = row.target - reco::predict_gbt(model, row.values);
            mse += e * e;
        }
        mse /= double(table.rows.size());
        CHECK(model.round_mse.back() == Approx(mse).epsilon(1e-9));
    }
}

TEST_CASE("min_leaf bounds every split child over the training partition") {
    reco::Rng rng(3301);
    for (int trial = 0; trial < 6; ++trial) {
        const auto table = random_table(rng);
        reco::GbtConfig cfg;
        cfg.rounds = 10;
        cfg.max_depth = 4;
        cfg.min_leaf = 5;
        const auto model = reco::fit_gbt(table, cfg);
        for (const auto& tree : model.trees)
            check_min_leaf(tree, table, cfg.min_leaf);
    }
}

TEST_CASE("fitting is bit-deterministic") {
    reco::Rng rng(3407);
    const auto table = random_table(rng, 50, 5);
    reco::GbtConfig cfg;
    cfg.rounds = 25;
    const auto a = reco::fit_gbt(table, cfg);
    const auto b = reco::fit_gbt(table, cfg);

    CHECK(a.base_score == b.base_score);
    CHECK(a.round_mse == b.round_mse);
    REQUIRE(a.trees.size() == b.trees.size());
    for (std::size_t t = 0; t < a.trees.size(); ++t) {
        const auto& ta = a.trees[t].nodes;
        const auto& tb = b.trees[t].nodes;
        REQUIRE(ta.size() == tb.size());
        for (std::size_t i = 0; i < ta.size(); ++i) {
            CHECK(ta[i].feature == tb[i].feature);
            CHECK(ta[i].threshold == tb[i].threshold);
            CHECK(ta[i].value == tb[i].value);
            CHECK(ta[i].gain == tb[i].gain);
            CHECK(ta[i].left == tb[i].left);
            CHECK(ta[i].right == tb[i].right);
        }
    }
}

TEST_CASE("ensemble prediction validates width and sums gains per feature") {
    reco::Rng rng(3511);
    const auto table = random_table(rng, 40, 4);
    reco::GbtConfig cfg;
    cfg.rounds = 15;
    const auto model = reco::fit_gbt(table, cfg);

    std::vector<double> narrow(table.schema.size() - 1, 0.0);
    CHECK_THROWS_AS(reco::predict_gbt(model, narrow), std::invalid_argument);

    std::vector<double> gains(table.schema.size(), 0.0);
    for (const auto& tree : model.trees)
        for (const auto& node : tree.nodes)
            if (!node.is_leaf()) {
                CHECK(node.gain > 0.0);
                gains[std::size_t(node.feature)] += node.gain;
            }
    const auto imp = reco::feature_importance(model);
    REQUIRE(imp.size() == gains.size());
    for (std::size_t f = 0; f < gains.size(); ++f)
        CHECK(imp[f] == Approx(gains[f]).epsilon(1e-12));
}

TEST_CASE("gbt predictor assembles features, stacks, clamps, and stratifies") {
    reco::Rng rng(3607);
    const auto store = testsup::random_store(rng, 20, 12);
    const auto ctx = reco::TrainContext::build(store);
    const auto agg = reco::compute_aggregates(ctx->matrix);
    const auto bias =
        std::make_shared<reco::BaselinePredictor>(ctx, reco::fit_baseline(ctx->matrix));

    reco::FeatureConfig fcfg;
    auto table = reco::build_training_table(*ctx, agg, std::nullopt, 1, fcfg);
    const reco::NamedPredictor named[] = {{"baseline", bias.get()}};
    reco::stack_table(table, named);

    reco::GbtConfig gcfg;
    gcfg.rounds = 12;
    auto model = reco::fit_gbt(table, gcfg);
    const reco::GbtPredictor pred(ctx, agg, fcfg, {{"baseline", bias}}, model);

    for (int q = 0; q < 20; ++q) {
        const auto du = std::uint32_t(rng.uniform_below(ctx->matrix.user_count()));
        const auto dj = std::uint32_t(rng.uniform_below(ctx->matrix.movie_count()));
        const auto eu = ctx->store.user_index.external(du);
        const auto ej = ctx->store.movie_index.external(dj);

        auto v = reco::feature_vector(*ctx, agg, eu, ej, fcfg);
        v.values.push_back(bias->predict(eu, ej).value);
        const double raw = reco::predict_gbt(model, v.values);

        const auto got = pred.predict(eu, ej);
        CHECK(got.value == Approx(reco::clamp_rating(raw)).epsilon(1e-12));
        CHECK(got.fallback_level == reco::FallbackLevel::Full);
    }

    const auto strange = pred.predict(99999, ctx->store.movie_index.external(0));
    CHECK(strange.fallback_level == reco::FallbackLevel::MovieOnly);
    CHECK(pred.predict(99999, 99999).fallback_level ==
          reco::FallbackLevel::Global);

    // Prediction-slot-only ensembles skip the base features entirely.
    reco::FeatureTable preds_only;
    preds_only.schema = {"pred_baseline"};
    for (const auto& row : table.rows) {
        reco::FeatureVector v;
        v.user = row.user;
        v.movie = row.movie;
        v.values = {row.values.back()};
        v.target = row.target;
        v.has_target = true;
        preds_only.rows.push_back(std::move(v));
    }
    auto narrow_model = reco::fit_gbt(preds_only, gcfg);
    const reco::GbtPredictor narrow(ctx, agg, fcfg, {{"baseline", bias}},
                                    narrow_model, false);
    for (int q = 0; q < 10; ++q) {
        const auto eu = ctx->store.user_index.external(
            std::uint32_t(rng.uniform_below(ctx->matrix.user_count())));
        const auto ej = ctx->store.movie_index.external(
            std::uint32_t(rng.uniform_below(ctx->matrix.movie_count())));
        const std::vector<double> only{bias->predict(eu, ej).value};
        const double raw = reco::predict_gbt(narrow_model, only);
        CHECK(narrow.predict(eu, ej).value ==
              Approx(reco::clamp_rating(raw)).epsilon(1e-12));
    }

    // Targets far outside the scale force the clamp.
    auto wild = make_table({{0.0}, {1.0}}, {40.0, 60.0});
    reco::GbtConfig tiny;
    tiny.rounds = 1;
    tiny.max_depth = 0;
    auto wild_model = reco::fit_gbt(wild, tiny);
    wild_model.feature_schema = {"pred_baseline"};
    const reco::GbtPredictor clamped(ctx, agg, fcfg, {{"baseline", bias}},
                                     wild_model, false);
    const auto high =
        clamped.predict(ctx->store.user_index.external(0),
                        ctx->store.movie_index.external(0));
    CHECK(high.value == 5.0);
    CHECK(high.was_clamped);
}
