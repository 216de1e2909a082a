#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "reco/evaluation.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using doctest::Approx;

namespace {

// Fully scripted predictor: value, level, and degradation depend only on
// the external ids, so every evaluate() aggregate has a closed form.
class ScriptedPredictor : public reco::Predictor {
public:
    reco::Prediction predict(std::int32_t user, std::int32_t movie) const override {
        reco::Prediction p;
        p.user = user;
        p.movie = movie;
        p.value = 2.0 + double((user + movie) % 3);
        p.fallback_level = reco::FallbackLevel(user % 4);
        p.model_fallback = user % 5 == 0;
        return p;
    }
};

class ConstantPredictor : public reco::Predictor {
public:
    explicit ConstantPredictor(double v) : v_(v) {}
    reco::Prediction predict(std::int32_t user, std::int32_t movie) const override {
        reco::Prediction p;
        p.user = user;
        p.movie = movie;
        p.value = v_;
        return p;
    }

private:
    double v_;
};

std::string slurp(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

}  // namespace

TEST_CASE("rmse and mape follow their stated conventions") {
    using reco::EvalPair;

    const std::vector<EvalPair> one{{4.0, 5.0}};
    CHECK(reco::rmse(one) == Approx(1.0));
    const auto m1 = reco::mape(one);
    CHECK(m1.signed_percent == Approx(-25.0));
    CHECK(m1.absolute_percent == Approx(25.0));

    // Signed terms cancel; absolute terms do not.
    const std::vector<EvalPair> pair{{4.0, 5.0}, {4.0, 3.0}};
    const auto m2 = reco::mape(pair);
    CHECK(m2.signed_percent == Approx(0.0));
    CHECK(m2.absolute_percent == Approx(25.0));
    CHECK(reco::rmse(pair) == Approx(1.0));

    CHECK_THROWS_AS(reco::rmse({}), std::invalid_argument);
    CHECK_THROWS_AS(reco::mape({}), std::invalid_argument);
    const std::vector<EvalPair> zero{{0.0, 1.0}};
    CHECK_THROWS_AS(reco::mape(zero), std::invalid_argument);

    reco::Rng rng(4003);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 1 + std::size_t(rng.uniform_below(200));
        std::vector<EvalPair> pairs(n);
        std::vector<double> actual(n), pred(n);
        for (std::size_t i = 0; i < n; ++i) {
            actual[i] = 1.0 + double(rng.uniform_below(5));
            pred[i] = 1.0 + rng.uniform01() * 4.0;
            pairs[i] = {actual[i], pred[i]};
        }
        CHECK(reco::rmse(pairs) ==
              Approx(oracle::rmse(actual, pred)).epsilon(1e-12));
        const auto got = reco::mape(pairs);
        const auto expect = oracle::mape(actual, pred);
        CHECK(got.signed_percent ==
              Approx(expect.signed_percent).epsilon(1e-12));
        CHECK(got.absolute_percent ==
              Approx(expect.absolute_percent).epsilon(1e-12));
    }
}

TEST_CASE("evaluate aggregates stratified counts and errors per level") {
    // External ids chosen so user % 4 walks through every level and
    // user % 5 flags a known subset as degraded.
    std::vector<testsup::Row> rows;
    for (std::int32_t u = 1; u <= 12; ++u)
        rows.push_back({u, (u % 3) + 1, int(u % 5) + 1});
    const auto test_store = testsup::make_store(rows);

    const ScriptedPredictor scripted;
    const auto ev = reco::evaluate(scripted, test_store, "scripted");

    CHECK(ev.name == "scripted");
    CHECK(ev.ok);
    CHECK(ev.n_evaluated == 12);

    std::array<std::uint64_t, 4> counts{};
    std::array<std::vector<double>, 4> sq;
    std::vector<double> actual, pred;
    std::uint64_t degraded = 0;
    for (const auto& t : test_store.triples) {
        const auto p = scripted.predict(t.user, t.movie);
        actual.push_back(double(t.rating));
        pred.push_back(p.value);
        const auto level = std::size_t(p.fallback_level);
        ++counts[level];
        const double e = double(t.rating) - p.value;
        sq[level].push_back(e * e);
        degraded += p.model_fallback ? 1 : 0;
    }
    CHECK(ev.count_by_level == counts);
    CHECK(ev.n_model_fallback == degraded);
    CHECK(ev.rmse == Approx(oracle::rmse(actual, pred)).epsilon(1e-12));
    const auto m = oracle::mape(actual, pred);
    CHECK(ev.mape_signed == Approx(m.signed_percent).epsilon(1e-12));
    CHECK(ev.mape_absolute == Approx(m.absolute_percent).epsilon(1e-12));
    for (int l = 0; l < 4; ++l) {
        if (sq[l].empty()) {
            CHECK(ev.rmse_by_level[l] == 0.0);
            continue;
        }
        double s = 0.0;
        for (const auto v : sq[l]) s += v;
        CHECK(ev.rmse_by_level[l] ==
              Approx(std::sqrt(s / double(sq[l].size()))).epsilon(1e-12));
    }

    CHECK_THROWS_AS(reco::evaluate(scripted, reco::RatingStore{}, "x"),
                    std::invalid_argument);
}

TEST_CASE("evaluate sees real predictor fallback levels on held-out ids") {
    const auto train = testsup::make_store({
        {1, 1, 5}, {1, 2, 3}, {2, 1, 4}, {2, 2, 2},
    });
    const auto ctx = reco::TrainContext::build(train);
    const reco::BaselinePredictor bias(ctx, reco::fit_baseline(ctx->matrix));

    // 2 full pairs, 1 unknown movie, 1 unknown user, 1 fully unknown.
    const auto test_store = testsup::make_store({
        {1, 1, 4}, {2, 2, 3}, {1, 7, 2}, {9, 1, 5}, {8, 6, 1},
    });
    const auto ev = reco::evaluate(bias, test_store, "baseline");
    CHECK(ev.count_by_level ==
          std::array<std::uint64_t, 4>{2, 1, 1, 1});
    CHECK(ev.n_model_fallback == 0);
    CHECK(ev.n_evaluated == 5);
}

TEST_CASE("benchmark turns factory failures into rows and sorts the rest") {
    reco::Rng rng(4201);
    const auto train = testsup::random_store(rng, 20, 12);
    const auto test_store = testsup::random_store(rng, 10, 8);
    const auto ctx = reco::TrainContext::build(train);

    const std::vector<reco::BenchmarkSpec> specs{
        {"boom", []() -> std::shared_ptr<const reco::Predictor> {
             throw std::runtime_error("boom factory");
         }},
        {"baseline",
         [&] {
             return std::make_shared<const reco::BaselinePredictor>(
                 ctx, reco::fit_baseline(ctx->matrix));
         }},
        {"null", [] { return std::shared_ptr<const reco::Predictor>{}; }},
        {"const_b", [] { return std::make_shared<const ConstantPredictor>(3.0); }},
        {"const_a", [] { return std::make_shared<const ConstantPredictor>(3.0); }},
    };
    const auto report = reco::benchmark(specs, train, test_store);

    REQUIRE(report.rows.size() == 5);
    // ok rows first in ascending rmse, ties by name; failures last by name.
    CHECK(report.rows[3].name == "boom");
    CHECK(report.rows[4].name == "null");
    CHECK_FALSE(report.rows[3].ok);
    CHECK(report.rows[3].error == "boom factory");
    CHECK(report.rows[4].error == "model factory returned null");
    for (int i = 0; i < 3; ++i) CHECK(report.rows[i].ok);
    CHECK(report.rows[0].rmse <= report.rows[1].rmse);
    CHECK(report.rows[1].rmse <= report.rows[2].rmse);
    const auto a_at = std::find_if(report.rows.begin(), report.rows.end(),
                                   [](const auto& r) { return r.name == "const_a"; });
    const auto b_at = std::find_if(report.rows.begin(), report.rows.end(),
                                   [](const auto& r) { return r.name == "const_b"; });
    CHECK(a_at < b_at);  // equal rmse resolves alphabetically

    const auto& fp = report.fingerprint;
    CHECK(fp.train_nnz == train.triples.size());
    CHECK(fp.test_nnz == test_store.triples.size());
    CHECK(fp.train_users == train.user_count());
    CHECK(fp.test_movies == test_store.movie_count());
    CHECK(fp.train_hash != 0);
    CHECK(fp.train_hash != fp.test_hash);
}

TEST_CASE("the rendered table lists one line per model and names failures") {
    reco::EvalReport report;
    reco::ModelEval good;
    good.name = "baseline";
    good.rmse = 0.9876543;
    good.mape_absolute = 21.5;
    good.mape_signed = -3.25;
    good.n_evaluated = 1000;
    good.count_by_level = {900, 50, 40, 10};
    good.n_model_fallback = 7;
    reco::ModelEval bad;
    bad.name = "knn-user";
    bad.ok = false;
    bad.error = "boom factory";
    report.rows = {good, bad};

    const auto text = reco::render_table(report);
    std::vector<std::string> lines;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) lines.push_back(line);

    REQUIRE(lines.size() == 3);
    CHECK(lines[0].substr(0, 5) == "model");
    CHECK(lines[0].find("rmse") != std::string::npos);
    CHECK(lines[1].find("baseline") == 0);
    CHECK(lines[1].find("0.9877") != std::string::npos);
    CHECK(lines[1].find("900/50/40/10") != std::string::npos);
    CHECK(lines[2].find("knn-user") == 0);
    CHECK(lines[2].find("FAILED: boom factory") != std::string::npos);
}

TEST_CASE("report files round-trip through json and stay byte-stable") {
    reco::Rng rng(4409);
    const auto train = testsup::random_store(rng, 15, 10);
    const auto test_store = testsup::random_store(rng, 8, 6);
    const auto ctx = reco::TrainContext::build(train);

    const std::vector<reco::BenchmarkSpec> specs{
        {"baseline",
         [&] {
             return std::make_shared<const reco::BaselinePredictor>(
                 ctx, reco::fit_baseline(ctx->matrix));
         }},
        {"broken", []() -> std::shared_ptr<const reco::Predictor> {
             throw std::runtime_error("has, comma");
         }},
    };
    auto report = reco::benchmark(specs, train, test_store);
    report.config_echo = "[run]\nseed = 42\n";

    const auto text = reco::report_json_text(report);
    const auto j = nlohmann::json::parse(text);
    CHECK(j["schema_version"] == 1);
    CHECK(j["dataset"]["train_nnz"] == train.triples.size());
    CHECK(j["config"] == "[run]\nseed = 42\n");
    REQUIRE(j["models"].size() == 2);
    CHECK(j["models"][0]["name"] == "baseline");
    CHECK(j["models"][0]["ok"] == true);
    CHECK(j["models"][0]["rmse"].get<double>() ==
          Approx(report.rows[0].rmse));
    CHECK(j["models"][0]["fallback_counts"]["full"].get<std::uint64_t>() ==
          report.rows[0].count_by_level[0]);
    CHECK(j["models"][1]["name"] == "broken");
    CHECK(j["models"][1]["ok"] == false);
    CHECK(j["models"][1]["error"] == "has, comma");

    const testsup::TempDir dir("report");
    reco::write_report(report, dir.path());
    const auto json_a = slurp(dir.path() / "report.json");
    const auto csv_a = slurp(dir.path() / "report.csv");
    CHECK(json_a == text);

    std::vector<std::string> lines;
    std::istringstream in(csv_a);
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] ==
          "name,ok,rmse,mape_absolute,mape_signed,n_evaluated,"
          "full,user_only,movie_only,global,model_fallback,error");
    CHECK(lines[1].substr(0, 11) == "baseline,1,");
    // Commas inside error text must not add csv columns.
    CHECK(lines[2].find("has; comma") != std::string::npos);
    CHECK(std::count(lines[2].begin(), lines[2].end(), ',') == 11);

    reco::write_report(report, dir.path());
    CHECK(slurp(dir.path() / "report.json") == json_a);
    CHECK(slurp(dir.path() / "report.csv") == csv_a);
}
