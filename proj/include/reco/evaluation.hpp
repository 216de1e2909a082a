#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "reco/predictors.hpp"

namespace reco {

// (actual, predicted) pairs. Actuals are star ratings, never zero.
using EvalPair = std::pair<double, double>;

// sqrt(sum (a-p)^2 / n). Throws on empty input.
double rmse(std::span<const EvalPair> pairs);

// Mean percentage error in both conventions: `signed_percent` keeps the
// formula's raw (a-p)/a terms, which can cancel; `absolute_percent`
// takes |a-p|/a and is the headline number.
struct MapeResult {
    double signed_percent = 0.0;
    double absolute_percent = 0.0;
};
MapeResult mape(std::span<const EvalPair> pairs);

struct ModelEval {
    std::string name;
    bool ok = true;
    std::string error;  // failure cause when !ok

    double rmse = 0.0;
    double mape_signed = 0.0;
    double mape_absolute = 0.0;
    std::uint64_t n_evaluated = 0;
    // Cold-start stratification, indexed by FallbackLevel.
    std::array<std::uint64_t, 4> count_by_level{};
    std::array<double, 4> rmse_by_level{};  // 0 for empty buckets
    std::uint64_t n_model_fallback = 0;     // known ids, degraded model path
};

// Scores every test triple (fallback predictions included).
ModelEval evaluate(const Predictor& model, const RatingStore& test,
                   const std::string& name);

struct DatasetFingerprint {
    std::uint64_t train_nnz = 0;
    std::uint64_t test_nnz = 0;
    std::uint64_t train_users = 0;
    std::uint64_t train_movies = 0;
    std::uint64_t test_users = 0;
    std::uint64_t test_movies = 0;
    std::uint64_t train_hash = 0;
    std::uint64_t test_hash = 0;
};

DatasetFingerprint make_fingerprint(const RatingStore& train,
                                    const RatingStore& test);

struct EvalReport {
    DatasetFingerprint fingerprint;
    std::vector<ModelEval> rows;  // ascending RMSE, failures last by name
    std::string config_echo;      // raw config text, filled by the pipeline
};

// Deferred predictor construction so one model's failure becomes a
// failed row instead of aborting the run.
struct BenchmarkSpec {
    std::string name;
    std::function<std::shared_ptr<const Predictor>()> build;
};

EvalReport benchmark(std::span<const BenchmarkSpec> specs,
                     const RatingStore& train, const RatingStore& test);

// Human-readable comparison table.
std::string render_table(const EvalReport& report);

// report.json (versioned schema) and report.csv under dir. Byte-stable
// for identical inputs.
void write_report(const EvalReport& report, const std::filesystem::path& dir);
std::string report_json_text(const EvalReport& report);

}  // namespace reco
