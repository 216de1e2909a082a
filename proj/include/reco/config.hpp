#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "reco/features.hpp"
#include "reco/gbt.hpp"
#include "reco/predictors.hpp"
#include "reco/similarity.hpp"

namespace reco {

// Registry of model names accepted by train/evaluate/benchmark. The five
// stacked/factor combinations plus the standalone models.
inline constexpr std::array<std::string_view, 9> kModelNames = {
    "baseline",      // bias model
    "knn-user",      // user-oriented KNN-baseline
    "knn-movie",     // movie-oriented KNN-baseline
    "svd",           // matrix factorization
    "svdpp",         // matrix factorization with implicit feedback
    "gbt13",         // boosted trees on the 13 base features
    "gbt-stack-bk",  // 13 features + baseline + knn-user predictions
    "gbt-preds",     // baseline + knn-user + svd predictions only
    "gbt-stack-all", // 13 features + baseline + knn-user + svd predictions
};

bool is_model_name(std::string_view name);

// Raw parsed key=value file: sections of string pairs, plus the line
// numbers for error reporting.
struct ConfigFile {
    struct Entry {
        std::string value;
        std::size_t line = 0;  // 0 for env overrides
    };
    std::map<std::string, std::map<std::string, Entry>> sections;
};

// Parses INI-style text: [section] headers, key = value lines, # or ;
// comments. Throws std::runtime_error naming the line on syntax errors.
ConfigFile parse_config_text(const std::string& text);

// Applies RECOBENCH_<SECTION>__<KEY> environment overrides for every
// schema key (section/key uppercased in the variable name).
void apply_env_overrides(ConfigFile& file);

struct RunConfig {
    // [data]
    std::filesystem::path training_dir;  // Netflix-format directory
    std::filesystem::path movie_titles;  // optional
    std::filesystem::path output_dir = "out";
    // [split]
    double fraction = 0.8;
    // [similarity]
    SimilarityConfig similarity;
    // [baseline]
    BaselineConfig baseline;
    // [knn]
    std::size_t knn_k = 40;
    double knn_shrinkage = 100.0;
    // [mf]  (seed comes from run.seed)
    MfConfig mf;
    // [features]
    FeatureConfig features;
    std::uint64_t feature_sample = 1'000'000;  // 0 keeps every row
    // [gbt]
    GbtConfig gbt;
    // [run]
    std::uint64_t seed = 42;
    unsigned threads = 0;  // 0 = hardware concurrency
    std::vector<std::string> models{kModelNames.begin(), kModelNames.end()};

    // Effective configuration, normalized section/key order with defaults
    // filled in; echoed into reports.
    std::string echo() const;
};

struct ConfigResult {
    RunConfig config;
    std::vector<std::string> errors;  // empty on success

    bool ok() const { return errors.empty(); }
};

// Validates the parsed file against the schema: every error is collected
// (unknown keys get a nearest-key suggestion), values are type-checked,
// and referenced paths must exist.
ConfigResult validate_config(const ConfigFile& file);

// Read + parse + env-override + validate. A missing or unreadable file
// is reported as a single error.
ConfigResult load_config(const std::filesystem::path& path);

// Levenshtein edit distance; exposed for the suggestion tests.
std::size_t edit_distance(std::string_view a, std::string_view b);

}  // namespace reco
