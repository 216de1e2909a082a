#pragma once

#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <string>

#include "reco/config.hpp"
#include "reco/evaluation.hpp"
#include "reco/features.hpp"
#include "reco/gbt.hpp"

namespace reco {

// Staged run over one output directory:
//   cache/store.bin            ingest artifact
//   cache/train.bin, test.bin  split artifacts
//   eda/eda.json + csv files   eda artifacts
//   models/<name>.bin          per-model artifacts
//   report/report.{json,csv,txt}
//
// Every artifact has a .fp sidecar holding its input fingerprint; a stage
// whose artifact+fingerprint match is skipped. Fingerprints chain
// (ingest -> split -> model -> report), so a fully cached rerun does no
// heavy work at all. Cached and fresh runs produce identical bytes.
class Pipeline {
public:
    Pipeline(RunConfig config, std::ostream& log);

    const RunConfig& config() const { return cfg_; }

    // ingest: parse the training directory (or load the binary cache).
    RatingStore& store();

    // split: temporal split artifacts; context() builds the train-side
    // matrix + similarity engine, test_store() loads the held-out part.
    std::shared_ptr<TrainContext> context();
    RatingStore& test_store();

    const AggregateStats& aggregates();
    const BaselineModel& baselines();

    // eda: writes eda/eda.json + histogram/quantiles/weekday csv files.
    std::filesystem::path eda();

    // train: returns the named model's predictor, fitting and persisting
    // it (or loading the cached artifact). Name must be in kModelNames.
    std::shared_ptr<const Predictor> model(const std::string& name);

    // benchmark: evaluates config().models on the test split and writes
    // the report artifacts. Returns the report directory.
    std::filesystem::path benchmark();

    // Full flow: ingest -> split -> eda -> train+benchmark.
    std::filesystem::path run_all();

private:
    std::string ingest_key();
    std::string split_key();
    std::string eda_key();
    std::string model_key(const std::string& name);
    std::string report_key();
    std::string model_signature(const std::string& name);

    void ensure_store_artifact();
    void ensure_split_artifacts();
    const FeatureTable& base_table();
    GbtModel fit_gbt_for(const std::string& name);
    FeatureTable table_for(const std::string& name);
    std::vector<std::pair<std::string, std::shared_ptr<const Predictor>>>
    stacked_for(const std::string& name);

    void log_hit(const std::string& stage);
    void log_computed(const std::string& stage, double seconds);
    // A downstream cache hit skips the upstream stages entirely; report
    // their artifacts as hits so the log still covers the whole chain.
    void log_cached_upstream();

    RunConfig cfg_;
    std::ostream& log_;
    std::filesystem::path cache_dir_;
    std::filesystem::path models_dir_;

    std::map<std::string, std::string> sections_;  // echo split by section
    std::set<std::string> logged_;  // each stage reports status once per run

    std::optional<std::string> ingest_key_;
    std::optional<std::string> split_key_;

    std::optional<RatingStore> store_;
    std::shared_ptr<TrainContext> ctx_;
    std::optional<RatingStore> test_store_;
    std::optional<AggregateStats> aggregates_;
    std::optional<BaselineModel> baselines_;
    std::optional<FeatureTable> base_table_;
    std::map<std::string, std::shared_ptr<const Predictor>> predictors_;
};

}  // namespace reco
