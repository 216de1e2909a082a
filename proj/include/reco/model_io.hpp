#pragma once

#include <cstdint>
#include <filesystem>

#include "reco/gbt.hpp"
#include "reco/predictors.hpp"

namespace reco {

// Versioned binary model container: magic "RBM1", one kind tag byte, a
// per-kind format version, then little-endian payload.
enum class ModelKind : std::uint8_t {
    Baseline = 1,
    Knn = 2,
    Mf = 3,
    Gbt = 4,
};

// Reads just the kind tag (validates magic).
ModelKind peek_model_kind(const std::filesystem::path& file);

void save_baseline_model(const BaselineModel& model,
                         const std::filesystem::path& file);
BaselineModel load_baseline_model(const std::filesystem::path& file);

// KNN models persist their configuration plus the baselines they correct.
struct KnnModelFile {
    KnnConfig config;
    BaselineModel baselines;
};
void save_knn_model(const KnnModelFile& model,
                    const std::filesystem::path& file);
KnnModelFile load_knn_model(const std::filesystem::path& file);

void save_mf_model(const MfModel& model, const std::filesystem::path& file);
MfModel load_mf_model(const std::filesystem::path& file);

void save_gbt_model(const GbtModel& model, const std::filesystem::path& file);
GbtModel load_gbt_model(const std::filesystem::path& file);

}  // namespace reco
