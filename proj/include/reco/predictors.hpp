#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "reco/baseline.hpp"
#include "reco/dataset.hpp"
#include "reco/similarity.hpp"

namespace reco {

// Which ids were known to the training data. Drives the cold-start
// stratification in evaluation reports.
enum class FallbackLevel : std::uint8_t {
    Full = 0,       // both ids known
    UserOnly = 1,   // movie unknown
    MovieOnly = 2,  // user unknown
    Global = 3,     // both unknown, global mean only
};

inline const char* fallback_name(FallbackLevel level) {
    switch (level) {
        case FallbackLevel::Full: return "full";
        case FallbackLevel::UserOnly: return "user_only";
        case FallbackLevel::MovieOnly: return "movie_only";
        case FallbackLevel::Global: return "global";
    }
    return "?";
}

struct Prediction {
    std::int32_t user = 0;   // external ids
    std::int32_t movie = 0;
    double value = 0.0;      // clamped to [1,5]
    bool was_clamped = false;
    FallbackLevel fallback_level = FallbackLevel::Full;
    // Set when a model degraded to its bias prediction despite known ids
    // (KNN with an empty neighborhood or non-positive similarity mass).
    bool model_fallback = false;
};

// Common surface for everything the evaluation harness can score.
class Predictor {
public:
    virtual ~Predictor() = default;
    virtual Prediction predict(std::int32_t ext_user, std::int32_t ext_movie) const = 0;
};

// Shared train-side context: the store owns the id maps, the matrix owns
// the ratings, the engine answers similarity queries. Immutable once
// built; predictors hold shared ownership.
struct TrainContext {
    RatingStore store;
    SparseRatingMatrix matrix;
    std::unique_ptr<SimilarityEngine> engine;

    static std::shared_ptr<TrainContext> build(RatingStore train_store,
                                               SimilarityConfig sim_config = {});
};

// ---------------------------------------------------------------------
// Baseline bias model
// ---------------------------------------------------------------------

enum class BaselineMethod { Als, Sgd };

struct BaselineConfig {
    BaselineMethod method = BaselineMethod::Als;
    int epochs = 10;
    double reg_user = 15.0;
    double reg_movie = 10.0;
    double lr = 0.005;  // sgd only
};

// Alternating updates (or SGD) minimizing sum (r - mu - bu - bj)^2 plus
// per-side L2. Deterministic: iteration follows matrix order.
BaselineModel fit_baseline(const SparseRatingMatrix& matrix,
                           const BaselineConfig& config = {});

class BaselinePredictor : public Predictor {
public:
    BaselinePredictor(std::shared_ptr<const TrainContext> ctx, BaselineModel model)
        : ctx_(std::move(ctx)), model_(std::move(model)) {}

    Prediction predict(std::int32_t ext_user, std::int32_t ext_movie) const override;

    const BaselineModel& model() const { return model_; }

private:
    std::shared_ptr<const TrainContext> ctx_;
    BaselineModel model_;
};

// ---------------------------------------------------------------------
// KNN-baseline neighborhood model
// ---------------------------------------------------------------------

struct KnnConfig {
    Orientation orientation = Orientation::User;
    std::size_t k = 40;
    SimMeasure measure = SimMeasure::PearsonBaseline;
    double shrinkage = 100.0;
};

// Corrects the baseline by a similarity-weighted average of neighbor
// residuals:
//   r' = b_uj + sum_{v in N} sim * (r_vj - b_vj) / sum_{v in N} sim
// N = the k most similar raters of the movie (user orientation) or the k
// most similar movies rated by the user (movie orientation). Empty N or
// non-positive similarity mass falls back to the baseline value.
class KnnPredictor : public Predictor {
public:
    KnnPredictor(std::shared_ptr<const TrainContext> ctx, BaselineModel baselines,
                 KnnConfig config)
        : ctx_(std::move(ctx)), baselines_(std::move(baselines)), config_(config) {
        if (config_.k < 1) throw std::invalid_argument("knn k must be >= 1");
    }

    Prediction predict(std::int32_t ext_user, std::int32_t ext_movie) const override;

    const KnnConfig& config() const { return config_; }
    const BaselineModel& baselines() const { return baselines_; }

private:
    std::shared_ptr<const TrainContext> ctx_;
    BaselineModel baselines_;
    KnnConfig config_;
};

// ---------------------------------------------------------------------
// Matrix factorization (biased SGD; optional implicit feedback)
// ---------------------------------------------------------------------

struct MfConfig {
    int factors = 100;
    int epochs = 20;
    double lr = 0.005;
    double reg = 0.02;
    double init_std = 0.1;
    bool implicit_feedback = false;  // adds |N(u)|^{-1/2} sum y_j to p_u
    std::uint64_t seed = 42;
};

struct MfModel {
    double mu = 0.0;
    std::vector<double> b_user;
    std::vector<double> b_movie;
    std::vector<double> p;  // m x f, row-major user factors
    std::vector<double> q;  // n x f, row-major movie factors
    std::vector<double> y;  // n x f implicit item factors (implicit variant)
    int factors = 0;
    bool implicit_feedback = false;
    std::vector<double> epoch_mse;  // train MSE after each epoch

    std::span<const double> p_row(std::uint32_t u) const {
        return {p.data() + std::size_t(u) * factors, std::size_t(factors)};
    }
    std::span<const double> q_row(std::uint32_t j) const {
        return {q.data() + std::size_t(j) * factors, std::size_t(factors)};
    }
};

// SGD over observed entries of r' = mu + bu + bj + q.(p [+ implicit]).
// Rating order is reshuffled each epoch from the seed, so a fixed seed
// reproduces the model bit for bit. Throws on divergence.
MfModel fit_mf(const SparseRatingMatrix& matrix, const MfConfig& config = {});

// Full-batch objective sum(r - r')^2 + reg * |theta|^2 and its analytic
// gradient, laid out as [b_user, b_movie, p, q, y]. Exposed for
// diagnostics; the finite-difference check in the tests runs against it.
double mf_objective(const MfModel& model, const SparseRatingMatrix& matrix,
                    double reg);
std::vector<double> mf_gradient(const MfModel& model,
                                const SparseRatingMatrix& matrix, double reg);

class MfPredictor : public Predictor {
public:
    // Folds the implicit item sum into a per-user effective vector once,
    // so predict() is a plain dot product.
    MfPredictor(std::shared_ptr<const TrainContext> ctx, MfModel model);

    Prediction predict(std::int32_t ext_user, std::int32_t ext_movie) const override;

    const MfModel& model() const { return model_; }

private:
    std::shared_ptr<const TrainContext> ctx_;
    MfModel model_;
    std::vector<double> eff_;  // m x f effective user factors
};

// Raw model value for a known dense pair (no clamping).
double mf_raw_value(const MfModel& model, const SparseRatingMatrix& matrix,
                    std::uint32_t u, std::uint32_t j);

}  // namespace reco
