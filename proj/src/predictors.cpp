#include "reco/predictors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "reco/numeric.hpp"
#include "reco/parallel.hpp"
#include "reco/rng.hpp"

namespace reco {

std::shared_ptr<TrainContext> TrainContext::build(RatingStore train_store,
                                                  SimilarityConfig sim_config) {
    auto ctx = std::make_shared<TrainContext>();
    ctx->store = std::move(train_store);
    ctx->matrix = build_matrix(ctx->store);
    ctx->engine = std::make_unique<SimilarityEngine>(ctx->matrix, sim_config);
    return ctx;
}

namespace {

double global_mean(const SparseRatingMatrix& matrix) {
    // Integer star sum stays exact in double far beyond 100M ratings.
    double sum = 0.0;
    for (const auto r : matrix.by_user.ratings) sum += r;
    return sum / double(matrix.nnz);
}

// Deterministic block-then-pairwise reduction of f(i) over [0, n).
double blocked_sum(std::size_t n, const std::function<double(std::size_t)>& f) {
    constexpr std::size_t kBlock = 4096;
    const std::size_t n_blocks = (n + kBlock - 1) / kBlock;
    std::vector<double> block_sums(n_blocks, 0.0);
    parallel_for(n_blocks, [&](std::size_t b) {
        double s = 0.0;
        const std::size_t end = std::min(n, (b + 1) * kBlock);
        for (std::size_t i = b * kBlock; i < end; ++i) s += f(i);
        block_sums[b] = s;
    });
    return pairwise_sum(block_sums);
}

struct FlatRatings {
    std::vector<std::uint32_t> users;
    std::vector<std::uint32_t> movies;
    std::vector<std::uint8_t> values;
};

FlatRatings flatten(const SparseRatingMatrix& matrix) {
    FlatRatings flat;
    flat.users.reserve(matrix.nnz);
    flat.movies.reserve(matrix.nnz);
    flat.values.reserve(matrix.nnz);
    for (std::uint32_t u = 0; u < matrix.user_count(); ++u) {
        const auto ids = matrix.by_user.row_ids(u);
        const auto ratings = matrix.by_user.row_ratings(u);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            flat.users.push_back(u);
            flat.movies.push_back(ids[i]);
            flat.values.push_back(ratings[i]);
        }
    }
    return flat;
}

}  // namespace

BaselineModel fit_baseline(const SparseRatingMatrix& matrix,
                           const BaselineConfig& config) {
    if (matrix.nnz == 0)
        throw std::invalid_argument("fit_baseline: empty matrix");

    BaselineModel model;
    model.mu = global_mean(matrix);
    model.b_user.assign(matrix.user_count(), 0.0);
    model.b_movie.assign(matrix.movie_count(), 0.0);

    if (config.method == BaselineMethod::Als) {
        // Alternating closed-form updates, movies first:
        //   b_j = sum(r - mu - b_u) / (reg_movie + |R(j)|)
        for (int epoch = 0; epoch < config.epochs; ++epoch) {
            for (std::uint32_t j = 0; j < matrix.movie_count(); ++j) {
                const auto ids = matrix.by_movie.row_ids(j);
                const auto ratings = matrix.by_movie.row_ratings(j);
                double s = 0.0;
                for (std::size_t i = 0; i < ids.size(); ++i)
                    s += double(ratings[i]) - model.mu - model.b_user[ids[i]];
                model.b_movie[j] = s / (config.reg_movie + double(ids.size()));
            }
            for (std::uint32_t u = 0; u < matrix.user_count(); ++u) {
                const auto ids = matrix.by_user.row_ids(u);
                const auto ratings = matrix.by_user.row_ratings(u);
                double s = 0.0;
                for (std::size_t i = 0; i < ids.size(); ++i)
                    s += double(ratings[i]) - model.mu - model.b_movie[ids[i]];
                model.b_user[u] = s / (config.reg_user + double(ids.size()));
            }
        }
    } else {
        for (int epoch = 0; epoch < config.epochs; ++epoch) {
            for (std::uint32_t u = 0; u < matrix.user_count(); ++u) {
                const auto ids = matrix.by_user.row_ids(u);
                const auto ratings = matrix.by_user.row_ratings(u);
                for (std::size_t i = 0; i < ids.size(); ++i) {
                    const std::uint32_t j = ids[i];
                    const double err = double(ratings[i]) - model.mu -
                                       model.b_user[u] - model.b_movie[j];
                    model.b_user[u] += config.lr * (err - config.reg_user * model.b_user[u]);
                    model.b_movie[j] += config.lr * (err - config.reg_movie * model.b_movie[j]);
                }
            }
        }
    }

    for (const double b : model.b_user)
        if (!std::isfinite(b)) throw std::runtime_error("fit_baseline: non-finite user bias");
    for (const double b : model.b_movie)
        if (!std::isfinite(b)) throw std::runtime_error("fit_baseline: non-finite movie bias");
    return model;
}

namespace {

Prediction finish(std::int32_t ext_user, std::int32_t ext_movie, double raw,
                  FallbackLevel level, bool model_fallback = false) {
    Prediction p;
    p.user = ext_user;
    p.movie = ext_movie;
    p.value = clamp_rating(raw);
    p.was_clamped = p.value != raw;
    p.fallback_level = level;
    p.model_fallback = model_fallback;
    return p;
}

struct ResolvedIds {
    std::optional<std::uint32_t> user;
    std::optional<std::uint32_t> movie;
    FallbackLevel level;
};

ResolvedIds resolve(const TrainContext& ctx, std::int32_t ext_user,
                    std::int32_t ext_movie) {
    ResolvedIds r;
    r.user = ctx.store.user_index.dense(ext_user);
    r.movie = ctx.store.movie_index.dense(ext_movie);
    if (r.user && r.movie) r.level = FallbackLevel::Full;
    else if (r.user) r.level = FallbackLevel::UserOnly;
    else if (r.movie) r.level = FallbackLevel::MovieOnly;
    else r.level = FallbackLevel::Global;
    return r;
}

double bias_value(const BaselineModel& m, const ResolvedIds& ids) {
    double v = m.mu;
    if (ids.user) v += m.b_user[*ids.user];
    if (ids.movie) v += m.b_movie[*ids.movie];
    return v;
}

}  // namespace

Prediction BaselinePredictor::predict(std::int32_t ext_user,
                                      std::int32_t ext_movie) const {
    const auto ids = resolve(*ctx_, ext_user, ext_movie);
    return finish(ext_user, ext_movie, bias_value(model_, ids), ids.level);
}

Prediction KnnPredictor::predict(std::int32_t ext_user,
                                 std::int32_t ext_movie) const {
    const auto ids = resolve(*ctx_, ext_user, ext_movie);
    const double baseline = bias_value(baselines_, ids);
    if (ids.level != FallbackLevel::Full)
        return finish(ext_user, ext_movie, baseline, ids.level);

    const bool user_mode = config_.orientation == Orientation::User;
    const std::uint32_t anchor = user_mode ? *ids.user : *ids.movie;
    const std::uint32_t target = user_mode ? *ids.movie : *ids.user;

    // Candidates: raters of the movie (user mode) / movies the user rated
    // (movie mode), with their stored ratings.
    const auto& candidate_view =
        user_mode ? ctx_->matrix.by_movie : ctx_->matrix.by_user;
    const auto cand_ids = candidate_view.row_ids(target);
    const auto cand_ratings = candidate_view.row_ratings(target);

    std::vector<std::pair<std::uint32_t, double>> scored;  // (neighbor, sim)
    std::vector<double> neighbor_residuals;
    if (config_.measure == SimMeasure::PearsonBaseline) {
        const auto sims = ctx_->engine->pearson_baseline_batch(
            anchor, cand_ids, baselines_, config_.shrinkage, config_.orientation);
        scored.reserve(cand_ids.size());
        for (std::size_t i = 0; i < cand_ids.size(); ++i) {
            if (cand_ids[i] == anchor) continue;
            scored.emplace_back(cand_ids[i], sims[i]);
        }
    } else {
        const auto list = user_mode
                              ? ctx_->engine->top_k_similar_users(anchor, config_.k, target)
                              : ctx_->engine->top_k_similar_movies(anchor, config_.k, target);
        scored = list.neighbors;
    }

    std::sort(scored.begin(), scored.end(),
              [](const auto& a, const auto& b) {
                  if (a.second != b.second) return a.second > b.second;
                  return a.first < b.first;
              });
    if (scored.size() > config_.k) scored.resize(config_.k);

    double sim_sum = 0.0, weighted = 0.0;
    for (const auto& [neighbor, sim] : scored) {
        // Neighbor's stored rating for the target comes from the same row
        // the candidate list was read from.
        const auto it = std::lower_bound(cand_ids.begin(), cand_ids.end(), neighbor);
        const double r = cand_ratings[std::size_t(it - cand_ids.begin())];
        const double b = user_mode ? baselines_.value(neighbor, target)
                                   : baselines_.value(target, neighbor);
        sim_sum += sim;
        weighted += sim * (r - b);
    }
    if (scored.empty() || sim_sum <= 0.0)
        return finish(ext_user, ext_movie, baseline, ids.level, true);
    return finish(ext_user, ext_movie, baseline + weighted / sim_sum, ids.level);
}

// ---------------------------------------------------------------------
// Matrix factorization
// ---------------------------------------------------------------------

namespace {

// Effective user vector: p_u plus the normalized implicit item sum.
void effective_user_vector(const MfModel& model, const SparseRatingMatrix& matrix,
                           std::uint32_t u, std::span<double> out) {
    const int f = model.factors;
    const auto pu = model.p_row(u);
    std::copy(pu.begin(), pu.end(), out.begin());
    if (!model.implicit_feedback) return;
    const auto items = matrix.by_user.row_ids(u);
    if (items.empty()) return;
    const double scale = 1.0 / std::sqrt(double(items.size()));
    for (const auto j : items) {
        const double* yj = model.y.data() + std::size_t(j) * f;
        for (int d = 0; d < f; ++d) out[d] += scale * yj[d];
    }
}

}  // namespace

double mf_raw_value(const MfModel& model, const SparseRatingMatrix& matrix,
                    std::uint32_t u, std::uint32_t j) {
    double v = model.mu + model.b_user[u] + model.b_movie[j];
    if (model.factors > 0) {
        std::vector<double> eff(model.factors);
        effective_user_vector(model, matrix, u, eff);
        const auto qj = model.q_row(j);
        for (int d = 0; d < model.factors; ++d) v += qj[d] * eff[d];
    }
    return v;
}

MfModel fit_mf(const SparseRatingMatrix& matrix, const MfConfig& config) {
    if (matrix.nnz == 0) throw std::invalid_argument("fit_mf: empty matrix");
    if (config.factors < 0) throw std::invalid_argument("fit_mf: negative factor count");

    const std::size_t m = matrix.user_count();
    const std::size_t n = matrix.movie_count();
    const int f = config.factors;

    MfModel model;
    model.mu = global_mean(matrix);
    model.b_user.assign(m, 0.0);
    model.b_movie.assign(n, 0.0);
    model.factors = f;
    model.implicit_feedback = config.implicit_feedback;

    Rng rng(config.seed);
    model.p.resize(m * std::size_t(f));
    for (auto& v : model.p) v = rng.normal(0.0, config.init_std);
    model.q.resize(n * std::size_t(f));
    for (auto& v : model.q) v = rng.normal(0.0, config.init_std);
    if (config.implicit_feedback) {
        model.y.resize(n * std::size_t(f));
        for (auto& v : model.y) v = rng.normal(0.0, config.init_std);
    }

    const FlatRatings flat = flatten(matrix);
    std::vector<std::uint64_t> order(matrix.nnz);
    for (std::uint64_t i = 0; i < matrix.nnz; ++i) order[i] = i;

    std::vector<double> q_old(f);
    std::vector<double> eff(f);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        for (const auto idx : order) {
            const std::uint32_t u = flat.users[idx];
            const std::uint32_t j = flat.movies[idx];
            const double r = flat.values[idx];

            double* pu = model.p.data() + std::size_t(u) * f;
            double* qj = model.q.data() + std::size_t(j) * f;

            const auto items = matrix.by_user.row_ids(u);
            const double scale =
                (config.implicit_feedback && !items.empty())
                    ? 1.0 / std::sqrt(double(items.size()))
                    : 0.0;

            double pred = model.mu + model.b_user[u] + model.b_movie[j];
            if (f > 0) {
                std::copy(pu, pu + f, eff.begin());
                if (config.implicit_feedback) {
                    for (const auto item : items) {
                        const double* yj = model.y.data() + std::size_t(item) * f;
                        for (int d = 0; d < f; ++d) eff[d] += scale * yj[d];
                    }
                }
                for (int d = 0; d < f; ++d) pred += qj[d] * eff[d];
            }
            const double err = r - pred;

            model.b_user[u] += config.lr * (err - config.reg * model.b_user[u]);
            model.b_movie[j] += config.lr * (err - config.reg * model.b_movie[j]);
            if (f > 0) {
                std::copy(qj, qj + f, q_old.begin());
                for (int d = 0; d < f; ++d) {
                    const double pud = pu[d];
                    pu[d] += config.lr * (err * q_old[d] - config.reg * pud);
                    qj[d] += config.lr * (err * (eff[d]) - config.reg * qj[d]);
                }
                if (config.implicit_feedback) {
                    for (const auto item : items) {
                        double* yj = model.y.data() + std::size_t(item) * f;
                        for (int d = 0; d < f; ++d)
                            yj[d] += config.lr *
                                     (err * scale * q_old[d] - config.reg * yj[d]);
                    }
                }
            }
        }

        const double mse =
            blocked_sum(matrix.nnz,
                        [&](std::size_t i) {
                            const double v = mf_raw_value(model, matrix,
                                                          flat.users[i],
                                                          flat.movies[i]);
                            const double e = double(flat.values[i]) - v;
                            return e * e;
                        }) /
            double(matrix.nnz);
        if (!std::isfinite(mse))
            throw std::runtime_error(
                "fit_mf: training diverged (non-finite loss at epoch " +
                std::to_string(epoch + 1) + "); lower lr or raise reg");
        model.epoch_mse.push_back(mse);
    }
    return model;
}

double mf_objective(const MfModel& model, const SparseRatingMatrix& matrix,
                    double reg) {
    const FlatRatings flat = flatten(matrix);
    double loss = 0.0;
    for (std::size_t i = 0; i < flat.users.size(); ++i) {
        const double e = double(flat.values[i]) -
                         mf_raw_value(model, matrix, flat.users[i], flat.movies[i]);
        loss += e * e;
    }
    double l2 = 0.0;
    for (const double v : model.b_user) l2 += v * v;
    for (const double v : model.b_movie) l2 += v * v;
    for (const double v : model.p) l2 += v * v;
    for (const double v : model.q) l2 += v * v;
    for (const double v : model.y) l2 += v * v;
    return loss + reg * l2;
}

std::vector<double> mf_gradient(const MfModel& model,
                                const SparseRatingMatrix& matrix, double reg) {
    const std::size_t m = matrix.user_count();
    const std::size_t n = matrix.movie_count();
    const int f = model.factors;
    const std::size_t total = m + n + (m + n) * std::size_t(f) +
                              (model.implicit_feedback ? n * std::size_t(f) : 0);
    std::vector<double> grad(total, 0.0);

    double* g_bu = grad.data();
    double* g_bj = grad.data() + m;
    double* g_p = g_bj + n;
    double* g_q = g_p + m * std::size_t(f);
    double* g_y = g_q + n * std::size_t(f);

    std::vector<double> eff(f);
    std::vector<double> err_q(f);  // sum_i e_ui * q_i for the active user

    for (std::uint32_t u = 0; u < m; ++u) {
        const auto items = matrix.by_user.row_ids(u);
        const auto ratings = matrix.by_user.row_ratings(u);
        if (items.empty()) continue;
        if (f > 0) effective_user_vector(model, matrix, u, eff);
        std::fill(err_q.begin(), err_q.end(), 0.0);
        const double scale = model.implicit_feedback
                                 ? 1.0 / std::sqrt(double(items.size()))
                                 : 0.0;

        for (std::size_t i = 0; i < items.size(); ++i) {
            const std::uint32_t j = items[i];
            double pred = model.mu + model.b_user[u] + model.b_movie[j];
            const auto qj = model.q_row(j);
            if (f > 0)
                for (int d = 0; d < f; ++d) pred += qj[d] * eff[d];
            const double e = double(ratings[i]) - pred;

            g_bu[u] += -2.0 * e;
            g_bj[j] += -2.0 * e;
            for (int d = 0; d < f; ++d) {
                g_p[std::size_t(u) * f + d] += -2.0 * e * qj[d];
                g_q[std::size_t(j) * f + d] += -2.0 * e * eff[d];
                err_q[d] += e * qj[d];
            }
        }
        if (model.implicit_feedback && f > 0) {
            for (const auto item : items)
                for (int d = 0; d < f; ++d)
                    g_y[std::size_t(item) * f + d] += -2.0 * scale * err_q[d];
        }
    }

    // L2 term
    std::size_t off = 0;
    auto add_l2 = [&](const std::vector<double>& params) {
        for (std::size_t i = 0; i < params.size(); ++i)
            grad[off + i] += 2.0 * reg * params[i];
        off += params.size();
    };
    add_l2(model.b_user);
    add_l2(model.b_movie);
    add_l2(model.p);
    add_l2(model.q);
    if (model.implicit_feedback) add_l2(model.y);
    return grad;
}

MfPredictor::MfPredictor(std::shared_ptr<const TrainContext> ctx, MfModel model)
    : ctx_(std::move(ctx)), model_(std::move(model)) {
    const std::size_t m = ctx_->matrix.user_count();
    const int f = model_.factors;
    eff_.assign(m * std::size_t(f), 0.0);
    if (f > 0) {
        parallel_for(m, [&](std::size_t u) {
            effective_user_vector(model_, ctx_->matrix, std::uint32_t(u),
                                  {eff_.data() + u * std::size_t(f), std::size_t(f)});
        });
    }
}

Prediction MfPredictor::predict(std::int32_t ext_user,
                                std::int32_t ext_movie) const {
    const auto ids = resolve(*ctx_, ext_user, ext_movie);
    double raw = model_.mu;
    if (ids.user) raw += model_.b_user[*ids.user];
    if (ids.movie) raw += model_.b_movie[*ids.movie];
    if (ids.level == FallbackLevel::Full && model_.factors > 0) {
        const double* eff = eff_.data() + std::size_t(*ids.user) * model_.factors;
        const auto qj = model_.q_row(*ids.movie);
        for (int d = 0; d < model_.factors; ++d) raw += qj[d] * eff[d];
    }
    return finish(ext_user, ext_movie, raw, ids.level);
}

}  // namespace reco
