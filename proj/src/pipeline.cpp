#include "reco/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "reco/analytics.hpp"
#include "reco/hash.hpp"
#include "reco/model_io.hpp"
#include "reco/parallel.hpp"

namespace reco {

namespace {

class StageTimer {
public:
    StageTimer() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                             start_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

std::string fnv_hex(std::span<const std::string> parts) {
    Fnv1a64 h;
    for (const auto& p : parts) {
        h.update(p.data(), p.size());
        h.update_pod<char>('\x1f');
    }
    return h.hex();
}

// Stat-based signature of the input directory: sorted names + sizes.
// Content is deliberately not hashed; the raw data runs to gigabytes.
std::string dir_signature(const std::filesystem::path& configured) {
    const std::filesystem::path dir = resolve_training_dir(configured);
    if (!std::filesystem::is_directory(dir))
        throw std::runtime_error("training directory not found: " + dir.string());
    std::vector<std::pair<std::string, std::uint64_t>> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        files.emplace_back(entry.path().filename().string(),
                           std::uint64_t(entry.file_size()));
    }
    std::sort(files.begin(), files.end());
    std::ostringstream sig;
    sig << files.size();
    for (const auto& [name, size] : files) sig << '\x1f' << name << ':' << size;
    return sig.str();
}

std::filesystem::path fp_path(const std::filesystem::path& artifact) {
    auto p = artifact;
    p += ".fp";
    return p;
}

bool artifact_valid(const std::filesystem::path& artifact,
                    const std::string& key) {
    if (!std::filesystem::exists(artifact)) return false;
    std::ifstream in(fp_path(artifact), std::ios::binary);
    if (!in) return false;
    std::string stored;
    std::getline(in, stored);
    return stored == key;
}

void write_fp(const std::filesystem::path& artifact, const std::string& key) {
    std::ofstream out(fp_path(artifact), std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write fingerprint for " +
                                 artifact.string());
    out << key << '\n';
}

std::string slurp(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + file.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

constexpr const char* kDayNames[7] = {"monday",   "tuesday", "wednesday",
                                      "thursday", "friday",  "saturday",
                                      "sunday"};

// Failures surface with the stage that caused them.
template <typename F>
decltype(auto) staged(const std::string& stage, F&& fn) {
    try {
        return std::forward<F>(fn)();
    } catch (const std::exception& e) {
        throw std::runtime_error("stage " + stage + " failed: " + e.what());
    }
}

// Splits the normalized echo text into per-section chunks for the
// fingerprint signatures.
std::map<std::string, std::string> split_sections(const std::string& echo) {
    std::map<std::string, std::string> out;
    std::istringstream in(echo);
    std::string line, current;
    while (std::getline(in, line)) {
        if (!line.empty() && line.front() == '[') {
            current = line;
            out[current];
        } else if (!current.empty()) {
            out[current] += line;
            out[current] += '\n';
        }
    }
    return out;
}

}  // namespace

Pipeline::Pipeline(RunConfig config, std::ostream& log)
    : cfg_(std::move(config)), log_(log) {
    if (cfg_.threads != 0) set_thread_cap(cfg_.threads);
    cache_dir_ = cfg_.output_dir / "cache";
    models_dir_ = cfg_.output_dir / "models";
    sections_ = split_sections(cfg_.echo());
}

void Pipeline::log_hit(const std::string& stage) {
    if (!logged_.insert(stage).second) return;
    log_ << "stage " << stage << ": cache hit\n" << std::flush;
}

void Pipeline::log_computed(const std::string& stage, double seconds) {
    if (!logged_.insert(stage).second) return;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1fs", seconds);
    log_ << "stage " << stage << ": computed (" << buf << ")\n" << std::flush;
}

void Pipeline::log_cached_upstream() {
    if (artifact_valid(cache_dir_ / "store.bin", ingest_key()))
        log_hit("ingest");
    const std::string key = split_key();
    if (artifact_valid(cache_dir_ / "train.bin", key) &&
        artifact_valid(cache_dir_ / "test.bin", key))
        log_hit("split");
}

// ---- fingerprints ----------------------------------------------------

std::string Pipeline::ingest_key() {
    if (!ingest_key_) {
        staged("ingest", [&] {
            const std::string parts[] = {"ingest-v1",
                                         dir_signature(cfg_.training_dir)};
            ingest_key_ = fnv_hex(parts);
        });
    }
    return *ingest_key_;
}

std::string Pipeline::split_key() {
    if (!split_key_) {
        const std::string parts[] = {"split-v1", ingest_key(),
                                     sections_["[split]"]};
        split_key_ = fnv_hex(parts);
    }
    return *split_key_;
}

std::string Pipeline::eda_key() {
    const std::string parts[] = {"eda-v1", split_key()};
    return fnv_hex(parts);
}

std::string Pipeline::model_signature(const std::string& name) {
    std::string sig = "seed=" + std::to_string(cfg_.seed) + "\n";
    auto add = [&](const char* section) { sig += sections_[section]; };
    if (name == "baseline") {
        add("[baseline]");
    } else if (name == "knn-user" || name == "knn-movie") {
        add("[baseline]");
        add("[knn]");
        add("[similarity]");
    } else if (name == "svd" || name == "svdpp") {
        add("[mf]");
    } else {  // gbt family depends on everything it can stack
        add("[baseline]");
        add("[knn]");
        add("[similarity]");
        add("[mf]");
        add("[features]");
        add("[gbt]");
    }
    return sig;
}

std::string Pipeline::model_key(const std::string& name) {
    const std::string parts[] = {"train-v1", name, split_key(),
                                 model_signature(name)};
    return fnv_hex(parts);
}

std::string Pipeline::report_key() {
    std::vector<std::string> parts = {"report-v1", split_key()};
    for (const auto& name : cfg_.models) {
        parts.push_back(name);
        parts.push_back(model_key(name));
    }
    return fnv_hex(parts);
}

// ---- ingest / split ---------------------------------------------------

void Pipeline::ensure_store_artifact() {
    const auto artifact = cache_dir_ / "store.bin";
    const std::string key = ingest_key();
    if (artifact_valid(artifact, key)) return;
    staged("ingest", [&] {
        StageTimer timer;
        std::filesystem::create_directories(cache_dir_);
        RatingStore parsed = parse_training_set(cfg_.training_dir);
        save_store(parsed, artifact);
        write_fp(artifact, key);
        store_ = std::move(parsed);
        log_computed("ingest", timer.seconds());
    });
}

RatingStore& Pipeline::store() {
    if (store_) return *store_;
    const auto artifact = cache_dir_ / "store.bin";
    if (artifact_valid(artifact, ingest_key())) {
        store_ = load_store(artifact);
        log_hit("ingest");
    } else {
        ensure_store_artifact();
    }
    return *store_;
}

void Pipeline::ensure_split_artifacts() {
    const auto train_art = cache_dir_ / "train.bin";
    const auto test_art = cache_dir_ / "test.bin";
    const std::string key = split_key();
    if (artifact_valid(train_art, key) && artifact_valid(test_art, key)) {
        log_cached_upstream();
        return;
    }
    RatingStore& full = store();
    staged("split", [&] {
        StageTimer timer;
        auto [train, test] = temporal_split(full, cfg_.fraction);
        save_store(train, train_art);
        write_fp(train_art, key);
        save_store(test, test_art);
        write_fp(test_art, key);
        // The split halves are wanted next; keep them instead of reloading.
        ctx_.reset();
        predictors_.clear();
        ctx_ = TrainContext::build(std::move(train), cfg_.similarity);
        test_store_ = std::move(test);
        store_.reset();  // the full store is no longer needed
        log_computed("split", timer.seconds());
    });
}

std::shared_ptr<TrainContext> Pipeline::context() {
    if (!ctx_) {
        ensure_split_artifacts();
        if (!ctx_)
            ctx_ = TrainContext::build(load_store(cache_dir_ / "train.bin"),
                                       cfg_.similarity);
    }
    return ctx_;
}

RatingStore& Pipeline::test_store() {
    if (!test_store_) {
        ensure_split_artifacts();
        if (!test_store_) test_store_ = load_store(cache_dir_ / "test.bin");
    }
    return *test_store_;
}

const AggregateStats& Pipeline::aggregates() {
    if (!aggregates_) aggregates_ = compute_aggregates(context()->matrix);
    return *aggregates_;
}

// ---- eda ---------------------------------------------------------------

std::filesystem::path Pipeline::eda() {
    const auto dir = cfg_.output_dir / "eda";
    const auto artifact = dir / "eda.json";
    const std::string key = eda_key();
    if (artifact_valid(artifact, key)) {
        log_cached_upstream();
        log_hit("eda");
        return dir;
    }
    const auto ctx = context();
    RatingStore& test = test_store();
    staged("eda", [&] {
    StageTimer timer;
    const EdaReport report = build_eda_report(ctx->store, ctx->matrix, &test);
    std::filesystem::create_directories(dir);

    using json = nlohmann::ordered_json;
    json j;
    j["schema_version"] = 1;
    {
        json hist;
        for (int s = 1; s <= 5; ++s)
            hist[std::to_string(s)] = report.rating_histogram.counts[s - 1];
        j["rating_histogram"] = hist;
        j["modal_rating"] = report.rating_histogram.modal_star();
    }
    {
        const auto& q = report.per_user_count_quantiles;
        j["per_user_count_quantiles"] = {{"0", q.min},     {"0.25", q.q25},
                                         {"0.5", q.median}, {"0.75", q.q75},
                                         {"1", q.max},     {"mean", q.mean}};
    }
    {
        json counts, quartiles;
        for (int d = 0; d < 7; ++d) {
            counts[kDayNames[d]] = report.weekday_counts[d];
            const auto& f = report.weekday_rating_quartiles[d];
            quartiles[kDayNames[d]] = {{"min", f.min},
                                       {"q1", f.q1},
                                       {"median", f.median},
                                       {"q3", f.q3},
                                       {"max", f.max}};
        }
        j["weekday_counts"] = counts;
        j["weekday_rating_quartiles"] = quartiles;
    }
    j["sparsity_percent"] = round2(report.sparsity_percent);
    if (report.cold_start) {
        const auto& cs = *report.cold_start;
        j["cold_start"] = {{"users_missing", cs.users_missing},
                           {"users_percent", round2(cs.users_percent)},
                           {"movies_missing", cs.movies_missing},
                           {"movies_percent", round2(cs.movies_percent)}};
    }
    {
        std::ofstream out(artifact, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write eda.json");
        out << j.dump(2) << "\n";
    }
    {
        std::ofstream out(dir / "histogram.csv", std::ios::binary);
        out << "star,count\n";
        for (int s = 1; s <= 5; ++s)
            out << s << ',' << report.rating_histogram.counts[s - 1] << '\n';
    }
    {
        std::ofstream out(dir / "quantiles.csv", std::ios::binary);
        const auto& q = report.per_user_count_quantiles;
        char buf[64];
        auto row = [&](const char* name, double v) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out << name << ',' << buf << '\n';
        };
        out << "stat,value\n";
        row("min", q.min);
        row("q25", q.q25);
        row("median", q.median);
        row("q75", q.q75);
        row("max", q.max);
        row("mean", q.mean);
    }
    {
        std::ofstream out(dir / "weekday.csv", std::ios::binary);
        out << "weekday,count,min,q1,median,q3,max\n";
        char buf[64];
        for (int d = 0; d < 7; ++d) {
            const auto& f = report.weekday_rating_quartiles[d];
            out << kDayNames[d] << ',' << report.weekday_counts[d];
            for (const double v : {f.min, f.q1, f.median, f.q3, f.max}) {
                std::snprintf(buf, sizeof buf, "%.17g", v);
                out << ',' << buf;
            }
            out << '\n';
        }
    }
    write_fp(artifact, key);
    log_computed("eda", timer.seconds());
    });
    return dir;
}

// ---- training ----------------------------------------------------------

const BaselineModel& Pipeline::baselines() {
    if (baselines_) return *baselines_;
    const auto artifact = models_dir_ / "baseline.bin";
    const std::string key = model_key("baseline");
    if (artifact_valid(artifact, key)) {
        baselines_ = load_baseline_model(artifact);
        log_hit("train[baseline]");
    } else {
        const auto ctx = context();
        staged("train[baseline]", [&] {
            StageTimer timer;
            std::filesystem::create_directories(models_dir_);
            baselines_ = fit_baseline(ctx->matrix, cfg_.baseline);
            save_baseline_model(*baselines_, artifact);
            write_fp(artifact, key);
            log_computed("train[baseline]", timer.seconds());
        });
    }
    return *baselines_;
}

const FeatureTable& Pipeline::base_table() {
    if (base_table_) return *base_table_;
    const auto ctx = context();
    std::optional<std::uint64_t> sample;
    if (cfg_.feature_sample != 0 && cfg_.feature_sample < ctx->matrix.nnz)
        sample = cfg_.feature_sample;
    base_table_ = build_training_table(*ctx, aggregates(), sample, cfg_.seed,
                                       cfg_.features);
    if (const auto padded = base_table_->padded_rows(); padded != 0)
        log_ << "feature table: " << padded << " of " << base_table_->rows.size()
             << " rows use slot padding\n";
    return *base_table_;
}

std::vector<std::pair<std::string, std::shared_ptr<const Predictor>>>
Pipeline::stacked_for(const std::string& name) {
    std::vector<std::string> deps;
    if (name == "gbt-stack-bk")
        deps = {"baseline", "knn-user"};
    else if (name == "gbt-preds" || name == "gbt-stack-all")
        deps = {"baseline", "knn-user", "svd"};

    std::vector<std::pair<std::string, std::shared_ptr<const Predictor>>> out;
    out.reserve(deps.size());
    for (const auto& dep : deps) out.emplace_back(dep, model(dep));
    return out;
}

FeatureTable Pipeline::table_for(const std::string& name) {
    FeatureTable table = base_table();  // copy; each model stacks its own
    if (name == "gbt-preds") {
        // Prediction-only variant: drop the 13 base slots.
        table.schema.clear();
        for (auto& row : table.rows) row.values.clear();
    }
    const auto stacked = stacked_for(name);
    std::vector<NamedPredictor> view;
    view.reserve(stacked.size());
    for (const auto& [dep, predictor] : stacked)
        view.push_back({dep, predictor.get()});
    stack_table(table, view);
    return table;
}

GbtModel Pipeline::fit_gbt_for(const std::string& name) {
    return fit_gbt(table_for(name), cfg_.gbt);
}

std::shared_ptr<const Predictor> Pipeline::model(const std::string& name) {
    if (const auto it = predictors_.find(name); it != predictors_.end())
        return it->second;
    if (!is_model_name(name))
        throw std::invalid_argument("unknown model: " + name);

    const auto ctx = context();
    const auto artifact = models_dir_ / (name + ".bin");
    const std::string key = model_key(name);
    const std::string stage = "train[" + name + "]";
    std::filesystem::create_directories(models_dir_);

    std::shared_ptr<const Predictor> predictor;
    if (name == "baseline") {
        predictor = std::make_shared<BaselinePredictor>(ctx, baselines());
    } else if (name == "knn-user" || name == "knn-movie") {
        KnnConfig kc;
        kc.orientation =
            name == "knn-user" ? Orientation::User : Orientation::Movie;
        kc.k = cfg_.knn_k;
        kc.shrinkage = cfg_.knn_shrinkage;
        if (artifact_valid(artifact, key)) {
            const KnnModelFile file = load_knn_model(artifact);
            predictor = std::make_shared<KnnPredictor>(ctx, file.baselines,
                                                       file.config);
            log_hit(stage);
        } else {
            staged(stage, [&] {
                StageTimer timer;
                KnnModelFile file{kc, baselines()};
                save_knn_model(file, artifact);
                write_fp(artifact, key);
                predictor = std::make_shared<KnnPredictor>(
                    ctx, std::move(file.baselines), kc);
                log_computed(stage, timer.seconds());
            });
        }
    } else if (name == "svd" || name == "svdpp") {
        if (artifact_valid(artifact, key)) {
            predictor = std::make_shared<MfPredictor>(ctx, load_mf_model(artifact));
            log_hit(stage);
        } else {
            staged(stage, [&] {
                StageTimer timer;
                MfConfig mc = cfg_.mf;
                mc.implicit_feedback = name == "svdpp";
                MfModel model = fit_mf(ctx->matrix, mc);
                save_mf_model(model, artifact);
                write_fp(artifact, key);
                predictor = std::make_shared<MfPredictor>(ctx, std::move(model));
                log_computed(stage, timer.seconds());
            });
        }
    } else {
        const auto stacked = stacked_for(name);
        const bool with_base = name != "gbt-preds";
        if (artifact_valid(artifact, key)) {
            predictor = std::make_shared<GbtPredictor>(
                ctx, aggregates(), cfg_.features, stacked,
                load_gbt_model(artifact), with_base);
            log_hit(stage);
        } else {
            staged(stage, [&] {
                StageTimer timer;
                GbtModel model = fit_gbt_for(name);
                save_gbt_model(model, artifact);
                write_fp(artifact, key);
                predictor = std::make_shared<GbtPredictor>(
                    ctx, aggregates(), cfg_.features, stacked,
                    std::move(model), with_base);
                log_computed(stage, timer.seconds());
            });
        }
    }
    predictors_[name] = predictor;
    return predictor;
}

// ---- benchmark / run ----------------------------------------------------

std::filesystem::path Pipeline::benchmark() {
    const auto dir = cfg_.output_dir / "report";
    const auto artifact = dir / "report.json";
    const std::string key = report_key();
    if (artifact_valid(artifact, key)) {
        log_cached_upstream();
        for (const auto& name : cfg_.models)
            if (artifact_valid(models_dir_ / (name + ".bin"), model_key(name)))
                log_hit("train[" + name + "]");
        log_hit("benchmark");
        log_ << slurp(dir / "report.txt");
        return dir;
    }
    const auto ctx = context();
    RatingStore& test = test_store();
    staged("benchmark", [&] {
        StageTimer timer;
        std::vector<BenchmarkSpec> specs;
        specs.reserve(cfg_.models.size());
        for (const auto& name : cfg_.models)
            specs.push_back({name, [this, name] { return model(name); }});

        EvalReport report = reco::benchmark(specs, ctx->store, test);
        report.config_echo = cfg_.echo();

        write_report(report, dir);
        const std::string table = render_table(report);
        {
            std::ofstream out(dir / "report.txt", std::ios::binary);
            if (!out) throw std::runtime_error("cannot write report.txt");
            out << table;
        }
        write_fp(artifact, key);
        log_computed("benchmark", timer.seconds());
        log_ << table;
    });
    return dir;
}

std::filesystem::path Pipeline::run_all() {
    // split implies ingest; eda implies split.
    eda();
    return benchmark();
}

}  // namespace reco
