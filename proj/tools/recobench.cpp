// recobench: rating-prediction benchmark pipeline over Netflix-format data.
//
// Subcommands run individual stages (ingest, split, eda, similar,
// features, train, evaluate, benchmark) or the whole flow (run). Every
// stage caches its artifact under the output directory and is skipped
// when the cached fingerprint still matches.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "reco/config.hpp"
#include "reco/pipeline.hpp"

namespace {

struct Overrides {
    std::string config_path;
    std::string data_dir;
    std::string titles;
    std::string output_dir;
    std::optional<unsigned> threads;
    std::optional<std::uint64_t> seed;
};

reco::RunConfig make_config(const Overrides& o) {
    reco::ConfigResult result;
    if (!o.config_path.empty()) {
        result = reco::load_config(o.config_path);
    } else {
        // No file: defaults + environment overrides only.
        reco::ConfigFile file;
        reco::apply_env_overrides(file);
        result = reco::validate_config(file);
    }
    if (!result.ok()) {
        std::string joined = o.config_path.empty()
                                 ? std::string("invalid configuration")
                                 : "invalid config " + o.config_path;
        for (const auto& e : result.errors) joined += "\n  " + e;
        throw std::runtime_error(joined);
    }
    reco::RunConfig cfg = result.config;
    if (!o.data_dir.empty()) cfg.training_dir = o.data_dir;
    if (!o.titles.empty()) cfg.movie_titles = o.titles;
    if (!o.output_dir.empty()) cfg.output_dir = o.output_dir;
    if (o.threads) cfg.threads = *o.threads;
    if (o.seed) {
        cfg.seed = *o.seed;
        cfg.mf.seed = *o.seed;
        cfg.gbt.seed = *o.seed;
    }
    return cfg;
}

void print_store_line(const char* label, const reco::RatingStore& store) {
    std::cout << label << ": " << store.triples.size() << " ratings, "
              << store.user_count() << " users, " << store.movie_count()
              << " movies\n";
}

std::vector<std::string> pick_models(const std::vector<std::string>& requested,
                                     const reco::RunConfig& cfg) {
    if (requested.empty()) return cfg.models;
    for (const auto& name : requested)
        if (!reco::is_model_name(name))
            throw std::runtime_error("unknown model: " + name);
    return requested;
}

int run_cli(int argc, char** argv) {
    CLI::App app{
        "recobench: collaborative-filtering benchmark pipeline.\n"
        "Config values can be overridden per key with environment\n"
        "variables named RECOBENCH_<SECTION>__<KEY> (e.g.\n"
        "RECOBENCH_MF__FACTORS=50)."};
    app.require_subcommand(1);
    app.fallthrough();

    Overrides o;
    app.add_option("--config", o.config_path, "Run configuration file")
        ->check(CLI::ExistingFile);
    app.add_option("--data", o.data_dir,
                   "Training directory (overrides [data] training_dir)");
    app.add_option("--titles", o.titles,
                   "Movie titles file (overrides [data] movie_titles)");
    app.add_option("--output", o.output_dir,
                   "Output directory (overrides [data] output_dir)");
    unsigned threads_opt = 0;
    auto* threads_flag = app.add_option(
        "--threads", threads_opt, "Worker thread cap (0 = all cores)");
    std::uint64_t seed_opt = 0;
    auto* seed_flag =
        app.add_option("--seed", seed_opt, "Seed override for every stage");

    auto* ingest = app.add_subcommand(
        "ingest", "Parse the training directory into the binary cache");
    auto* split = app.add_subcommand(
        "split", "Materialize the temporal train/test split");
    auto* eda = app.add_subcommand(
        "eda", "Write the exploratory statistics report");

    auto* similar = app.add_subcommand(
        "similar", "Query cosine top-k neighbors of one user or movie");
    std::string sim_kind;
    std::int32_t sim_id = 0;
    std::size_t sim_k = 10;
    similar->add_option("--kind", sim_kind, "Anchor kind: user or movie")
        ->required()
        ->check(CLI::IsMember({"user", "movie"}));
    similar->add_option("--id", sim_id, "External anchor id")->required();
    similar->add_option("-k,--count", sim_k, "Neighbors to return");

    auto* features = app.add_subcommand(
        "features", "Write the regression feature tables (train + test) as CSV");
    std::string features_dir;
    features->add_option("--dir", features_dir,
                         "Destination directory (default <output>/features)");

    auto* train = app.add_subcommand("train", "Fit and persist models");
    std::vector<std::string> train_models;
    train->add_option("--model", train_models,
                      "Model name (repeatable; default: configured list)");

    auto* evaluate = app.add_subcommand(
        "evaluate", "Score models on the test split and print the table");
    std::vector<std::string> eval_models;
    evaluate->add_option("--model", eval_models,
                         "Model name (repeatable; default: configured list)");

    auto* benchmark = app.add_subcommand(
        "benchmark", "Evaluate the configured models and write the report");
    auto* run = app.add_subcommand(
        "run", "Full pipeline: ingest, split, eda, train, benchmark");

    CLI11_PARSE(app, argc, argv);
    if (*threads_flag) o.threads = threads_opt;
    if (*seed_flag) o.seed = seed_opt;

    const reco::RunConfig cfg = make_config(o);
    reco::Pipeline pipeline(cfg, std::cout);

    if (*ingest) {
        print_store_line("ingested", pipeline.store());
    } else if (*split) {
        print_store_line("train", pipeline.context()->store);
        print_store_line("test", pipeline.test_store());
    } else if (*eda) {
        std::cout << "eda written to " << pipeline.eda().string() << "\n";
    } else if (*similar) {
        const auto ctx = pipeline.context();
        const bool user_kind = sim_kind == "user";
        const auto& index =
            user_kind ? ctx->store.user_index : ctx->store.movie_index;
        const auto dense = index.dense(sim_id);
        if (!dense)
            throw std::runtime_error("unknown " + sim_kind + " id " +
                                     std::to_string(sim_id));
        const reco::NeighborList list =
            user_kind ? ctx->engine->top_k_similar_users(*dense, sim_k)
                      : ctx->engine->top_k_similar_movies(*dense, sim_k);
        std::cout << "rank,neighbor,score\n";
        char buf[64];
        for (std::size_t i = 0; i < list.neighbors.size(); ++i) {
            const auto& [id, score] = list.neighbors[i];
            std::snprintf(buf, sizeof buf, "%.17g", score);
            std::cout << i + 1 << ',' << index.external(id) << ',' << buf
                      << '\n';
        }
    } else if (*features) {
        const auto ctx = pipeline.context();
        const auto& test = pipeline.test_store();
        const std::filesystem::path dir =
            features_dir.empty() ? cfg.output_dir / "features"
                                 : std::filesystem::path(features_dir);
        std::filesystem::create_directories(dir);

        auto cap = [&](std::uint64_t n) -> std::optional<std::uint64_t> {
            if (cfg.feature_sample != 0 && cfg.feature_sample < n)
                return cfg.feature_sample;
            return std::nullopt;
        };
        auto emit = [&](const reco::FeatureTable& table, const char* name) {
            const auto out = dir / name;
            reco::write_feature_csv(table, out);
            std::cout << "wrote " << table.rows.size() << " rows x "
                      << table.schema.size() << " features to " << out.string();
            if (const auto padded = table.padded_rows(); padded != 0)
                std::cout << " (" << padded << " rows use slot padding)";
            std::cout << "\n";
        };
        emit(reco::build_training_table(*ctx, pipeline.aggregates(),
                                        cap(ctx->matrix.nnz), cfg.seed,
                                        cfg.features),
             "train.csv");
        emit(reco::build_table_for(*ctx, pipeline.aggregates(), test.triples,
                                   cap(test.triples.size()), cfg.seed,
                                   cfg.features),
             "test.csv");
    } else if (*train) {
        for (const auto& name : pick_models(train_models, cfg))
            pipeline.model(name);
    } else if (*evaluate) {
        std::vector<reco::BenchmarkSpec> specs;
        for (const auto& name : pick_models(eval_models, cfg))
            specs.push_back({name, [&pipeline, name] {
                                 return pipeline.model(name);
                             }});
        reco::EvalReport report = reco::benchmark(
            specs, pipeline.context()->store, pipeline.test_store());
        report.config_echo = cfg.echo();
        std::cout << reco::render_table(report);
    } else if (*benchmark) {
        pipeline.benchmark();
    } else if (*run) {
        pipeline.run_all();
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
