// recobench-fixture: writes a seeded synthetic dataset in the on-disk
// layout the ingest stage expects (training_set/mv_*.txt plus
// movie_titles.txt). The real rating data cannot be redistributed, so CI
// and the examples run against these planted low-rank fixtures.

#include <iostream>

#include "CLI11.hpp"
#include "reco/synthetic.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Generate a synthetic planted low-rank rating dataset."};

    std::string output = "fixture";
    reco::SyntheticConfig cfg;
    app.add_option("--output", output, "Destination directory");
    app.add_option("--users", cfg.users, "Number of users");
    app.add_option("--movies", cfg.movies, "Number of movies");
    app.add_option("--rank", cfg.rank, "Planted factor rank");
    app.add_option("--density", cfg.density, "Fraction of cells rated");
    app.add_option("--factor-std", cfg.factor_std, "Factor entry scale");
    app.add_option("--noise-std", cfg.noise_std, "Additive noise scale");
    app.add_option("--days", cfg.day_span, "Rating date span in days");
    app.add_option("--seed", cfg.seed, "Generator seed");

    CLI11_PARSE(app, argc, argv);

    try {
        reco::write_synthetic_dataset(cfg, output);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cout << "wrote " << cfg.users << " users x " << cfg.movies
              << " movies (density " << cfg.density << ", seed " << cfg.seed
              << ") to " << output << "\n";
    return 0;
}
