#include "reco/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "reco/rng.hpp"

namespace reco {

RatingStore generate_synthetic(const SyntheticConfig& config) {
    if (config.users == 0 || config.movies == 0)
        throw std::invalid_argument("generate_synthetic: zero dimension");
    if (config.rank < 0 || config.density <= 0.0 || config.density > 1.0)
        throw std::invalid_argument("generate_synthetic: bad rank or density");
    if (config.day_span < 1)
        throw std::invalid_argument("generate_synthetic: day_span < 1");

    Rng rng(config.seed);
    const std::size_t r = std::size_t(config.rank);
    std::vector<double> p(std::size_t(config.users) * r);
    for (auto& v : p) v = rng.normal(0.0, config.factor_std);
    std::vector<double> q(std::size_t(config.movies) * r);
    for (auto& v : q) v = rng.normal(0.0, config.factor_std);

    RatingStore store;
    const double mean_count = config.density * double(config.movies);
    for (std::uint32_t u = 0; u < config.users; ++u) {
        // Between 0.5x and 1.5x the mean count, at least one rating, so
        // per-user activity varies like the real data's does.
        auto n_u = std::uint64_t(mean_count * (0.5 + rng.uniform01()));
        n_u = std::clamp<std::uint64_t>(n_u, 1, config.movies);
        const auto picks = rng.sample_indices(config.movies, n_u);
        for (const auto j : picks) {
            double dot = 0.0;
            for (std::size_t d = 0; d < r; ++d)
                dot += p[u * r + d] * q[j * r + d];
            const double raw = 3.0 + dot + rng.normal(0.0, config.noise_std);
            const long stars = std::clamp(std::lround(raw), 1L, 5L);

            RatingTriple t;
            t.user = std::int32_t(u) + 1;
            t.movie = std::int32_t(j) + 1;
            t.rating = std::uint8_t(stars);
            t.day = std::int32_t(rng.uniform_below(std::uint64_t(config.day_span)));
            store.user_index.intern(t.user);
            store.movie_index.intern(t.movie);
            store.triples.push_back(t);
        }
    }
    return store;
}

MovieCatalog synthetic_catalog(const SyntheticConfig& config) {
    MovieCatalog catalog;
    catalog.movies.reserve(config.movies);
    for (std::uint32_t j = 1; j <= config.movies; ++j) {
        MovieInfo info;
        info.id = std::int32_t(j);
        info.year = 1990 + int(j % 16);
        info.title = "Synthetic Movie " + std::to_string(j);
        catalog.by_id[info.id] = catalog.movies.size();
        catalog.movies.push_back(std::move(info));
    }
    return catalog;
}

void write_synthetic_dataset(const SyntheticConfig& config,
                             const std::filesystem::path& dir) {
    const RatingStore store = generate_synthetic(config);
    std::filesystem::create_directories(dir / "training_set");
    serialize_training_set(store, dir / "training_set");

    const MovieCatalog catalog = synthetic_catalog(config);
    std::ofstream out(dir / "movie_titles.txt", std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write movie_titles.txt under " +
                                 dir.string());
    for (const auto& m : catalog.movies) {
        out << m.id << ',';
        if (m.year)
            out << *m.year;
        else
            out << "NULL";
        out << ',' << m.title << '\n';
    }
}

}  // namespace reco
