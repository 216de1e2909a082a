#pragma once

#include <cstdint>
#include <filesystem>

#include "reco/dataset.hpp"

namespace reco {

// Seeded stand-in for the real data: ratings follow a planted low-rank
// model round(3 + p_u . q_j + noise) clipped to 1..5, with dates spread
// across the day range so the temporal split has structure to cut.
struct SyntheticConfig {
    std::uint32_t users = 2000;
    std::uint32_t movies = 500;
    int rank = 3;
    double factor_std = 0.8;   // planted factor scale
    double noise_std = 0.25;
    double density = 0.05;     // expected fraction of observed cells
    std::uint64_t seed = 1234;
    std::int32_t day_span = 2000;  // ratings dated day 0 .. day_span-1
};

RatingStore generate_synthetic(const SyntheticConfig& config = {});

// Companion catalog so parse_movie_titles has something to read.
MovieCatalog synthetic_catalog(const SyntheticConfig& config = {});

// Writes the store in the per-movie text layout plus movie_titles.txt,
// producing a directory the normal ingest path can consume.
void write_synthetic_dataset(const SyntheticConfig& config,
                             const std::filesystem::path& dir);

}  // namespace reco
