#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "reco/date.hpp"

namespace reco {

// One rating line: external ids as they appear in the files, rating in
// 1..5, date as a day count relative to 1998-01-01.
struct RatingTriple {
    std::int32_t user = 0;
    std::int32_t movie = 0;
    std::uint8_t rating = 0;
    std::int32_t day = 0;

    bool operator==(const RatingTriple&) const = default;
};

// Bijection external id <-> dense index, dense ids assigned in
// first-seen order.
class IdIndex {
public:
    std::uint32_t intern(std::int32_t external) {
        auto [it, inserted] = to_dense_.try_emplace(
            external, static_cast<std::uint32_t>(to_external_.size()));
        if (inserted) to_external_.push_back(external);
        return it->second;
    }

    std::optional<std::uint32_t> dense(std::int32_t external) const {
        auto it = to_dense_.find(external);
        if (it == to_dense_.end()) return std::nullopt;
        return it->second;
    }

    std::int32_t external(std::uint32_t dense_id) const {
        return to_external_.at(dense_id);
    }

    bool contains(std::int32_t external) const {
        return to_dense_.count(external) != 0;
    }

    std::size_t size() const { return to_external_.size(); }

    std::span<const std::int32_t> externals() const { return to_external_; }

    bool operator==(const IdIndex& other) const {
        return to_external_ == other.to_external_;
    }

private:
    std::unordered_map<std::int32_t, std::uint32_t> to_dense_;
    std::vector<std::int32_t> to_external_;
};

// Canonical rating list plus the id remapping tables.
struct RatingStore {
    std::vector<RatingTriple> triples;
    IdIndex user_index;
    IdIndex movie_index;

    std::size_t user_count() const { return user_index.size(); }
    std::size_t movie_count() const { return movie_index.size(); }

    bool operator==(const RatingStore& other) const {
        return triples == other.triples && user_index == other.user_index &&
               movie_index == other.movie_index;
    }
};

// Dual-orientation compressed sparse storage over dense ids. Entries in
// each row are sorted ascending by id; both views hold the same multiset
// of ratings.
struct SparseRatingMatrix {
    struct View {
        std::vector<std::uint64_t> offsets;  // size rows()+1
        std::vector<std::uint32_t> ids;
        std::vector<std::uint8_t> ratings;

        std::size_t rows() const {
            return offsets.empty() ? 0 : offsets.size() - 1;
        }
        std::size_t row_size(std::uint32_t r) const {
            return offsets[r + 1] - offsets[r];
        }
        std::span<const std::uint32_t> row_ids(std::uint32_t r) const {
            return {ids.data() + offsets[r], row_size(r)};
        }
        std::span<const std::uint8_t> row_ratings(std::uint32_t r) const {
            return {ratings.data() + offsets[r], row_size(r)};
        }
        // Rating of `id` in row r, if stored.
        std::optional<std::uint8_t> find(std::uint32_t r, std::uint32_t id) const;
    };

    View by_user;   // row = user, ids = movies
    View by_movie;  // row = movie, ids = users
    std::uint64_t nnz = 0;

    std::size_t user_count() const { return by_user.rows(); }
    std::size_t movie_count() const { return by_movie.rows(); }
};

struct MovieInfo {
    std::int32_t id = 0;
    std::optional<int> year;  // the files use literal NULL for unknown
    std::string title;

    bool operator==(const MovieInfo&) const = default;
};

struct MovieCatalog {
    std::vector<MovieInfo> movies;
    std::unordered_map<std::int32_t, std::size_t> by_id;

    const MovieInfo* find(std::int32_t id) const {
        auto it = by_id.find(id);
        return it == by_id.end() ? nullptr : &movies[it->second];
    }
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& file, std::size_t line, const std::string& what);

    const std::string& file() const { return file_; }
    std::size_t line() const { return line_; }

private:
    std::string file_;
    std::size_t line_;
};

// The directory actually holding mv_*.txt: `dir` itself, or its
// training_set/ child when `dir` is the dataset root.
std::filesystem::path resolve_training_dir(const std::filesystem::path& dir);

// Parses a directory of per-movie files (mv_*.txt): "<movie>:" header,
// then "<user>,<rating>,<YYYY-MM-DD>" lines. Files fan out to parallel
// workers; the merged store is built single-threaded in filename order,
// so dense ids are deterministic. Duplicate (user, movie) pairs are
// rejected. Accepts either the mv-file directory or its parent.
RatingStore parse_training_set(const std::filesystem::path& dir);

// Single training file, appended into an existing store.
void parse_training_file(const std::filesystem::path& file, RatingStore& store);

// movie_titles.txt: "MovieID,YearOfRelease,Title". The title may contain
// commas, so only the first two are separators; year may be NULL.
MovieCatalog parse_movie_titles(const std::filesystem::path& file);

// probe.txt: "<movie>:" header then one user id per line. Pairs are
// returned in file order as (movie, user).
std::vector<std::pair<std::int32_t, std::int32_t>> parse_probe(
    const std::filesystem::path& file);

// qualifying.txt: "<movie>:" header then "<user>,<YYYY-MM-DD>" lines.
struct QualifyingEntry {
    std::int32_t movie = 0;
    std::int32_t user = 0;
    std::int32_t day = 0;
};
std::vector<QualifyingEntry> parse_qualifying(const std::filesystem::path& file);

// Temporal 80/20-style split: triples sorted by (date, user, movie) for a
// reproducible boundary, first floor(fraction * N) into train. Both halves
// get freshly built id indices.
std::pair<RatingStore, RatingStore> temporal_split(const RatingStore& store,
                                                   double train_fraction);

SparseRatingMatrix build_matrix(const RatingStore& store);

// Writes the store back out in the per-movie text format. A store that
// came from parse_training_set round-trips to an identical store.
void serialize_training_set(const RatingStore& store,
                            const std::filesystem::path& dir);

// CSV with a "user,movie,rating,date" header, one row per triple.
void export_csv(const RatingStore& store, const std::filesystem::path& file);

// Versioned little-endian binary cache (magic NFLX1) so the 100M-row text
// parse is paid once.
void save_store(const RatingStore& store, const std::filesystem::path& file);
RatingStore load_store(const std::filesystem::path& file);

// FNV-1a over the triple stream and id tables; used as the split hash in
// reports and as a cache key component.
std::uint64_t store_content_hash(const RatingStore& store);

}  // namespace reco
