#include "reco/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "reco/hash.hpp"
#include "reco/parallel.hpp"
#include "reco/serialize.hpp"

namespace reco {

namespace fs = std::filesystem;

ParseError::ParseError(const std::string& file, std::size_t line,
                       const std::string& what)
    : std::runtime_error(file + ":" + std::to_string(line) + ": " + what),
      file_(file),
      line_(line) {}

std::optional<std::uint8_t> SparseRatingMatrix::View::find(
    std::uint32_t r, std::uint32_t id) const {
    const auto row = row_ids(r);
    const auto it = std::lower_bound(row.begin(), row.end(), id);
    if (it == row.end() || *it != id) return std::nullopt;
    return ratings[offsets[r] + static_cast<std::size_t>(it - row.begin())];
}

namespace {

// Lines of a whole file without copying; final newline optional.
class LineCursor {
public:
    explicit LineCursor(std::string_view text) : rest_(text) {}

    bool next(std::string_view& line) {
        if (rest_.empty()) return false;
        const auto nl = rest_.find('\n');
        if (nl == std::string_view::npos) {
            line = rest_;
            rest_ = {};
        } else {
            line = rest_.substr(0, nl);
            rest_.remove_prefix(nl + 1);
        }
        if (!line.empty() && line.back() == '\r') line = line.substr(0, line.size() - 1);
        ++lineno_;
        return true;
    }

    std::size_t lineno() const { return lineno_; }

private:
    std::string_view rest_;
    std::size_t lineno_ = 0;
};

std::string slurp(const fs::path& file) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw ParseError(file.string(), 0, "cannot open file");
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

bool parse_i32(std::string_view s, std::int32_t& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
}

struct RawRating {
    std::int32_t user;
    std::uint8_t rating;
    std::int32_t day;
};

struct ParsedFile {
    std::int32_t movie = 0;
    std::vector<RawRating> ratings;
};

ParsedFile parse_one_training_file(const fs::path& file) {
    const std::string text = slurp(file);
    LineCursor cursor(text);
    const std::string fname = file.string();

    std::string_view line;
    if (!cursor.next(line))
        throw ParseError(fname, 1, "empty file, expected '<movie>:' header");
    if (line.empty() || line.back() != ':')
        throw ParseError(fname, cursor.lineno(), "malformed header, expected '<movie>:'");
    ParsedFile out;
    if (!parse_i32(line.substr(0, line.size() - 1), out.movie))
        throw ParseError(fname, cursor.lineno(), "malformed header, movie id is not an integer");

    std::unordered_set<std::int32_t> seen_users;
    while (cursor.next(line)) {
        if (line.empty())
            throw ParseError(fname, cursor.lineno(), "empty rating line");
        const auto c1 = line.find(',');
        const auto c2 = c1 == std::string_view::npos ? c1 : line.find(',', c1 + 1);
        if (c2 == std::string_view::npos)
            throw ParseError(fname, cursor.lineno(),
                             "malformed rating line, expected 'user,rating,date'");
        std::int32_t user, rating;
        if (!parse_i32(line.substr(0, c1), user))
            throw ParseError(fname, cursor.lineno(), "user id is not an integer");
        if (!parse_i32(line.substr(c1 + 1, c2 - c1 - 1), rating))
            throw ParseError(fname, cursor.lineno(), "rating is not an integer");
        if (rating < 1 || rating > 5)
            throw ParseError(fname, cursor.lineno(),
                             "rating " + std::to_string(rating) + " outside 1..5");
        const auto date = parse_date(line.substr(c2 + 1));
        if (!date)
            throw ParseError(fname, cursor.lineno(), "unparsable date '" +
                                                         std::string(line.substr(c2 + 1)) + "'");
        if (!seen_users.insert(user).second)
            throw ParseError(fname, cursor.lineno(),
                             "duplicate rating for user " + std::to_string(user) +
                                 ", movie " + std::to_string(out.movie));
        out.ratings.push_back(RawRating{user, static_cast<std::uint8_t>(rating),
                                        day_from_date(*date)});
    }
    return out;
}

void merge_parsed_files(std::vector<ParsedFile>& files,
                        const std::vector<fs::path>& names, RatingStore& store) {
    // Movies normally appear in exactly one file; when an id repeats, the
    // cross-file duplicate check runs for just that movie.
    std::unordered_map<std::int32_t, std::vector<std::size_t>> files_by_movie;
    for (std::size_t i = 0; i < files.size(); ++i)
        files_by_movie[files[i].movie].push_back(i);
    for (const auto& [movie, idxs] : files_by_movie) {
        if (idxs.size() < 2) continue;
        std::unordered_set<std::int32_t> users;
        for (std::size_t idx : idxs) {
            for (const auto& r : files[idx].ratings) {
                if (!users.insert(r.user).second)
                    throw ParseError(names[idx].string(), 0,
                                     "duplicate rating for user " + std::to_string(r.user) +
                                         ", movie " + std::to_string(movie) +
                                         " across files");
            }
        }
    }

    std::size_t total = 0;
    for (const auto& f : files) total += f.ratings.size();
    store.triples.reserve(store.triples.size() + total);

    for (auto& f : files) {
        store.movie_index.intern(f.movie);
        for (const auto& r : f.ratings) {
            store.user_index.intern(r.user);
            store.triples.push_back(RatingTriple{r.user, f.movie, r.rating, r.day});
        }
        f.ratings.clear();
        f.ratings.shrink_to_fit();
    }
}

}  // namespace

fs::path resolve_training_dir(const fs::path& dir) {
    if (fs::is_directory(dir))
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (!entry.is_regular_file()) continue;
            const std::string name = entry.path().filename().string();
            if (name.starts_with("mv_") && name.ends_with(".txt")) return dir;
        }
    if (fs::is_directory(dir / "training_set")) return dir / "training_set";
    return dir;
}

RatingStore parse_training_set(const fs::path& root) {
    const fs::path dir = resolve_training_dir(root);
    if (!fs::exists(dir))
        throw ParseError(dir.string(), 0, "training set directory does not exist");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string name = entry.path().filename().string();
        if (name.starts_with("mv_") && name.ends_with(".txt"))
            files.push_back(entry.path());
    }
    if (files.empty())
        throw ParseError(dir.string(), 0, "no mv_*.txt files found");
    std::sort(files.begin(), files.end());

    std::vector<ParsedFile> parsed(files.size());
    std::vector<std::exception_ptr> errors(files.size());
    parallel_for(files.size(), [&](std::size_t i) {
        try {
            parsed[i] = parse_one_training_file(files[i]);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    });
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    RatingStore store;
    merge_parsed_files(parsed, files, store);
    return store;
}

void parse_training_file(const fs::path& file, RatingStore& store) {
    std::vector<ParsedFile> parsed{parse_one_training_file(file)};
    // Still must not collide with ratings already in the store.
    if (store.movie_index.contains(parsed[0].movie)) {
        const auto dense_movie = *store.movie_index.dense(parsed[0].movie);
        std::unordered_set<std::int32_t> users;
        for (const auto& t : store.triples)
            if (*store.movie_index.dense(t.movie) == dense_movie) users.insert(t.user);
        for (const auto& r : parsed[0].ratings)
            if (users.count(r.user))
                throw ParseError(file.string(), 0,
                                 "duplicate rating for user " + std::to_string(r.user) +
                                     ", movie " + std::to_string(parsed[0].movie));
    }
    std::vector<fs::path> names{file};
    merge_parsed_files(parsed, names, store);
}

MovieCatalog parse_movie_titles(const fs::path& file) {
    const std::string text = slurp(file);
    LineCursor cursor(text);
    const std::string fname = file.string();
    MovieCatalog catalog;

    std::string_view line;
    while (cursor.next(line)) {
        if (line.empty()) continue;
        const auto c1 = line.find(',');
        const auto c2 = c1 == std::string_view::npos ? c1 : line.find(',', c1 + 1);
        if (c2 == std::string_view::npos)
            throw ParseError(fname, cursor.lineno(),
                             "malformed line, expected 'id,year,title'");
        MovieInfo info;
        if (!parse_i32(line.substr(0, c1), info.id))
            throw ParseError(fname, cursor.lineno(), "movie id is not an integer");
        const auto year_str = line.substr(c1 + 1, c2 - c1 - 1);
        if (year_str != "NULL") {
            std::int32_t y;
            if (!parse_i32(year_str, y))
                throw ParseError(fname, cursor.lineno(),
                                 "year is neither an integer nor NULL");
            info.year = y;
        }
        info.title = std::string(line.substr(c2 + 1));
        if (!catalog.by_id.emplace(info.id, catalog.movies.size()).second)
            throw ParseError(fname, cursor.lineno(),
                             "duplicate movie id " + std::to_string(info.id));
        catalog.movies.push_back(std::move(info));
    }
    return catalog;
}

namespace {

// Shared reader for the "<movie>:" header-then-entries formats.
template <typename OnEntry>
void parse_headed_list(const fs::path& file, OnEntry&& on_entry) {
    const std::string text = slurp(file);
    LineCursor cursor(text);
    const std::string fname = file.string();

    std::int32_t movie = 0;
    bool have_movie = false;
    std::string_view line;
    while (cursor.next(line)) {
        if (line.empty()) continue;
        if (line.back() == ':') {
            if (!parse_i32(line.substr(0, line.size() - 1), movie))
                throw ParseError(fname, cursor.lineno(),
                                 "malformed header, movie id is not an integer");
            have_movie = true;
            continue;
        }
        if (!have_movie)
            throw ParseError(fname, cursor.lineno(), "entry before any '<movie>:' header");
        on_entry(fname, cursor.lineno(), movie, line);
    }
}

}  // namespace

std::vector<std::pair<std::int32_t, std::int32_t>> parse_probe(const fs::path& file) {
    std::vector<std::pair<std::int32_t, std::int32_t>> pairs;
    parse_headed_list(file, [&](const std::string& fname, std::size_t lineno,
                                std::int32_t movie, std::string_view line) {
        std::int32_t user;
        if (!parse_i32(line, user))
            throw ParseError(fname, lineno, "user id is not an integer");
        pairs.emplace_back(movie, user);
    });
    return pairs;
}

std::vector<QualifyingEntry> parse_qualifying(const fs::path& file) {
    std::vector<QualifyingEntry> entries;
    parse_headed_list(file, [&](const std::string& fname, std::size_t lineno,
                                std::int32_t movie, std::string_view line) {
        const auto c1 = line.find(',');
        if (c1 == std::string_view::npos)
            throw ParseError(fname, lineno, "expected 'user,date'");
        std::int32_t user;
        if (!parse_i32(line.substr(0, c1), user))
            throw ParseError(fname, lineno, "user id is not an integer");
        const auto date = parse_date(line.substr(c1 + 1));
        if (!date) throw ParseError(fname, lineno, "unparsable date");
        entries.push_back(QualifyingEntry{movie, user, day_from_date(*date)});
    });
    return entries;
}

std::pair<RatingStore, RatingStore> temporal_split(const RatingStore& store,
                                                   double train_fraction) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("train_fraction must be in (0,1), got " +
                                    std::to_string(train_fraction));
    if (store.triples.empty())
        throw std::invalid_argument("cannot split an empty store");

    std::vector<RatingTriple> sorted = store.triples;
    std::sort(sorted.begin(), sorted.end(),
              [](const RatingTriple& a, const RatingTriple& b) {
                  if (a.day != b.day) return a.day < b.day;
                  if (a.user != b.user) return a.user < b.user;
                  return a.movie < b.movie;
              });

    const auto n_train = static_cast<std::size_t>(
        std::floor(train_fraction * static_cast<double>(sorted.size())));

    std::pair<RatingStore, RatingStore> out;
    auto fill = [](RatingStore& s, std::span<const RatingTriple> triples) {
        s.triples.assign(triples.begin(), triples.end());
        for (const auto& t : s.triples) {
            s.user_index.intern(t.user);
            s.movie_index.intern(t.movie);
        }
    };
    fill(out.first, std::span(sorted).first(n_train));
    fill(out.second, std::span(sorted).subspan(n_train));
    return out;
}

SparseRatingMatrix build_matrix(const RatingStore& store) {
    SparseRatingMatrix m;
    const std::size_t n_users = store.user_count();
    const std::size_t n_movies = store.movie_count();
    m.nnz = store.triples.size();

    auto build_view = [&](SparseRatingMatrix::View& view, std::size_t rows,
                          bool user_major) {
        view.offsets.assign(rows + 1, 0);
        std::vector<std::uint32_t> row_of(store.triples.size());
        std::vector<std::uint32_t> col_of(store.triples.size());
        for (std::size_t i = 0; i < store.triples.size(); ++i) {
            const auto& t = store.triples[i];
            const std::uint32_t u = *store.user_index.dense(t.user);
            const std::uint32_t j = *store.movie_index.dense(t.movie);
            row_of[i] = user_major ? u : j;
            col_of[i] = user_major ? j : u;
            ++view.offsets[row_of[i] + 1];
        }
        for (std::size_t r = 0; r < rows; ++r) view.offsets[r + 1] += view.offsets[r];

        view.ids.resize(store.triples.size());
        view.ratings.resize(store.triples.size());
        std::vector<std::uint64_t> cursor(view.offsets.begin(), view.offsets.end() - 1);
        for (std::size_t i = 0; i < store.triples.size(); ++i) {
            const auto pos = cursor[row_of[i]]++;
            view.ids[pos] = col_of[i];
            view.ratings[pos] = store.triples[i].rating;
        }

        // Sort each row by id; duplicates violate the store invariant.
        parallel_for(rows, [&](std::size_t r) {
            const auto b = view.offsets[r], e = view.offsets[r + 1];
            std::vector<std::pair<std::uint32_t, std::uint8_t>> row(e - b);
            for (std::uint64_t i = b; i < e; ++i)
                row[i - b] = {view.ids[i], view.ratings[i]};
            std::sort(row.begin(), row.end());
            for (std::uint64_t i = b; i < e; ++i) {
                view.ids[i] = row[i - b].first;
                view.ratings[i] = row[i - b].second;
            }
        });
        for (std::size_t r = 0; r < rows; ++r) {
            const auto b = view.offsets[r], e = view.offsets[r + 1];
            for (std::uint64_t i = b + 1; i < e; ++i)
                if (view.ids[i] == view.ids[i - 1])
                    throw std::invalid_argument("duplicate (user, movie) pair in store");
        }
    };

    build_view(m.by_user, n_users, true);
    build_view(m.by_movie, n_movies, false);
    return m;
}

void serialize_training_set(const RatingStore& store, const fs::path& dir) {
    fs::create_directories(dir);
    // Bucket triples per movie preserving store order, then emit files in
    // ascending external id so a re-parse sees them in the same order.
    std::unordered_map<std::int32_t, std::vector<const RatingTriple*>> per_movie;
    for (const auto& t : store.triples) per_movie[t.movie].push_back(&t);

    std::vector<std::int32_t> movie_ids(store.movie_index.externals().begin(),
                                        store.movie_index.externals().end());
    std::sort(movie_ids.begin(), movie_ids.end());

    for (const std::int32_t movie : movie_ids) {
        char name[32];
        std::snprintf(name, sizeof(name), "mv_%07d.txt", movie);
        std::ofstream os(dir / name, std::ios::binary);
        if (!os) throw std::runtime_error("cannot write " + (dir / name).string());
        os << movie << ":\n";
        auto it = per_movie.find(movie);
        if (it != per_movie.end()) {
            for (const RatingTriple* t : it->second) {
                os << t->user << ',' << int(t->rating) << ','
                   << format_date(date_from_day(t->day)) << '\n';
            }
        }
    }
}

void export_csv(const RatingStore& store, const fs::path& file) {
    std::ofstream os(file, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + file.string());
    os << "user,movie,rating,date\n";
    for (const auto& t : store.triples) {
        os << t.user << ',' << t.movie << ',' << int(t.rating) << ','
           << format_date(date_from_day(t.day)) << '\n';
    }
}

namespace {
constexpr char kStoreMagic[] = "NFLX1";
constexpr std::uint8_t kStoreVersion = 1;
}  // namespace

void save_store(const RatingStore& store, const fs::path& file) {
    std::ofstream os(file, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + file.string());
    os.write(kStoreMagic, 5);
    write_u8(os, kStoreVersion);
    write_u64(os, store.triples.size());
    write_u64(os, store.user_count());
    write_u64(os, store.movie_count());
    for (const std::int32_t ext : store.user_index.externals()) write_i32(os, ext);
    for (const std::int32_t ext : store.movie_index.externals()) write_i32(os, ext);
    for (const auto& t : store.triples) {
        write_u32(os, *store.user_index.dense(t.user));
        write_u32(os, *store.movie_index.dense(t.movie));
        write_u8(os, t.rating);
        write_i32(os, t.day);
    }
    if (!os) throw std::runtime_error("write failed for " + file.string());
}

RatingStore load_store(const fs::path& file) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + file.string());
    expect_magic(is, kStoreMagic, "rating store cache");
    const auto version = read_u8(is);
    if (version != kStoreVersion)
        throw std::runtime_error("unsupported store cache version " +
                                 std::to_string(version));
    const auto n_triples = read_u64(is);
    const auto n_users = read_u64(is);
    const auto n_movies = read_u64(is);

    RatingStore store;
    std::vector<std::int32_t> users(n_users), movies(n_movies);
    for (auto& u : users) u = read_i32(is);
    for (auto& j : movies) j = read_i32(is);
    for (const auto u : users) store.user_index.intern(u);
    for (const auto j : movies) store.movie_index.intern(j);

    store.triples.resize(n_triples);
    for (auto& t : store.triples) {
        const auto du = read_u32(is);
        const auto dj = read_u32(is);
        if (du >= n_users || dj >= n_movies)
            throw std::runtime_error("corrupt store cache: dense id out of range");
        t.user = users[du];
        t.movie = movies[dj];
        t.rating = read_u8(is);
        t.day = read_i32(is);
    }
    return store;
}

std::uint64_t store_content_hash(const RatingStore& store) {
    Fnv1a64 h;
    h.update_pod(std::uint64_t{store.triples.size()});
    h.update_pod(std::uint64_t{store.user_count()});
    h.update_pod(std::uint64_t{store.movie_count()});
    for (const std::int32_t ext : store.user_index.externals()) h.update_pod(ext);
    for (const std::int32_t ext : store.movie_index.externals()) h.update_pod(ext);
    for (const auto& t : store.triples) {
        h.update_pod(t.user);
        h.update_pod(t.movie);
        h.update_pod(t.rating);
        h.update_pod(t.day);
    }
    return h.digest();
}

}  // namespace reco
