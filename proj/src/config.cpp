#include "reco/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace reco {

bool is_model_name(std::string_view name) {
    return std::find(kModelNames.begin(), kModelNames.end(), name) !=
           kModelNames.end();
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] != b[j - 1]);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace((unsigned char)s[b])) ++b;
    while (e > b && std::isspace((unsigned char)s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

std::string lower(std::string s) {
    for (auto& c : s) c = char(std::tolower((unsigned char)c));
    return s;
}

std::string upper(std::string s) {
    for (auto& c : s) c = char(std::toupper((unsigned char)c));
    return s;
}

// Shortest decimal string that round-trips the double.
std::string double_text(double v) {
    char buf[64];
    for (const int prec : {15, 16, 17}) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

// ---- schema --------------------------------------------------------

struct KeySpec {
    const char* section;
    const char* key;
};

constexpr KeySpec kSchema[] = {
    {"data", "training_dir"},   {"data", "movie_titles"},
    {"data", "output_dir"},     {"split", "fraction"},
    {"similarity", "shrinkage"},{"similarity", "min_support"},
    {"similarity", "cache_capacity"},
    {"baseline", "method"},     {"baseline", "epochs"},
    {"baseline", "reg_user"},   {"baseline", "reg_movie"},
    {"baseline", "lr"},
    {"knn", "k"},               {"knn", "shrinkage"},
    {"mf", "factors"},          {"mf", "epochs"},
    {"mf", "lr"},               {"mf", "reg"},
    {"mf", "init_std"},
    {"features", "top_k"},      {"features", "neighbor_feature"},
    {"features", "sample"},
    {"gbt", "rounds"},          {"gbt", "max_depth"},
    {"gbt", "shrinkage"},       {"gbt", "min_leaf"},
    {"gbt", "lambda"},
    {"run", "seed"},            {"run", "threads"},
    {"run", "models"},
};

bool known_key(const std::string& section, const std::string& key) {
    for (const auto& s : kSchema)
        if (section == s.section && key == s.key) return true;
    return false;
}

std::string nearest(const std::string& word,
                    const std::vector<std::string>& candidates) {
    std::string best;
    std::size_t best_d = std::string::npos;
    for (const auto& c : candidates) {
        const std::size_t d = edit_distance(word, c);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best_d <= 3 ? best : std::string();
}

// Collects typed values out of the raw entries.
class Reader {
public:
    Reader(const ConfigFile& file, std::vector<std::string>& errors)
        : file_(file), errors_(errors) {}

    const ConfigFile::Entry* find(const char* section, const char* key) const {
        const auto sit = file_.sections.find(section);
        if (sit == file_.sections.end()) return nullptr;
        const auto kit = sit->second.find(key);
        return kit == sit->second.end() ? nullptr : &kit->second;
    }

    std::string where(const char* section, const char* key,
                      const ConfigFile::Entry& e) const {
        std::string loc = std::string(section) + "." + key;
        if (e.line == 0) return loc + " (env)";
        return loc + " (line " + std::to_string(e.line) + ")";
    }

    void fail(const char* section, const char* key, const ConfigFile::Entry& e,
              const std::string& msg) const {
        errors_.push_back(where(section, key, e) + ": " + msg);
    }

    template <typename T, typename Parse, typename Check>
    void get(const char* section, const char* key, T& out, Parse parse,
             Check check, const char* expect) const {
        const auto* e = find(section, key);
        if (!e) return;
        T v{};
        if (!parse(e->value, v)) {
            fail(section, key, *e, "expected " + std::string(expect) +
                                      ", got '" + e->value + "'");
            return;
        }
        const std::string problem = check(v);
        if (!problem.empty()) {
            fail(section, key, *e, problem);
            return;
        }
        out = v;
    }

private:
    const ConfigFile& file_;
    std::vector<std::string>& errors_;
};

bool to_double(const std::string& s, double& out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    char* end = nullptr;
    out = std::strtod(t.c_str(), &end);
    return end == t.c_str() + t.size();
}

bool to_u64(const std::string& s, std::uint64_t& out) {
    const std::string t = trim(s);
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
    return ec == std::errc() && p == t.data() + t.size();
}

bool to_int(const std::string& s, int& out) {
    const std::string t = trim(s);
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
    return ec == std::errc() && p == t.data() + t.size();
}

bool to_string_id(const std::string& s, std::string& out) {
    out = lower(trim(s));
    return !out.empty();
}

}  // namespace

ConfigFile parse_config_text(const std::string& text) {
    ConfigFile file;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        if (!raw.empty() && raw.back() == '\r') raw.pop_back();
        const std::string line = trim(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3)
                throw std::runtime_error("config line " + std::to_string(lineno) +
                                         ": malformed section header");
            section = lower(trim(line.substr(1, line.size() - 2)));
            if (section.empty())
                throw std::runtime_error("config line " + std::to_string(lineno) +
                                         ": empty section name");
            file.sections.try_emplace(section);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(lineno) +
                                     ": expected key = value");
        if (section.empty())
            throw std::runtime_error("config line " + std::to_string(lineno) +
                                     ": key outside any [section]");
        const std::string key = lower(trim(line.substr(0, eq)));
        if (key.empty())
            throw std::runtime_error("config line " + std::to_string(lineno) +
                                     ": empty key");
        file.sections[section][key] = {trim(line.substr(eq + 1)), lineno};
    }
    return file;
}

void apply_env_overrides(ConfigFile& file) {
    for (const auto& spec : kSchema) {
        const std::string var = "RECOBENCH_" + upper(spec.section) + "__" +
                                upper(spec.key);
        if (const char* v = std::getenv(var.c_str()))
            file.sections[spec.section][spec.key] = {std::string(v), 0};
    }
}

ConfigResult validate_config(const ConfigFile& file) {
    ConfigResult result;
    auto& errors = result.errors;
    RunConfig& cfg = result.config;

    // Unknown sections/keys first, with suggestions.
    std::vector<std::string> section_names;
    for (const auto& s : kSchema)
        if (section_names.empty() || section_names.back() != s.section)
            section_names.push_back(s.section);
    for (const auto& [section, keys] : file.sections) {
        const bool section_known =
            std::find(section_names.begin(), section_names.end(), section) !=
            section_names.end();
        if (!section_known) {
            std::string msg = "unknown section [" + section + "]";
            const std::string hint = nearest(section, section_names);
            if (!hint.empty()) msg += "; did you mean [" + hint + "]?";
            errors.push_back(msg);
            continue;
        }
        std::vector<std::string> keys_here;
        for (const auto& s : kSchema)
            if (section == s.section) keys_here.push_back(s.key);
        for (const auto& [key, entry] : keys) {
            if (known_key(section, key)) continue;
            std::string msg = section + "." + key;
            msg += entry.line == 0 ? " (env)" : " (line " + std::to_string(entry.line) + ")";
            msg += ": unknown key";
            const std::string hint = nearest(key, keys_here);
            if (!hint.empty()) msg += "; did you mean '" + hint + "'?";
            errors.push_back(msg);
        }
    }

    const Reader r(file, errors);
    auto no_check = [](const auto&) { return std::string(); };
    auto positive = [](double v) {
        return v > 0.0 ? std::string() : std::string("must be > 0");
    };
    auto nonneg = [](double v) {
        return v >= 0.0 ? std::string() : std::string("must be >= 0");
    };
    auto at_least_one = [](auto v) {
        return v >= 1 ? std::string() : std::string("must be >= 1");
    };

    std::string path_text;
    auto get_path = [&](const char* key, std::filesystem::path& out,
                        bool must_exist) {
        const auto* e = r.find("data", key);
        if (!e) return;
        if (e->value.empty()) {
            r.fail("data", key, *e, "empty path");
            return;
        }
        std::filesystem::path p(e->value);
        if (must_exist && !std::filesystem::exists(p)) {
            r.fail("data", key, *e, "path does not exist: " + e->value);
            return;
        }
        out = std::move(p);
    };
    get_path("training_dir", cfg.training_dir, true);
    get_path("movie_titles", cfg.movie_titles, true);
    get_path("output_dir", cfg.output_dir, false);

    r.get("split", "fraction", cfg.fraction, to_double,
          [](double v) {
              return v > 0.0 && v < 1.0 ? std::string()
                                        : std::string("must be in (0,1)");
          },
          "a number");

    r.get("similarity", "shrinkage", cfg.similarity.shrinkage, to_double,
          nonneg, "a number");
    std::uint64_t min_support = cfg.similarity.min_support;
    r.get("similarity", "min_support", min_support, to_u64,
          [](std::uint64_t v) {
              if (v < 1) return std::string("must be >= 1");
              if (v > UINT32_MAX) return std::string("too large");
              return std::string();
          },
          "an integer");
    cfg.similarity.min_support = std::uint32_t(min_support);
    std::uint64_t cache_capacity = cfg.similarity.cache_capacity;
    r.get("similarity", "cache_capacity", cache_capacity, to_u64, no_check,
          "an integer");
    cfg.similarity.cache_capacity = std::size_t(cache_capacity);

    std::string method;
    r.get("baseline", "method", method, to_string_id,
          [](const std::string& v) {
              return v == "als" || v == "sgd"
                         ? std::string()
                         : std::string("must be 'als' or 'sgd'");
          },
          "a method name");
    if (method == "sgd") cfg.baseline.method = BaselineMethod::Sgd;
    r.get("baseline", "epochs", cfg.baseline.epochs, to_int, at_least_one,
          "an integer");
    r.get("baseline", "reg_user", cfg.baseline.reg_user, to_double, nonneg,
          "a number");
    r.get("baseline", "reg_movie", cfg.baseline.reg_movie, to_double, nonneg,
          "a number");
    r.get("baseline", "lr", cfg.baseline.lr, to_double, positive, "a number");

    r.get("knn", "k", cfg.knn_k, to_u64, at_least_one, "an integer");
    r.get("knn", "shrinkage", cfg.knn_shrinkage, to_double, nonneg, "a number");

    r.get("mf", "factors", cfg.mf.factors, to_int,
          [](int v) { return v >= 0 ? std::string() : std::string("must be >= 0"); },
          "an integer");
    r.get("mf", "epochs", cfg.mf.epochs, to_int, at_least_one, "an integer");
    r.get("mf", "lr", cfg.mf.lr, to_double, positive, "a number");
    r.get("mf", "reg", cfg.mf.reg, to_double, nonneg, "a number");
    r.get("mf", "init_std", cfg.mf.init_std, to_double, nonneg, "a number");

    r.get("features", "top_k", cfg.features.top_k, to_u64, at_least_one,
          "an integer");
    std::string nf;
    r.get("features", "neighbor_feature", nf, to_string_id,
          [](const std::string& v) {
              return v == "similarity" || v == "rating"
                         ? std::string()
                         : std::string("must be 'similarity' or 'rating'");
          },
          "a mode name");
    if (nf == "rating") cfg.features.neighbor_feature = NeighborFeature::Rating;
    r.get("features", "sample", cfg.feature_sample, to_u64, no_check,
          "an integer");

    r.get("gbt", "rounds", cfg.gbt.rounds, to_int, at_least_one, "an integer");
    r.get("gbt", "max_depth", cfg.gbt.max_depth, to_int,
          [](int v) { return v >= 0 ? std::string() : std::string("must be >= 0"); },
          "an integer");
    r.get("gbt", "shrinkage", cfg.gbt.shrinkage, to_double,
          [](double v) {
              return v > 0.0 && v <= 1.0 ? std::string()
                                         : std::string("must be in (0,1]");
          },
          "a number");
    r.get("gbt", "min_leaf", cfg.gbt.min_leaf, to_u64, at_least_one,
          "an integer");
    r.get("gbt", "lambda", cfg.gbt.lambda, to_double, nonneg, "a number");

    r.get("run", "seed", cfg.seed, to_u64, no_check, "an integer");
    std::uint64_t threads = cfg.threads;
    r.get("run", "threads", threads, to_u64,
          [](std::uint64_t v) {
              return v <= 4096 ? std::string() : std::string("must be <= 4096");
          },
          "an integer");
    cfg.threads = unsigned(threads);

    if (const auto* e = r.find("run", "models")) {
        std::vector<std::string> models;
        std::stringstream ss(e->value);
        std::string item;
        while (std::getline(ss, item, ',')) {
            const std::string name = lower(trim(item));
            if (name.empty()) continue;
            if (!is_model_name(name)) {
                std::string msg = "unknown model '" + name + "'";
                const std::vector<std::string> all(kModelNames.begin(),
                                                   kModelNames.end());
                const std::string hint = nearest(name, all);
                if (!hint.empty()) msg += "; did you mean '" + hint + "'?";
                r.fail("run", "models", *e, msg);
            } else {
                models.push_back(name);
            }
        }
        if (models.empty())
            r.fail("run", "models", *e, "at least one model required");
        else
            cfg.models = std::move(models);
    }

    // Seed the derived configs that share the global seed.
    cfg.mf.seed = cfg.seed;
    cfg.gbt.seed = cfg.seed;
    return result;
}

ConfigResult load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        ConfigResult r;
        r.errors.push_back("cannot read config file: " + path.string());
        return r;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    ConfigFile file;
    try {
        file = parse_config_text(buf.str());
    } catch (const std::exception& e) {
        ConfigResult r;
        r.errors.push_back(e.what());
        return r;
    }
    apply_env_overrides(file);
    return validate_config(file);
}

std::string RunConfig::echo() const {
    std::ostringstream out;
    out << "[data]\n";
    // Unset optional paths stay out of the echo; an empty value would not
    // survive re-validation.
    if (!training_dir.empty())
        out << "training_dir = " << training_dir.string() << "\n";
    if (!movie_titles.empty())
        out << "movie_titles = " << movie_titles.string() << "\n";
    out << "output_dir = " << output_dir.string() << "\n";
    out << "[split]\n";
    out << "fraction = " << double_text(fraction) << "\n";
    out << "[similarity]\n";
    out << "shrinkage = " << double_text(similarity.shrinkage) << "\n";
    out << "min_support = " << similarity.min_support << "\n";
    out << "cache_capacity = " << similarity.cache_capacity << "\n";
    out << "[baseline]\n";
    out << "method = " << (baseline.method == BaselineMethod::Als ? "als" : "sgd")
        << "\n";
    out << "epochs = " << baseline.epochs << "\n";
    out << "reg_user = " << double_text(baseline.reg_user) << "\n";
    out << "reg_movie = " << double_text(baseline.reg_movie) << "\n";
    out << "lr = " << double_text(baseline.lr) << "\n";
    out << "[knn]\n";
    out << "k = " << knn_k << "\n";
    out << "shrinkage = " << double_text(knn_shrinkage) << "\n";
    out << "[mf]\n";
    out << "factors = " << mf.factors << "\n";
    out << "epochs = " << mf.epochs << "\n";
    out << "lr = " << double_text(mf.lr) << "\n";
    out << "reg = " << double_text(mf.reg) << "\n";
    out << "init_std = " << double_text(mf.init_std) << "\n";
    out << "[features]\n";
    out << "top_k = " << features.top_k << "\n";
    out << "neighbor_feature = "
        << (features.neighbor_feature == NeighborFeature::Similarity
                ? "similarity"
                : "rating")
        << "\n";
    out << "sample = " << feature_sample << "\n";
    out << "[gbt]\n";
    out << "rounds = " << gbt.rounds << "\n";
    out << "max_depth = " << gbt.max_depth << "\n";
    out << "shrinkage = " << double_text(gbt.shrinkage) << "\n";
    out << "min_leaf = " << gbt.min_leaf << "\n";
    out << "lambda = " << double_text(gbt.lambda) << "\n";
    out << "[run]\n";
    out << "seed = " << seed << "\n";
    // threads affects scheduling only, never results; keeping it out of
    // the echo keeps caches and report bytes stable across machines.
    out << "models = ";
    for (std::size_t i = 0; i < models.size(); ++i) {
        if (i) out << ',';
        out << models[i];
    }
    out << "\n";
    return out.str();
}

}  // namespace reco
