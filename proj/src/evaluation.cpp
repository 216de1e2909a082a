#include "reco/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "reco/numeric.hpp"
#include "reco/parallel.hpp"

namespace reco {

double rmse(std::span<const EvalPair> pairs) {
    if (pairs.empty()) throw std::invalid_argument("rmse: empty input");
    std::vector<double> sq(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const double e = pairs[i].first - pairs[i].second;
        sq[i] = e * e;
    }
    return std::sqrt(pairwise_sum(sq) / double(pairs.size()));
}

MapeResult mape(std::span<const EvalPair> pairs) {
    if (pairs.empty()) throw std::invalid_argument("mape: empty input");
    std::vector<double> terms(pairs.size());
    std::vector<double> abs_terms(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto [a, p] = pairs[i];
        if (a == 0.0) throw std::invalid_argument("mape: zero actual value");
        terms[i] = (a - p) / a;
        abs_terms[i] = std::abs(terms[i]);
    }
    MapeResult r;
    r.signed_percent = pairwise_sum(terms) / double(pairs.size()) * 100.0;
    r.absolute_percent = pairwise_sum(abs_terms) / double(pairs.size()) * 100.0;
    return r;
}

ModelEval evaluate(const Predictor& model, const RatingStore& test,
                   const std::string& name) {
    const std::size_t n = test.triples.size();
    if (n == 0) throw std::invalid_argument("evaluate: empty test store");

    std::vector<EvalPair> pairs(n);
    std::vector<std::uint8_t> levels(n);
    std::vector<std::uint8_t> degraded(n);
    parallel_for(n, [&](std::size_t i) {
        const RatingTriple& t = test.triples[i];
        const Prediction p = model.predict(t.user, t.movie);
        pairs[i] = {double(t.rating), p.value};
        levels[i] = std::uint8_t(p.fallback_level);
        degraded[i] = p.model_fallback ? 1 : 0;
    });

    ModelEval ev;
    ev.name = name;
    ev.n_evaluated = n;
    ev.rmse = rmse(pairs);
    const MapeResult m = mape(pairs);
    ev.mape_signed = m.signed_percent;
    ev.mape_absolute = m.absolute_percent;

    std::array<std::vector<double>, 4> level_sq;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = pairs[i].first - pairs[i].second;
        level_sq[levels[i]].push_back(e * e);
        ++ev.count_by_level[levels[i]];
        ev.n_model_fallback += degraded[i];
    }
    for (int l = 0; l < 4; ++l) {
        if (!level_sq[l].empty())
            ev.rmse_by_level[l] =
                std::sqrt(pairwise_sum(level_sq[l]) / double(level_sq[l].size()));
    }
    return ev;
}

DatasetFingerprint make_fingerprint(const RatingStore& train,
                                    const RatingStore& test) {
    DatasetFingerprint fp;
    fp.train_nnz = train.triples.size();
    fp.test_nnz = test.triples.size();
    fp.train_users = train.user_count();
    fp.train_movies = train.movie_count();
    fp.test_users = test.user_count();
    fp.test_movies = test.movie_count();
    fp.train_hash = store_content_hash(train);
    fp.test_hash = store_content_hash(test);
    return fp;
}

EvalReport benchmark(std::span<const BenchmarkSpec> specs,
                     const RatingStore& train, const RatingStore& test) {
    EvalReport report;
    report.fingerprint = make_fingerprint(train, test);
    for (const auto& spec : specs) {
        try {
            const auto predictor = spec.build();
            if (!predictor)
                throw std::runtime_error("model factory returned null");
            report.rows.push_back(evaluate(*predictor, test, spec.name));
        } catch (const std::exception& e) {
            ModelEval row;
            row.name = spec.name;
            row.ok = false;
            row.error = e.what();
            report.rows.push_back(std::move(row));
        }
    }
    std::sort(report.rows.begin(), report.rows.end(),
              [](const ModelEval& a, const ModelEval& b) {
                  if (a.ok != b.ok) return a.ok;  // failures sink to the bottom
                  if (a.ok && a.rmse != b.rmse) return a.rmse < b.rmse;
                  return a.name < b.name;
              });
    return report;
}

namespace {

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

std::string hex64(std::uint64_t v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)v);
    return buf;
}

}  // namespace

std::string render_table(const EvalReport& report) {
    std::ostringstream out;
    out << "model           rmse    mape%  mape_sgn%          n  "
        << "full/user/movie/global  degraded\n";
    for (const auto& row : report.rows) {
        char line[256];
        if (!row.ok) {
            std::snprintf(line, sizeof line, "%-13s  FAILED: %s\n",
                          row.name.c_str(), row.error.c_str());
            out << line;
            continue;
        }
        char levels[96];
        std::snprintf(levels, sizeof levels, "%llu/%llu/%llu/%llu",
                      (unsigned long long)row.count_by_level[0],
                      (unsigned long long)row.count_by_level[1],
                      (unsigned long long)row.count_by_level[2],
                      (unsigned long long)row.count_by_level[3]);
        std::snprintf(line, sizeof line,
                      "%-13s  %6.4f  %6.2f  %9.2f  %9llu  %22s  %8llu\n",
                      row.name.c_str(), row.rmse, row.mape_absolute,
                      row.mape_signed, (unsigned long long)row.n_evaluated,
                      levels, (unsigned long long)row.n_model_fallback);
        out << line;
    }
    return out.str();
}

std::string report_json_text(const EvalReport& report) {
    using json = nlohmann::ordered_json;
    json j;
    j["schema_version"] = 1;
    j["dataset"] = {{"train_nnz", report.fingerprint.train_nnz},
                    {"test_nnz", report.fingerprint.test_nnz},
                    {"train_users", report.fingerprint.train_users},
                    {"train_movies", report.fingerprint.train_movies},
                    {"test_users", report.fingerprint.test_users},
                    {"test_movies", report.fingerprint.test_movies},
                    {"train_hash", hex64(report.fingerprint.train_hash)},
                    {"test_hash", hex64(report.fingerprint.test_hash)}};
    j["models"] = json::array();
    static const char* level_names[4] = {"full", "user_only", "movie_only",
                                         "global"};
    for (const auto& row : report.rows) {
        json r;
        r["name"] = row.name;
        r["ok"] = row.ok;
        if (!row.ok) {
            r["error"] = row.error;
        } else {
            r["rmse"] = row.rmse;
            r["mape_absolute"] = row.mape_absolute;
            r["mape_signed"] = row.mape_signed;
            r["n_evaluated"] = row.n_evaluated;
            json counts, strat;
            for (int l = 0; l < 4; ++l) {
                counts[level_names[l]] = row.count_by_level[l];
                strat[level_names[l]] = row.rmse_by_level[l];
            }
            r["fallback_counts"] = counts;
            r["rmse_by_level"] = strat;
            r["model_fallback"] = row.n_model_fallback;
        }
        j["models"].push_back(std::move(r));
    }
    j["config"] = report.config_echo;
    return j.dump(2) + "\n";
}

void write_report(const EvalReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "report.json", std::ios::binary);
        if (!out) throw std::runtime_error("cannot write report.json");
        out << report_json_text(report);
    }
    std::ofstream csv(dir / "report.csv", std::ios::binary);
    if (!csv) throw std::runtime_error("cannot write report.csv");
    csv << "name,ok,rmse,mape_absolute,mape_signed,n_evaluated,"
           "full,user_only,movie_only,global,model_fallback,error\n";
    for (const auto& row : report.rows) {
        csv << row.name << ',' << (row.ok ? 1 : 0) << ','
            << fmt("%.17g", row.rmse) << ',' << fmt("%.17g", row.mape_absolute)
            << ',' << fmt("%.17g", row.mape_signed) << ',' << row.n_evaluated;
        for (int l = 0; l < 4; ++l) csv << ',' << row.count_by_level[l];
        csv << ',' << row.n_model_fallback << ',';
        // Commas in error text would break the row; replace them.
        std::string err = row.error;
        std::replace(err.begin(), err.end(), ',', ';');
        csv << err << '\n';
    }
}

}  // namespace reco
