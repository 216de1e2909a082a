#include "reco/model_io.hpp"

#include <fstream>

#include "reco/serialize.hpp"

namespace reco {

namespace {

constexpr char kMagic[] = "RBM1";

std::ofstream open_out(const std::filesystem::path& file) {
    std::ofstream os(file, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write model file: " + file.string());
    return os;
}

std::ifstream open_in(const std::filesystem::path& file) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read model file: " + file.string());
    return is;
}

void write_header(std::ostream& os, ModelKind kind, std::uint32_t version) {
    os.write(kMagic, 4);
    write_u8(os, std::uint8_t(kind));
    write_u32(os, version);
}

std::uint32_t read_header(std::istream& is, ModelKind expected,
                          const char* what) {
    expect_magic(is, kMagic, what);
    const auto kind = ModelKind(read_u8(is));
    if (kind != expected)
        throw std::runtime_error(std::string("model kind mismatch for ") + what);
    const std::uint32_t version = read_u32(is);
    if (version != 1)
        throw std::runtime_error(std::string("unsupported version for ") + what);
    return version;
}

void write_baseline_payload(std::ostream& os, const BaselineModel& m) {
    write_f64(os, m.mu);
    write_f64_array(os, m.b_user);
    write_f64_array(os, m.b_movie);
}

BaselineModel read_baseline_payload(std::istream& is) {
    BaselineModel m;
    m.mu = read_f64(is);
    m.b_user = read_f64_array(is);
    m.b_movie = read_f64_array(is);
    return m;
}

void check_stream(std::ostream& os, const std::filesystem::path& file) {
    if (!os) throw std::runtime_error("short write to " + file.string());
}

}  // namespace

ModelKind peek_model_kind(const std::filesystem::path& file) {
    auto is = open_in(file);
    expect_magic(is, kMagic, "model file");
    return ModelKind(read_u8(is));
}

void save_baseline_model(const BaselineModel& model,
                         const std::filesystem::path& file) {
    auto os = open_out(file);
    write_header(os, ModelKind::Baseline, 1);
    write_baseline_payload(os, model);
    check_stream(os, file);
}

BaselineModel load_baseline_model(const std::filesystem::path& file) {
    auto is = open_in(file);
    read_header(is, ModelKind::Baseline, "baseline model");
    return read_baseline_payload(is);
}

void save_knn_model(const KnnModelFile& model,
                    const std::filesystem::path& file) {
    auto os = open_out(file);
    write_header(os, ModelKind::Knn, 1);
    write_u8(os, model.config.orientation == Orientation::User ? 0 : 1);
    write_u64(os, model.config.k);
    write_u8(os, model.config.measure == SimMeasure::Cosine ? 0 : 1);
    write_f64(os, model.config.shrinkage);
    write_baseline_payload(os, model.baselines);
    check_stream(os, file);
}

KnnModelFile load_knn_model(const std::filesystem::path& file) {
    auto is = open_in(file);
    read_header(is, ModelKind::Knn, "knn model");
    KnnModelFile m;
    m.config.orientation = read_u8(is) == 0 ? Orientation::User : Orientation::Movie;
    m.config.k = read_u64(is);
    m.config.measure = read_u8(is) == 0 ? SimMeasure::Cosine : SimMeasure::PearsonBaseline;
    m.config.shrinkage = read_f64(is);
    m.baselines = read_baseline_payload(is);
    return m;
}

void save_mf_model(const MfModel& model, const std::filesystem::path& file) {
    auto os = open_out(file);
    write_header(os, ModelKind::Mf, 1);
    write_f64(os, model.mu);
    write_i32(os, model.factors);
    write_u8(os, model.implicit_feedback ? 1 : 0);
    write_f64_array(os, model.b_user);
    write_f64_array(os, model.b_movie);
    write_f64_array(os, model.p);
    write_f64_array(os, model.q);
    write_f64_array(os, model.y);
    write_f64_array(os, model.epoch_mse);
    check_stream(os, file);
}

MfModel load_mf_model(const std::filesystem::path& file) {
    auto is = open_in(file);
    read_header(is, ModelKind::Mf, "mf model");
    MfModel m;
    m.mu = read_f64(is);
    m.factors = read_i32(is);
    m.implicit_feedback = read_u8(is) != 0;
    m.b_user = read_f64_array(is);
    m.b_movie = read_f64_array(is);
    m.p = read_f64_array(is);
    m.q = read_f64_array(is);
    m.y = read_f64_array(is);
    m.epoch_mse = read_f64_array(is);
    return m;
}

void save_gbt_model(const GbtModel& model, const std::filesystem::path& file) {
    auto os = open_out(file);
    write_header(os, ModelKind::Gbt, 1);
    write_f64(os, model.base_score);
    write_f64(os, model.shrinkage);
    write_u64(os, model.feature_schema.size());
    for (const auto& name : model.feature_schema) write_string(os, name);
    write_f64_array(os, model.round_mse);
    write_u64(os, model.trees.size());
    for (const auto& tree : model.trees) {
        write_u64(os, tree.nodes.size());
        for (const auto& n : tree.nodes) {
            write_i32(os, n.feature);
            write_f64(os, n.threshold);
            write_f64(os, n.value);
            write_f64(os, n.gain);
            write_i32(os, n.left);
            write_i32(os, n.right);
        }
    }
    check_stream(os, file);
}

GbtModel load_gbt_model(const std::filesystem::path& file) {
    auto is = open_in(file);
    read_header(is, ModelKind::Gbt, "gbt model");
    GbtModel m;
    m.base_score = read_f64(is);
    m.shrinkage = read_f64(is);
    const std::uint64_t n_names = read_u64(is);
    m.feature_schema.reserve(n_names);
    for (std::uint64_t i = 0; i < n_names; ++i)
        m.feature_schema.push_back(read_string(is));
    m.round_mse = read_f64_array(is);
    const std::uint64_t n_trees = read_u64(is);
    m.trees.resize(n_trees);
    for (auto& tree : m.trees) {
        const std::uint64_t n_nodes = read_u64(is);
        tree.nodes.resize(n_nodes);
        for (auto& n : tree.nodes) {
            n.feature = read_i32(is);
            n.threshold = read_f64(is);
            n.value = read_f64(is);
            n.gain = read_f64(is);
            n.left = read_i32(is);
            n.right = read_i32(is);
        }
    }
    return m;
}

}  // namespace reco
