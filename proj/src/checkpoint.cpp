#include "metar/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <string_view>

namespace metar {

namespace {

constexpr std::string_view kMagic = "METARCKPT";

struct TensorRef {
    std::string name;
    Matrix* matrix = nullptr;
    Vector* vector = nullptr;

    Eigen::Index rows() const { return matrix ? matrix->rows() : vector->size(); }
    Eigen::Index cols() const { return matrix ? matrix->cols() : 1; }
    double* data() const { return matrix ? matrix->data() : vector->data(); }
};

class Writer {
public:
    explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary), path_(path) {
        if (!out_) throw Error("cannot write checkpoint " + path.string());
    }
    void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
    void u8(std::uint8_t v) { bytes(&v, 1); }
    void u32(std::uint32_t v) {
        unsigned char b[4];
        for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
        bytes(b, 4);
    }
    void u64(std::uint64_t v) {
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
        bytes(b, 8);
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void finish() {
        out_.flush();
        if (!out_) throw Error("write failed: " + path_.string());
    }

private:
    std::ofstream out_;
    std::filesystem::path path_;
};

class Reader {
public:
    explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary), path_(path) {
        if (!in_) throw Error("cannot open checkpoint " + path.string());
    }
    void bytes(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (!in_) throw Error("checkpoint " + path_.string() + " is truncated");
    }
    std::uint8_t u8() {
        std::uint8_t v;
        bytes(&v, 1);
        return v;
    }
    std::uint32_t u32() {
        unsigned char b[4];
        bytes(b, 4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        unsigned char b[8];
        bytes(b, 8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

private:
    std::ifstream in_;
    std::filesystem::path path_;
};

struct Scalars {
    std::uint64_t iteration = 0;
    std::uint64_t adam_step = 0;
    double best_dev_hits10 = 0.0;
    std::uint64_t fingerprint = 0;
};

void write_container(const std::filesystem::path& path, CheckpointKind kind, const std::vector<TensorRef>& tensors,
                     const Scalars& scalars, const std::vector<TensorRef>* first_moments,
                     const std::vector<TensorRef>* second_moments) {
    Writer w(path);
    w.bytes(kMagic.data(), kMagic.size());
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(kind));
    w.u32(static_cast<std::uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
        w.u32(static_cast<std::uint32_t>(t.rows()));
        w.u32(static_cast<std::uint32_t>(t.cols()));
    }
    w.u64(scalars.iteration);
    w.u64(scalars.adam_step);
    w.f64(scalars.best_dev_hits10);
    w.u64(scalars.fingerprint);
    w.u8(first_moments ? 1 : 0);
    auto dump = [&](const std::vector<TensorRef>& list) {
        for (const auto& t : list) {
            const double* p = t.data();
            for (Eigen::Index i = 0; i < t.rows() * t.cols(); ++i) w.f64(p[i]);
        }
    };
    dump(tensors);
    if (first_moments) {
        dump(*first_moments);
        dump(*second_moments);
    }
    w.finish();

    std::ofstream manifest(manifest_path(path));
    if (!manifest) throw Error("cannot write " + manifest_path(path).string());
    manifest << "format " << kMagic << ' ' << kCheckpointVersion << '\n';
    manifest << "kind " << (kind == CheckpointKind::Model ? "model" : "embeddings") << '\n';
    for (const auto& t : tensors) manifest << "tensor " << t.name << ' ' << t.rows() << ' ' << t.cols() << '\n';
    if (first_moments) manifest << "optimizer adam step " << scalars.adam_step << '\n';
    manifest << "iteration " << scalars.iteration << '\n';
}

struct Header {
    CheckpointKind kind;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> shapes;
    Scalars scalars;
    bool has_optimizer = false;
};

Header read_header(Reader& r, const std::filesystem::path& path) {
    char magic[9];
    r.bytes(magic, sizeof magic);
    if (std::string_view(magic, sizeof magic) != kMagic) throw Error(path.string() + " is not a checkpoint file");
    const auto version = r.u32();
    if (version != kCheckpointVersion)
        throw Error("unsupported checkpoint format version " + std::to_string(version));
    Header h;
    const auto kind = r.u32();
    if (kind > 1) throw Error("unknown checkpoint kind " + std::to_string(kind));
    h.kind = static_cast<CheckpointKind>(kind);
    const auto n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i) {
        auto rows = r.u32();
        auto cols = r.u32();
        h.shapes.emplace_back(rows, cols);
    }
    h.scalars.iteration = r.u64();
    h.scalars.adam_step = r.u64();
    h.scalars.best_dev_hits10 = r.f64();
    h.scalars.fingerprint = r.u64();
    h.has_optimizer = r.u8() != 0;
    return h;
}

void read_into(Reader& r, Matrix& m, std::pair<std::uint32_t, std::uint32_t> shape) {
    m.resize(shape.first, shape.second);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = r.f64();
}

void read_into(Reader& r, Vector& v, std::pair<std::uint32_t, std::uint32_t> shape) {
    if (shape.second != 1) throw Error("checkpoint bias tensor must have one column");
    v.resize(shape.first);
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = r.f64();
}

std::vector<TensorRef> model_tensors(Matrix& embeddings, std::vector<DenseLayer>& layers) {
    std::vector<TensorRef> refs{{"entity_embeddings", &embeddings, nullptr}};
    for (std::size_t l = 0; l < layers.size(); ++l) {
        refs.push_back({"meta.W" + std::to_string(l + 1), &layers[l].weight, nullptr});
        refs.push_back({"meta.b" + std::to_string(l + 1), nullptr, &layers[l].bias});
    }
    return refs;
}

}  // namespace

std::filesystem::path manifest_path(const std::filesystem::path& path) {
    auto p = path;
    p += ".manifest";
    return p;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
    // TensorRef needs mutable pointers; the data is only read here.
    auto& ck = const_cast<Checkpoint&>(checkpoint);
    auto tensors = model_tensors(ck.params.embeddings, ck.params.meta.layers);
    Scalars scalars{ck.iteration, ck.adam.step, ck.best_dev_hits10, ck.fingerprint};
    const bool has_optimizer = ck.adam.meta_m.size() == ck.params.meta.layers.size() &&
                               ck.adam.embedding_m.rows() == ck.params.embeddings.rows();
    if (has_optimizer) {
        auto m = model_tensors(ck.adam.embedding_m, ck.adam.meta_m);
        auto v = model_tensors(ck.adam.embedding_v, ck.adam.meta_v);
        write_container(path, CheckpointKind::Model, tensors, scalars, &m, &v);
    } else {
        write_container(path, CheckpointKind::Model, tensors, scalars, nullptr, nullptr);
    }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    if (!std::filesystem::is_regular_file(path)) throw Error("checkpoint not found: " + path.string());
    Reader r(path);
    auto header = read_header(r, path);
    if (header.kind != CheckpointKind::Model)
        throw Error(path.string() + " holds pretrained embeddings, not a model checkpoint");
    if (header.shapes.size() < 3 || header.shapes.size() % 2 == 0)
        throw Error("checkpoint has an invalid tensor count");

    Checkpoint ck;
    ck.iteration = header.scalars.iteration;
    ck.best_dev_hits10 = header.scalars.best_dev_hits10;
    ck.fingerprint = header.scalars.fingerprint;
    const std::size_t n_layers = (header.shapes.size() - 1) / 2;
    ck.params.meta.layers.resize(n_layers);
    auto read_model = [&](Matrix& embeddings, std::vector<DenseLayer>& layers) {
        layers.resize(n_layers);
        read_into(r, embeddings, header.shapes[0]);
        for (std::size_t l = 0; l < n_layers; ++l) {
            read_into(r, layers[l].weight, header.shapes[1 + 2 * l]);
            read_into(r, layers[l].bias, header.shapes[2 + 2 * l]);
        }
    };
    read_model(ck.params.embeddings, ck.params.meta.layers);
    for (std::size_t l = 0; l + 1 < n_layers; ++l)
        if (ck.params.meta.layers[l].weight.rows() != ck.params.meta.layers[l + 1].weight.cols())
            throw Error("checkpoint meta-learner layers do not chain");
    if (header.has_optimizer) {
        read_model(ck.adam.embedding_m, ck.adam.meta_m);
        read_model(ck.adam.embedding_v, ck.adam.meta_v);
        ck.adam.step = header.scalars.adam_step;
    } else {
        ck.adam = AdamState::zeros_like(ck.params);
    }
    if (!r.at_end()) throw Error("checkpoint " + path.string() + " has trailing data");
    return ck;
}

void save_embeddings(const TransEModel& model, const std::filesystem::path& path) {
    auto& m = const_cast<TransEModel&>(model);
    std::vector<TensorRef> tensors{{"entity_embeddings", &m.entities, nullptr},
                                   {"relation_embeddings", &m.relations, nullptr}};
    write_container(path, CheckpointKind::Embeddings, tensors, Scalars{}, nullptr, nullptr);
}

TransEModel load_embeddings(const std::filesystem::path& path) {
    if (!std::filesystem::is_regular_file(path)) throw Error("embedding file not found: " + path.string());
    Reader r(path);
    auto header = read_header(r, path);
    if (header.kind != CheckpointKind::Embeddings || header.shapes.size() != 2)
        throw Error(path.string() + " is not a pretrained embedding file");
    TransEModel model;
    read_into(r, model.entities, header.shapes[0]);
    read_into(r, model.relations, header.shapes[1]);
    if (!r.at_end()) throw Error("embedding file " + path.string() + " has trailing data");
    return model;
}

}  // namespace metar
