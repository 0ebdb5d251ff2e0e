#include "aikd/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

namespace aikd {

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'A', 'I', 'K', 'D'};

class Writer {
  public:
    void u8(std::uint8_t v) { raw(&v, 1); }
    void u32(std::uint32_t v) { raw(&v, 4); }
    void u64(std::uint64_t v) { raw(&v, 8); }
    void i32(std::int32_t v) { raw(&v, 4); }
    void f64(double v) { raw(&v, 8); }

    void array(const double* data, std::size_t n) {
        u64(n);
        raw(data, n * sizeof(double));
    }

    void raw(const void* p, std::size_t n) {
        buf_.append(static_cast<const char*>(p), n);
    }

    const std::string& bytes() const { return buf_; }

  private:
    std::string buf_;
};

class Reader {
  public:
    Reader(const std::string& buf, std::string file) : buf_(buf), file_(std::move(file)) {}

    std::uint8_t u8() { return get<std::uint8_t>(); }
    std::uint32_t u32() { return get<std::uint32_t>(); }
    std::uint64_t u64() { return get<std::uint64_t>(); }
    std::int32_t i32() { return get<std::int32_t>(); }
    double f64() { return get<double>(); }

    void array(double* out, std::size_t expected) {
        const std::uint64_t n = u64();
        if (n != expected)
            throw CheckpointError(file_ + ": array length " + std::to_string(n) +
                                  " does not match architecture (" + std::to_string(expected) + ")");
        need(n * sizeof(double));
        std::memcpy(out, buf_.data() + pos_, n * sizeof(double));
        pos_ += n * sizeof(double);
    }

    void expect_eof() const {
        if (pos_ != buf_.size())
            throw CheckpointError(file_ + ": trailing bytes after checkpoint payload");
    }

  private:
    template <typename T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, buf_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    void need(std::size_t n) const {
        if (pos_ + n > buf_.size())
            throw CheckpointError(file_ + ": truncated checkpoint");
    }

    const std::string& buf_;
    std::string file_;
    std::size_t pos_ = 0;
};

void write_arch(Writer& w, const ArchitectureSpec& a) {
    w.i32(a.input_width);
    w.i32(a.input_height);
    w.i32(a.input_channels);
    w.u32(static_cast<std::uint32_t>(a.backbone_widths.size()));
    for (int v : a.backbone_widths) w.i32(v);
    w.u32(static_cast<std::uint32_t>(a.head_widths.size()));
    for (int v : a.head_widths) w.i32(v);
}

ArchitectureSpec read_arch(Reader& r) {
    ArchitectureSpec a;
    a.input_width = r.i32();
    a.input_height = r.i32();
    a.input_channels = r.i32();
    a.backbone_widths.resize(r.u32());
    for (int& v : a.backbone_widths) v = r.i32();
    a.head_widths.resize(r.u32());
    for (int& v : a.head_widths) v = r.i32();
    a.validate();
    return a;
}

void write_layers(Writer& w, const std::vector<Eigen::MatrixXd>& weights,
                  const std::vector<Eigen::VectorXd>& biases) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        // Row-major on disk regardless of Eigen's storage order.
        const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> wm =
            weights[l];
        w.array(wm.data(), static_cast<std::size_t>(wm.size()));
        w.array(biases[l].data(), static_cast<std::size_t>(biases[l].size()));
    }
}

void read_layers(Reader& r, const ArchitectureSpec& arch, std::vector<Eigen::MatrixXd>& weights,
                 std::vector<Eigen::VectorXd>& biases) {
    weights.clear();
    biases.clear();
    int in_dim = arch.input_size();
    auto read_layer = [&](int width) {
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> wm(width, in_dim);
        r.array(wm.data(), static_cast<std::size_t>(wm.size()));
        Eigen::VectorXd b(width);
        r.array(b.data(), static_cast<std::size_t>(b.size()));
        weights.emplace_back(wm);
        biases.push_back(std::move(b));
        in_dim = width;
    };
    for (int w : arch.backbone_widths) read_layer(w);
    for (int w : arch.head_widths) read_layer(w);
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    if (ckpt.model.weights.size() != ckpt.model.arch.layer_count())
        throw ContractError("save_checkpoint: model does not match its architecture");
    for (const auto& w : ckpt.model.weights)
        if (!w.allFinite()) throw NumericError("save_checkpoint: non-finite parameters");
    for (const auto& b : ckpt.model.biases)
        if (!b.allFinite()) throw NumericError("save_checkpoint: non-finite parameters");

    Writer w;
    w.raw(kMagic, 4);
    w.u32(ckpt.format_version);
    w.u64(ckpt.seed);
    write_arch(w, ckpt.model.arch);
    w.u8(ckpt.model.frozen ? 1 : 0);
    w.f64(ckpt.label_min);
    w.f64(ckpt.label_max);

    write_layers(w, ckpt.model.weights, ckpt.model.biases);

    w.u32(static_cast<std::uint32_t>(ckpt.optimizer_state.size()));
    for (const auto& arr : ckpt.optimizer_state)
        w.array(arr.data(), static_cast<std::size_t>(arr.size()));

    w.u64(ckpt.swa.count);
    if (ckpt.swa.count > 0) {
        if (!(ckpt.swa.arch == ckpt.model.arch))
            throw ContractError("save_checkpoint: SWA accumulator architecture mismatch");
        write_layers(w, ckpt.swa.avg_weights, ckpt.swa.avg_biases);
    }

    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write checkpoint: " + path.string());
        out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
        if (!out) throw IoError("short write: " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path.string());
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    Reader r(buf, path.string());
    char magic[4];
    const std::uint32_t m = r.u32();
    std::memcpy(magic, &m, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw CheckpointError(path.string() + ": not a checkpoint file (bad magic)");

    Checkpoint ckpt;
    ckpt.format_version = r.u32();
    if (ckpt.format_version != kCheckpointVersion)
        throw CheckpointError(path.string() + ": unsupported checkpoint version " +
                              std::to_string(ckpt.format_version));
    ckpt.seed = r.u64();
    ckpt.model.arch = read_arch(r);
    ckpt.model.frozen = r.u8() != 0;
    ckpt.label_min = r.f64();
    ckpt.label_max = r.f64();

    read_layers(r, ckpt.model.arch, ckpt.model.weights, ckpt.model.biases);

    // Optimizer arrays are self-describing (plain SGD writes none).
    const std::uint32_t n_opt = r.u32();
    for (std::uint32_t i = 0; i < n_opt; ++i) {
        const std::uint64_t n = r.u64();
        Eigen::VectorXd arr(static_cast<Eigen::Index>(n));
        for (std::uint64_t k = 0; k < n; ++k) arr(static_cast<Eigen::Index>(k)) = r.f64();
        ckpt.optimizer_state.push_back(std::move(arr));
    }

    ckpt.swa.count = r.u64();
    if (ckpt.swa.count > 0) {
        ckpt.swa.arch = ckpt.model.arch;
        read_layers(r, ckpt.model.arch, ckpt.swa.avg_weights, ckpt.swa.avg_biases);
    }

    r.expect_eof();
    return ckpt;
}

}  // namespace aikd
