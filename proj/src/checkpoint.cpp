#include "paflab/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "paflab/errors.hpp"

namespace paflab {

namespace {

class Writer {
  public:
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) {
            bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }

    std::vector<std::uint8_t> take() { return std::move(bytes_); }

  private:
    std::vector<std::uint8_t> bytes_;
};

class Reader {
  public:
    explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
        }
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
        }
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    bool at_end() const { return pos_ == bytes_.size(); }
    std::size_t remaining() const { return bytes_.size() - pos_; }
    std::size_t position() const { return pos_; }

  private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) {
            throw CorruptCheckpointError("checkpoint truncated at byte " + std::to_string(pos_));
        }
    }

    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

std::uint64_t variant_code(DesignVariant v) { return static_cast<std::uint64_t>(v); }

DesignVariant variant_from(std::uint64_t code) {
    if (code > 3) {
        throw CorruptCheckpointError("checkpoint: unknown variant code " + std::to_string(code));
    }
    return static_cast<DesignVariant>(code);
}

Activation activation_from(std::uint64_t code) {
    if (code > 1) {
        throw CorruptCheckpointError("checkpoint: unknown activation code " + std::to_string(code));
    }
    return code == 0 ? Activation::gelu : Activation::relu;
}

}  // namespace

std::vector<std::uint8_t> serialize_model(const Model& m) {
    m.validate();
    Writer w;
    w.raw(kCheckpointMagic, 4);
    w.u32(kCheckpointVersion);
    const ModelConfig& c = m.config;
    w.u64(c.depth);
    w.u64(c.dim);
    w.u64(c.heads);
    w.u64(c.ffn_dim);
    w.u64(c.vocab);
    w.u64(c.max_seq);
    w.u64(variant_code(c.variant));
    w.u64(c.activation == Activation::gelu ? 0 : 1);
    w.f64(c.init_std);
    w.u64(c.seed);
    for_each_parameter(m, [&](const std::string&, const Tensor& t) {
        w.u64(t.rows());
        w.u64(t.cols());
        for (double v : t.values()) {
            w.f64(v);
        }
    });
    return w.take();
}

Model deserialize_model(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
        throw CorruptCheckpointError("checkpoint: bad magic (expected \"PAFL\")");
    }
    Reader r(bytes);
    r.u32();  // magic, already checked
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw CorruptCheckpointError("checkpoint: unsupported format version " + std::to_string(version));
    }
    ModelConfig c;
    c.depth = r.u64();
    c.dim = r.u64();
    c.heads = r.u64();
    c.ffn_dim = r.u64();
    c.vocab = r.u64();
    c.max_seq = r.u64();
    c.variant = variant_from(r.u64());
    c.activation = activation_from(r.u64());
    c.init_std = r.f64();
    c.seed = r.u64();
    try {
        c.validate();
    } catch (const ConfigError& e) {
        throw CorruptCheckpointError(std::string("checkpoint: invalid header: ") + e.what());
    }

    // Reject headers whose payload cannot fit before allocating anything.
    using Wide = unsigned __int128;
    const Wide d = c.dim;
    const Wide f = c.ffn_dim;
    const Wide per_layer = 4 * d * d + 4 * d + 2 * d * f + f + d + 4 * d;
    const Wide values = Wide(c.vocab) * d + Wide(c.max_seq) * d + Wide(c.depth) * per_layer + d * c.vocab + c.vocab;
    const Wide tensors = 4 + 16 * Wide(c.depth);
    if (values * 8 + tensors * 16 != r.remaining()) {
        throw CorruptCheckpointError("checkpoint: payload size does not match header (truncated or trailing data)");
    }

    // Build a correctly shaped skeleton, then overwrite every tensor.
    ModelConfig shape_only = c;
    shape_only.init_std = 0.0;
    Model m = Model::initialize(shape_only);
    m.config = c;
    for_each_parameter(m, [&](const std::string& name, Tensor& t) {
        const std::uint64_t rows = r.u64();
        const std::uint64_t cols = r.u64();
        if (rows != t.rows() || cols != t.cols()) {
            throw CorruptCheckpointError("checkpoint: tensor " + name + " is " + std::to_string(rows) + "x" +
                                         std::to_string(cols) + ", expected " + t.shape());
        }
        for (double& v : t.values()) {
            v = r.f64();
        }
    });
    if (!r.at_end()) {
        throw CorruptCheckpointError("checkpoint: " + std::to_string(r.remaining()) + " trailing bytes");
    }
    return m;
}

void save_checkpoint(const Model& m, const std::filesystem::path& path) {
    const auto bytes = serialize_model(m);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

Model load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open checkpoint " + path.string());
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_model(bytes);
}

}  // namespace paflab
