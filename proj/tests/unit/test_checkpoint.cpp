#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>

#include "paflab/checkpoint.hpp"
#include "paflab/errors.hpp"
#include "support.hpp"

namespace paflab {
namespace {

namespace fs = std::filesystem;

class CheckpointTest : public ::testing::Test {
  protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("paflab_ckpt_" + std::to_string(::getpid()));
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    static std::vector<std::uint8_t> read_bytes(const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return {std::istreambuf_iterator<char>(in), {}};
    }
    static void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
        std::ofstream out(p, std::ios::binary);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }

    static Model sample_model(DesignVariant v = DesignVariant::saf) {
        ModelConfig c;
        c.depth = 2;
        c.dim = 8;
        c.heads = 2;
        c.ffn_dim = 12;
        c.vocab = 5;
        c.max_seq = 7;
        c.variant = v;
        c.activation = Activation::relu;
        c.init_std = 0.125;
        c.seed = 0xDEADBEEF;
        Model m = Model::initialize(c);
        Rng rng(4);
        testing::randomize(m, rng);
        return m;
    }

    fs::path dir_;
};

TEST_F(CheckpointTest, SaveLoadSaveIsBitwiseIdentical) {
    for (DesignVariant v :
         {DesignVariant::saf, DesignVariant::paf, DesignVariant::no_ffn, DesignVariant::no_skip_no_ffn}) {
        const Model m = sample_model(v);
        save_checkpoint(m, dir_ / "a.pafl");
        const Model loaded = load_checkpoint(dir_ / "a.pafl");
        save_checkpoint(loaded, dir_ / "b.pafl");
        EXPECT_EQ(read_bytes(dir_ / "a.pafl"), read_bytes(dir_ / "b.pafl"));
        EXPECT_EQ(loaded.config, m.config);
        const auto a = parameter_list(m);
        const auto b = parameter_list(loaded);
        for (std::size_t i = 0; i < a.size(); ++i) {
            EXPECT_TRUE(bitwise_equal(*a[i], *b[i]));
        }
    }
}

TEST_F(CheckpointTest, HeaderLayout) {
    const std::vector<std::uint8_t> bytes = serialize_model(sample_model());
    ASSERT_GE(bytes.size(), 8u);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "PAFL");
    EXPECT_EQ(bytes[4], 1);
    EXPECT_EQ(bytes[5] | bytes[6] | bytes[7], 0);
    // depth as little-endian u64 right after the version.
    EXPECT_EQ(bytes[8], 2);
    const Model m = sample_model();
    std::size_t payload = 0;
    for (const Tensor* t : parameter_list(m)) {
        payload += 16 + 8 * t->size();
    }
    EXPECT_EQ(bytes.size(), 8 + 10 * 8 + payload);
}

TEST_F(CheckpointTest, BadMagicRejected) {
    std::vector<std::uint8_t> bytes = serialize_model(sample_model());
    bytes[0] = 'X';
    EXPECT_THROW(deserialize_model(bytes), CorruptCheckpointError);
}

TEST_F(CheckpointTest, UnsupportedVersionRejected) {
    std::vector<std::uint8_t> bytes = serialize_model(sample_model());
    bytes[4] = 2;
    EXPECT_THROW(deserialize_model(bytes), CorruptCheckpointError);
}

TEST_F(CheckpointTest, TruncationRejectedAtEveryLength) {
    const std::vector<std::uint8_t> bytes = serialize_model(sample_model());
    for (std::size_t n : {std::size_t{0}, std::size_t{3}, std::size_t{8}, std::size_t{40}, bytes.size() / 2,
                          bytes.size() - 1}) {
        const std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(n));
        EXPECT_THROW(deserialize_model(cut), CorruptCheckpointError) << n;
    }
}

TEST_F(CheckpointTest, TrailingBytesRejected) {
    std::vector<std::uint8_t> bytes = serialize_model(sample_model());
    bytes.push_back(0);
    EXPECT_THROW(deserialize_model(bytes), CorruptCheckpointError);
}

TEST_F(CheckpointTest, HugeShapeRejectedWithoutAllocating) {
    std::vector<std::uint8_t> bytes = serialize_model(sample_model());
    // First tensor's row count follows the 8-byte preamble and 80-byte config.
    for (std::size_t i = 0; i < 8; ++i) {
        bytes[88 + i] = 0xFF;
    }
    EXPECT_THROW(deserialize_model(bytes), CorruptCheckpointError);
}

TEST_F(CheckpointTest, UnknownVariantCodeRejected) {
    std::vector<std::uint8_t> bytes = serialize_model(sample_model());
    bytes[8 + 6 * 8] = 9;
    EXPECT_THROW(deserialize_model(bytes), CorruptCheckpointError);
}

TEST_F(CheckpointTest, MissingFileIsIoError) {
    EXPECT_THROW(load_checkpoint(dir_ / "missing.pafl"), IoError);
    EXPECT_THROW(save_checkpoint(sample_model(), dir_ / "no" / "such" / "dir.pafl"), IoError);
}

TEST_F(CheckpointTest, CorruptFileOnDisk) {
    write_bytes(dir_ / "bad.pafl", {'N', 'O', 'P', 'E', 1, 0, 0, 0});
    EXPECT_THROW(load_checkpoint(dir_ / "bad.pafl"), CorruptCheckpointError);
}

}  // namespace
}  // namespace paflab
