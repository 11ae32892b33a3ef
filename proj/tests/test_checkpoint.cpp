#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "snn/checkpoint.hpp"
#include "snn/layers/encoder.hpp"

using namespace snn;
namespace fs = std::filesystem;

namespace {

Container sample() {
    Container c;
    c.put("w", Tensor({2, 3}, {1.0, -2.5, 3.25, 0.0, -0.0, 1e-300}));
    c.put("s", Tensor::scalar(std::numeric_limits<double>::infinity()));
    c.put_ints("ids", {4}, {0, -1, 7, std::numeric_limits<std::int64_t>::max()});
    return c;
}

}  // namespace

TEST(Container, RoundTripIsBitExact) {
    const auto bytes = sample().serialize();
    const Container back = Container::deserialize(bytes);
    EXPECT_EQ(back.serialize(), bytes);
    EXPECT_EQ(back.tensor("w").shape(), (Shape{2, 3}));
    EXPECT_TRUE(std::signbit(back.tensor("w").values()[4]));
    EXPECT_EQ(back.tensor("w").values()[5], 1e-300);
    EXPECT_TRUE(std::isinf(back.tensor("s").item()));
    EXPECT_EQ(back.ints("ids")[3], std::numeric_limits<std::int64_t>::max());
}

TEST(Container, LayoutIsLittleEndian) {
    Container c;
    c.put_ints("a", {1}, {1});
    const auto b = c.serialize();
    // magic(8) version(4) count(4) namelen(4) name(1) tag(1) rank(4) dim(8) value(8)
    ASSERT_EQ(b.size(), 42u);
    EXPECT_EQ(std::string(b.begin(), b.begin() + 7), "SNNTENS");
    EXPECT_EQ(b[8], 1);  // version
    EXPECT_EQ(b[12], 1);  // record count
    EXPECT_EQ(b[21], 2);  // int64 tag
    EXPECT_EQ(b[34], 1);
}

TEST(Container, RejectsBadMagicAndVersion) {
    auto bytes = sample().serialize();
    auto bad = bytes;
    bad[0] = 'X';
    EXPECT_THROW(Container::deserialize(bad), FormatError);
    bad = bytes;
    bad[8] = 9;
    try {
        Container::deserialize(bad);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("version 9"), std::string::npos);
    }
    EXPECT_THROW(Container::deserialize({}), FormatError);
}

TEST(Container, EveryTruncationIsDetected) {
    const auto bytes = sample().serialize();
    for (std::size_t n = 0; n < bytes.size(); ++n) {
        const std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(n));
        EXPECT_THROW(Container::deserialize(cut), FormatError) << "length " << n;
    }
}

TEST(Container, HugeDimensionIsRejectedWithoutAllocating) {
    Container c;
    c.put("x", Tensor({1}, {1.0}));
    auto bytes = c.serialize();
    // dim field sits after magic, version, count, namelen, name, tag, rank
    const std::size_t dim_at = 8 + 4 + 4 + 4 + 1 + 1 + 4;
    for (std::size_t i = 0; i < 8; ++i) bytes[dim_at + i] = 0xff;
    EXPECT_THROW(Container::deserialize(bytes), FormatError);
}

TEST(Container, TypedAccessChecksTheRecord) {
    const Container c = sample();
    EXPECT_THROW(c.tensor("ids"), FormatError);
    EXPECT_THROW(c.ints("w"), FormatError);
    EXPECT_THROW(c.tensor("missing"), FormatError);
    EXPECT_THROW(Container().put_ints("x", {3}, {1, 2}), ShapeError);
}

TEST(Container, FileRoundTrip) {
    const fs::path p = fs::temp_directory_path() / "snn_test_checkpoint.bin";
    sample().save(p.string());
    EXPECT_EQ(Container::load(p.string()).serialize(), sample().serialize());
    fs::remove(p);
    EXPECT_THROW(Container::load(p.string()), std::runtime_error);
}

TEST(EncoderCheckpoint, SaveLoadRestoresEveryValue) {
    EncoderConfig cfg;
    cfg.input_dim = 6;
    cfg.conv.channels = 5;
    cfg.layers = {{LayerKind::LIF, 4, true}, {LayerKind::RNN, 3, false}, {LayerKind::LSTM, 3, true}};
    cfg.vocab = 3;
    Rng a(1), b(2);
    Encoder src = Encoder::init(cfg, a);
    // move running statistics away from their initial values
    encoder_forward(src, Tensor({2, 7, 6}, std::vector<double>(84, 0.5)));
    Encoder dst = Encoder::init(cfg, b);
    ASSERT_NE(src.to_container().serialize(), dst.to_container().serialize());
    dst.load(Container::deserialize(src.to_container().serialize()));
    EXPECT_EQ(src.to_container().serialize(), dst.to_container().serialize());
    EXPECT_TRUE(src.to_container().contains("layers.0.fwd.bn.running_var"));
}

TEST(EncoderCheckpoint, ShapeMismatchIsAFormatError) {
    EncoderConfig cfg;
    cfg.input_dim = 6;
    cfg.conv.channels = 5;
    cfg.layers = {{LayerKind::LSTM, 4, false}};
    cfg.vocab = 3;
    Rng rng(1);
    const Container c = Encoder::init(cfg, rng).to_container();
    cfg.layers[0].hidden = 5;
    Encoder other = Encoder::init(cfg, rng);
    EXPECT_THROW(other.load(c), FormatError);
}
