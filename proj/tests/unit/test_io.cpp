#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <random>
#include <string_view>

#include "charm/chex.hpp"
#include "charm/error.hpp"
#include "charm/image.hpp"

using namespace charm;

namespace {

Bytes bytes_of(std::string_view s) { return Bytes(s.begin(), s.end()); }

}  // namespace

TEST_CASE("png round trip") {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> px(0, 255), dim(1, 40);
    for (int i = 0; i < 20; ++i) {
        RgbImage img(dim(rng), dim(rng));
        for (auto& b : img.data) b = static_cast<std::uint8_t>(px(rng));
        const auto png = encode_png(img);
        REQUIRE(png.size() > 8);
        CHECK(std::memcmp(png.data(), "\x89PNG", 4) == 0);
        CHECK(decode_png(png) == img);
        // encoding is deterministic
        CHECK(encode_png(img) == png);
    }
}

TEST_CASE("png errors") {
    CHECK_THROWS_AS(encode_png(RgbImage{}), EmptyImage);
    CHECK_THROWS_AS(decode_png(bytes_of("not a png at all")), ParseError);
    auto png = encode_png(RgbImage(4, 4, 9));
    png.resize(png.size() / 2);
    CHECK_THROWS_AS(decode_png(png), ParseError);
}

TEST_CASE("mask png round trip and luma threshold") {
    Mask m(7, 5);
    m.set(0, 0, true);
    m.set(6, 4, true);
    m.set(3, 2, true);
    CHECK(decode_mask_png(encode_mask_png(m)) == m);

    RgbImage img(2, 1);
    img.data = {128, 128, 128, 127, 127, 127};
    const auto dm = decode_mask_png(encode_png(img));
    CHECK(dm.at(0, 0));
    CHECK_FALSE(dm.at(1, 0));
}

TEST_CASE("chex round trip") {
    ChexBlob blob{2, 3, 2, {}};
    for (int i = 0; i < 12; ++i) blob.values.push_back(0.25f * i);
    const auto bytes = encode_chex(blob);
    CHECK(bytes.size() == 16 + 12 * 4);
    CHECK(std::memcmp(bytes.data(), "CHEX", 4) == 0);
    CHECK(bytes[4] == 2);
    CHECK(bytes[8] == 3);
    CHECK(bytes[12] == 2);
    CHECK(decode_chex(bytes) == blob);

    const auto empty = ChexBlob{0, 4, 4, {}};
    CHECK(decode_chex(encode_chex(empty)) == empty);
}

TEST_CASE("chex errors") {
    ChexBlob blob{1, 1, 2, {1.0f, 2.0f}};
    auto bytes = encode_chex(blob);
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(decode_chex(bad_magic), ParseError);
    auto short_payload = bytes;
    short_payload.pop_back();
    CHECK_THROWS_AS(decode_chex(short_payload), ParseError);
    auto trailing = bytes;
    trailing.push_back(0);
    CHECK_THROWS_AS(decode_chex(trailing), ParseError);
    CHECK_THROWS_AS(decode_chex(bytes_of("CHE")), ParseError);
    CHECK_THROWS_AS(encode_chex(ChexBlob{2, 1, 2, {1.0f}}), DimensionMismatch);
}

TEST_CASE("crc32 check values") {
    CHECK(crc32(bytes_of("")) == 0u);
    CHECK(crc32(bytes_of("123456789")) == 0xCBF43926u);
    CHECK(crc32(bytes_of("The quick brown fox jumps over the lazy dog")) == 0x414FA339u);
}

TEST_CASE("file helpers") {
    const auto p = std::filesystem::temp_directory_path() / "charm-test-io.bin";
    const auto data = bytes_of("hello\0world");
    write_file(p, data);
    CHECK(read_file(p) == data);
    std::filesystem::remove(p);
    CHECK_THROWS_AS(read_file(p), IoError);
}
