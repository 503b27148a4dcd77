#include "charm/chex.hpp"

#include <bit>
#include <cstring>
#include <string>

#include "charm/error.hpp"

namespace charm {

namespace {

constexpr std::uint8_t kMagic[4] = {'C', 'H', 'E', 'X'};
constexpr std::size_t kHeader = 16;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
           (std::uint32_t(p[3]) << 24);
}

}  // namespace

std::vector<std::uint8_t> encode_chex(const ChexBlob& blob) {
    const std::size_t n = std::size_t(blob.count) * blob.height * blob.width;
    if (blob.values.size() != n)
        throw DimensionMismatch("CHEX payload has " + std::to_string(blob.values.size()) +
                                " values, header says " + std::to_string(n));
    std::vector<std::uint8_t> out;
    out.reserve(kHeader + 4 * n);
    for (auto b : kMagic) out.push_back(b);
    put_u32(out, blob.count);
    put_u32(out, blob.height);
    put_u32(out, blob.width);
    for (float f : blob.values) put_u32(out, std::bit_cast<std::uint32_t>(f));
    return out;
}

ChexBlob decode_chex(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kHeader || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw ParseError("not a CHEX stream");
    ChexBlob blob;
    blob.count = get_u32(bytes.data() + 4);
    blob.height = get_u32(bytes.data() + 8);
    blob.width = get_u32(bytes.data() + 12);
    const std::size_t n = std::size_t(blob.count) * blob.height * blob.width;
    if (bytes.size() != kHeader + 4 * n)
        throw ParseError("CHEX payload length " + std::to_string(bytes.size() - kHeader) +
                         " does not match header");
    blob.values.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        blob.values[i] = std::bit_cast<float>(get_u32(bytes.data() + kHeader + 4 * i));
    return blob;
}

}  // namespace charm
