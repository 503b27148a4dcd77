#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace charm {

/// Float sidecar: "CHEX", then little-endian u32 count, height, width, then
/// count * height * width little-endian float32 values, row-major.
struct ChexBlob {
    std::uint32_t count = 0;
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::vector<float> values;

    bool operator==(const ChexBlob&) const = default;
};

std::vector<std::uint8_t> encode_chex(const ChexBlob& blob);
/// Throws ParseError on bad magic, short payload, or trailing bytes.
ChexBlob decode_chex(std::span<const std::uint8_t> bytes);

}  // namespace charm
