#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace charm {

/// Interleaved 8-bit RGB, row-major.
struct RgbImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> data;

    RgbImage() = default;
    RgbImage(std::size_t w, std::size_t h, std::uint8_t fill = 0)
        : width(w), height(h), data(w * h * 3, fill) {}

    bool empty() const noexcept { return width == 0 || height == 0; }
    std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) {
        return data[(y * width + x) * 3 + c];
    }
    std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const {
        return data[(y * width + x) * 3 + c];
    }
    bool operator==(const RgbImage&) const = default;
};

/// Boolean grid; true marks pixels to regenerate.
struct Mask {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> bits;  // 0 or 1 per pixel

    Mask() = default;
    Mask(std::size_t w, std::size_t h, bool fill = false) : width(w), height(h), bits(w * h, fill) {}

    bool at(std::size_t x, std::size_t y) const { return bits[y * width + x] != 0; }
    void set(std::size_t x, std::size_t y, bool v) { bits[y * width + x] = v ? 1 : 0; }
    std::size_t popcount() const;
    bool operator==(const Mask&) const = default;
};

using Bytes = std::vector<std::uint8_t>;

/// 8-bit RGB PNG, no ancillary chunks, fixed compression settings so equal
/// pixels always encode to equal bytes.
Bytes encode_png(const RgbImage& image);
/// Accepts gray/gray+alpha/RGB/RGBA at 8 or 16 bits; alpha is dropped.
RgbImage decode_png(std::span<const std::uint8_t> bytes);

/// 1-bit grayscale PNG; white = masked.
Bytes encode_mask_png(const Mask& mask);
/// Any PNG; a pixel is masked when its luma is >= 128.
Mask decode_mask_png(std::span<const std::uint8_t> bytes);

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace charm
