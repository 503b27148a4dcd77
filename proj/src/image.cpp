#include "charm/image.hpp"

#include <png.h>
#include <zlib.h>

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>

#include "charm/error.hpp"

namespace charm {

std::size_t Mask::popcount() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

namespace {

struct WriteContext {
    Bytes* out;
};

void write_callback(png_structp png, png_bytep data, png_size_t length) {
    auto* ctx = static_cast<WriteContext*>(png_get_io_ptr(png));
    ctx->out->insert(ctx->out->end(), data, data + length);
}

void flush_callback(png_structp) {}

struct ReadContext {
    std::span<const std::uint8_t> in;
    std::size_t offset = 0;
};

void read_callback(png_structp png, png_bytep data, png_size_t length) {
    auto* ctx = static_cast<ReadContext*>(png_get_io_ptr(png));
    if (ctx->offset + length > ctx->in.size()) png_error(png, "truncated PNG");
    std::memcpy(data, ctx->in.data() + ctx->offset, length);
    ctx->offset += length;
}

struct ErrorSink {
    char message[256] = {};
};

[[noreturn]] void error_callback(png_structp png, png_const_charp message) {
    if (auto* sink = static_cast<ErrorSink*>(png_get_error_ptr(png)))
        std::snprintf(sink->message, sizeof sink->message, "%s", message);
    png_longjmp(png, 1);
}

void warning_callback(png_structp, png_const_charp) {}

// Rows are handed over as (width, height, color_type, bit_depth, packed rows).
Bytes write_png(std::size_t width, std::size_t height, int color_type, int bit_depth,
                const std::vector<std::vector<png_byte>>& rows) {
    Bytes out;
    ErrorSink sink;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &sink, error_callback,
                                              warning_callback);
    if (!png) throw IoError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    WriteContext ctx{&out};
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError(std::string("PNG: ") + sink.message);
    }

    png_set_write_fn(png, &ctx, write_callback, flush_callback);
    png_set_compression_level(png, 6);
    png_set_filter(png, PNG_FILTER_TYPE_BASE, PNG_FILTER_NONE);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
                 bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (const auto& row : rows) png_write_row(png, row.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

struct Decoded {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<png_byte> rgb;  // 8-bit RGB after transforms
};

Decoded read_png_rgb(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0)
        throw ParseError("not a PNG stream");
    ErrorSink sink;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &sink, error_callback,
                                             warning_callback);
    if (!png) throw IoError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    ReadContext ctx{bytes, 0};
    Decoded d;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ParseError(std::string("PNG: ") + sink.message);
    }
    png_set_read_fn(png, &ctx, read_callback);
    png_read_info(png, info);

    const auto color = png_get_color_type(png, info);
    const auto depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    d.width = png_get_image_width(png, info);
    d.height = png_get_image_height(png, info);
    const auto rowbytes = png_get_rowbytes(png, info);
    if (rowbytes != d.width * 3) png_error(png, "unexpected layout after conversion");
    d.rgb.resize(rowbytes * d.height);
    rows.resize(d.height);
    for (std::size_t y = 0; y < d.height; ++y) rows[y] = d.rgb.data() + y * rowbytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return d;
}

}  // namespace

Bytes encode_png(const RgbImage& image) {
    if (image.empty()) throw EmptyImage("cannot encode an empty image");
    std::vector<std::vector<png_byte>> rows(image.height);
    for (std::size_t y = 0; y < image.height; ++y)
        rows[y].assign(image.data.begin() + static_cast<std::ptrdiff_t>(y * image.width * 3),
                       image.data.begin() + static_cast<std::ptrdiff_t>((y + 1) * image.width * 3));
    return write_png(image.width, image.height, PNG_COLOR_TYPE_RGB, 8, rows);
}

RgbImage decode_png(std::span<const std::uint8_t> bytes) {
    auto d = read_png_rgb(bytes);
    RgbImage img;
    img.width = d.width;
    img.height = d.height;
    img.data.assign(d.rgb.begin(), d.rgb.end());
    return img;
}

Bytes encode_mask_png(const Mask& mask) {
    if (mask.width == 0 || mask.height == 0) throw EmptyImage("cannot encode an empty mask");
    std::vector<std::vector<png_byte>> rows(mask.height,
                                            std::vector<png_byte>((mask.width + 7) / 8, 0));
    for (std::size_t y = 0; y < mask.height; ++y)
        for (std::size_t x = 0; x < mask.width; ++x)
            if (mask.at(x, y)) rows[y][x / 8] |= static_cast<png_byte>(0x80u >> (x % 8));
    return write_png(mask.width, mask.height, PNG_COLOR_TYPE_GRAY, 1, rows);
}

Mask decode_mask_png(std::span<const std::uint8_t> bytes) {
    auto d = read_png_rgb(bytes);
    Mask m(d.width, d.height);
    for (std::size_t i = 0; i < d.width * d.height; ++i) {
        const unsigned luma = (299u * d.rgb[3 * i] + 587u * d.rgb[3 * i + 1] +
                               114u * d.rgb[3 * i + 2]) / 1000u;
        m.bits[i] = luma >= 128 ? 1 : 0;
    }
    return m;
}

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
    uLong c = ::crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; chunk to stay within range.
    std::size_t off = 0;
    while (off < bytes.size()) {
        const auto n = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
        c = ::crc32(c, bytes.data() + off, n);
        off += n;
    }
    return static_cast<std::uint32_t>(c);
}

Bytes read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + path.string());
}

}  // namespace charm
