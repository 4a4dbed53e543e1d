// RawImage: 8-bit row-major pixel container (grayscale or RGB) with PNG I/O
// and bilinear resampling.

#pragma once

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <vector>

#include "ferroscope/core.hpp"

namespace ferroscope::imgrid {

struct RawImage {
    int height = 0;
    int width = 0;
    int channels = 1;  // 1 or 3
    std::vector<std::uint8_t> pixels;  // row-major, interleaved channels

    RawImage() = default;
    RawImage(int h, int w, int c, std::uint8_t fill = 0)
        : height(h), width(w), channels(c), pixels(std::size_t(h) * std::size_t(w) * std::size_t(c), fill) {
        if (h < 1 || w < 1) throw InvalidArgument("RawImage: dimensions must be >= 1");
        if (c != 1 && c != 3) throw InvalidArgument("RawImage: channels must be 1 or 3");
    }

    std::uint8_t& at(int y, int x, int c = 0) {
        return pixels[(std::size_t(y) * std::size_t(width) + std::size_t(x)) * std::size_t(channels) +
                      std::size_t(c)];
    }
    std::uint8_t at(int y, int x, int c = 0) const {
        return pixels[(std::size_t(y) * std::size_t(width) + std::size_t(x)) * std::size_t(channels) +
                      std::size_t(c)];
    }
    std::size_t size() const { return pixels.size(); }

    bool operator==(const RawImage& o) const {
        return height == o.height && width == o.width && channels == o.channels && pixels == o.pixels;
    }
};

// ---------------------------------------------------------------------------
// PNG encode/decode (8-bit grayscale and RGB). Palette, low-bit-depth and
// 16-bit inputs are normalized to 8-bit; alpha channels are dropped.
// ---------------------------------------------------------------------------

namespace detail {

struct PngReadState {
    const std::string* bytes;
    std::size_t pos;
};

inline void png_read_from_string(png_structp png, png_bytep out, png_size_t n) {
    auto* st = static_cast<PngReadState*>(png_get_io_ptr(png));
    if (st->pos + n > st->bytes->size()) png_error(png, "unexpected end of PNG stream");
    std::memcpy(out, st->bytes->data() + st->pos, n);
    st->pos += n;
}

inline void png_write_to_string(png_structp png, png_bytep data, png_size_t n) {
    auto* out = static_cast<std::string*>(png_get_io_ptr(png));
    out->append(reinterpret_cast<const char*>(data), n);
}

inline void png_flush_noop(png_structp) {}

}  // namespace detail

inline RawImage decode_png(const std::string& bytes) {
    if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0)
        throw FormatError("not a PNG stream");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("png_create_info_struct failed");
    }

    RawImage img;
    std::vector<png_bytep> rows;
    detail::PngReadState st{&bytes, 0};

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("corrupt PNG stream");
    }

    png_set_read_fn(png, &st, detail::png_read_from_string);
    png_read_info(png, info);

    png_uint_32 w = 0, h = 0;
    int bit_depth = 0, color_type = 0;
    png_get_IHDR(png, info, &w, &h, &bit_depth, &color_type, nullptr, nullptr, nullptr);

    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    int channels = png_get_channels(png, info);
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("unsupported PNG channel count after normalization: " + std::to_string(channels));
    }

    img = RawImage(int(h), int(w), channels);
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y)
        rows[y] = img.pixels.data() + std::size_t(y) * std::size_t(w) * std::size_t(channels);
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

inline std::string encode_png(const RawImage& img) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("png_create_info_struct failed");
    }

    std::string out;
    std::vector<png_const_bytep> rows(std::size_t(img.height));

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG encode failed");
    }

    png_set_write_fn(png, &out, detail::png_write_to_string, detail::png_flush_noop);
    int color = img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
    png_set_IHDR(png, info, png_uint_32(img.width), png_uint_32(img.height), 8, color,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < img.height; ++y)
        rows[std::size_t(y)] =
            img.pixels.data() + std::size_t(y) * std::size_t(img.width) * std::size_t(img.channels);
    png_write_image(png, const_cast<png_bytepp>(rows.data()));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

inline RawImage read_png(const std::filesystem::path& path) { return decode_png(read_file(path)); }

inline void write_png(const std::filesystem::path& path, const RawImage& img) {
    write_file_atomic(path, encode_png(img));
}

// ---------------------------------------------------------------------------
// Bilinear resize with half-pixel-center sampling.
// ---------------------------------------------------------------------------

inline RawImage resize_bilinear(const RawImage& src, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw InvalidArgument("resize_bilinear: output dims must be >= 1");
    if (out_h == src.height && out_w == src.width) return src;

    RawImage dst(out_h, out_w, src.channels);
    const double sy = double(src.height) / double(out_h);
    const double sx = double(src.width) / double(out_w);
    for (int y = 0; y < out_h; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        if (fy < 0) fy = 0;
        int y0 = int(fy);
        if (y0 > src.height - 1) y0 = src.height - 1;
        int y1 = y0 + 1 < src.height ? y0 + 1 : src.height - 1;
        double wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            if (fx < 0) fx = 0;
            int x0 = int(fx);
            if (x0 > src.width - 1) x0 = src.width - 1;
            int x1 = x0 + 1 < src.width ? x0 + 1 : src.width - 1;
            double wx = fx - x0;
            for (int c = 0; c < src.channels; ++c) {
                double v = (1 - wy) * ((1 - wx) * src.at(y0, x0, c) + wx * src.at(y0, x1, c)) +
                           wy * ((1 - wx) * src.at(y1, x0, c) + wx * src.at(y1, x1, c));
                dst.at(y, x, c) = quantize_u8(v);
            }
        }
    }
    return dst;
}

}  // namespace ferroscope::imgrid
