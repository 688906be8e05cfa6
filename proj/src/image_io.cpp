#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>

#include "icgkit/error.hpp"
#include "icgkit/image.hpp"

namespace icgkit {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) {
        throw FormatError(std::string("cannot ") + (mode[0] == 'r' ? "open" : "write") +
                          " image '" + path.string() + "'");
    }
    return f;
}

// Decoded PNG: samples per pixel after palette expansion, 8 or 16 bit.
struct Raw {
    int width = 0;
    int height = 0;
    int channels = 0;
    int depth = 8;
    std::vector<std::uint8_t> bytes;

    double sample(std::size_t pixel, int ch) const {
        const std::size_t i = pixel * channels + ch;
        if (depth == 16) return ((bytes[2 * i] << 8) | bytes[2 * i + 1]) / 65535.0;
        return bytes[i] / 255.0;
    }
};

Raw decode(const std::filesystem::path& path) {
    FilePtr f = open_file(path, "rb");
    png_byte sig[8];
    if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
        throw FormatError("'" + path.string() + "' is not a PNG file");
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    Raw raw;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("corrupt PNG '" + path.string() + "'");
    }
    png_init_io(png, f.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_read_update_info(png, info);
    raw.width = static_cast<int>(png_get_image_width(png, info));
    raw.height = static_cast<int>(png_get_image_height(png, info));
    raw.channels = png_get_channels(png, info);
    raw.depth = png_get_bit_depth(png, info);
    const std::size_t stride = png_get_rowbytes(png, info);
    raw.bytes.resize(stride * raw.height);
    rows.resize(raw.height);
    for (int y = 0; y < raw.height; ++y) rows[y] = raw.bytes.data() + stride * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return raw;
}

void encode(const std::filesystem::path& path, int width, int height, int color, int depth,
            const std::vector<std::uint8_t>& bytes) {
    FilePtr f = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw FormatError("failed to encode PNG '" + path.string() + "'");
    }
    png_init_io(png, f.get());
    png_set_compression_level(png, 6);
    png_set_filter(png, 0, PNG_FILTER_NONE);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
                 depth, color, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const int channels = color == PNG_COLOR_TYPE_RGB ? 3 : 1;
    const std::size_t stride = static_cast<std::size_t>(width) * channels * (depth / 8);
    for (int y = 0; y < height; ++y) {
        png_write_row(png, const_cast<png_bytep>(bytes.data() + stride * y));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

std::uint16_t quantize16(float v) {
    const double c = std::clamp(static_cast<double>(v), 0.0, 1.0);
    return static_cast<std::uint16_t>(std::lround(c * 65535.0));
}

}  // namespace

Image read_png(const std::filesystem::path& path) {
    const Raw raw = decode(path);
    Image img(raw.width, raw.height);
    const bool color = raw.channels >= 3;
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        double v;
        if (color) {
            v = 0.299 * raw.sample(i, 0) + 0.587 * raw.sample(i, 1) + 0.114 * raw.sample(i, 2);
        } else {
            v = raw.sample(i, 0);
        }
        img.data[i] = static_cast<float>(v);
    }
    return img;
}

void write_png_gray16(const std::filesystem::path& path, const Image& img) {
    std::vector<std::uint8_t> bytes(img.data.size() * 2);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const std::uint16_t q = quantize16(img.data[i]);
        bytes[2 * i] = static_cast<std::uint8_t>(q >> 8);
        bytes[2 * i + 1] = static_cast<std::uint8_t>(q & 0xff);
    }
    encode(path, img.width, img.height, PNG_COLOR_TYPE_GRAY, 16, bytes);
}

void write_png_gray8(const std::filesystem::path& path, const Image& img) {
    std::vector<std::uint8_t> bytes(img.data.size());
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const double c = std::clamp(static_cast<double>(img.data[i]), 0.0, 1.0);
        bytes[i] = static_cast<std::uint8_t>(std::lround(c * 255.0));
    }
    encode(path, img.width, img.height, PNG_COLOR_TYPE_GRAY, 8, bytes);
}

void write_png_mask(const std::filesystem::path& path, const std::vector<std::uint8_t>& mask,
                    int width, int height) {
    std::vector<std::uint8_t> bytes(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i) bytes[i] = mask[i] ? 255 : 0;
    encode(path, width, height, PNG_COLOR_TYPE_GRAY, 8, bytes);
}

std::vector<std::uint8_t> read_png_mask(const std::filesystem::path& path, int& width,
                                        int& height) {
    const Raw raw = decode(path);
    width = raw.width;
    height = raw.height;
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(width) * height);
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = raw.sample(i, 0) > 0.5 ? 1 : 0;
    return mask;
}

void write_png_rgb(const std::filesystem::path& path, const RgbImage& img) {
    encode(path, img.width, img.height, PNG_COLOR_TYPE_RGB, 8, img.data);
}

RgbImage read_png_rgb(const std::filesystem::path& path) {
    const Raw raw = decode(path);
    RgbImage img(raw.width, raw.height);
    const std::size_t n = static_cast<std::size_t>(raw.width) * raw.height;
    for (std::size_t i = 0; i < n; ++i) {
        for (int c = 0; c < 3; ++c) {
            const int ch = raw.channels >= 3 ? c : 0;
            img.data[3 * i + c] = static_cast<std::uint8_t>(std::lround(raw.sample(i, ch) * 255.0));
        }
    }
    return img;
}

}  // namespace icgkit
