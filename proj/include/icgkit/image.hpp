#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "icgkit/common.hpp"

namespace icgkit {

// Single-channel float image, row-major. Pixel (x, y) has its center at
// integer coordinates (x, y).
struct Image {
    int width = 0;
    int height = 0;
    std::vector<float> data;

    Image() = default;
    Image(int w, int h, float fill = 0.0f);

    bool empty() const { return width == 0 || height == 0; }
    float& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    float at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
    bool contains(double x, double y) const {
        return x >= 0.0 && y >= 0.0 && x <= width - 1 && y <= height - 1;
    }

    friend bool operator==(const Image&, const Image&) = default;
};

struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;  // r, g, b interleaved

    RgbImage() = default;
    RgbImage(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0) {}
    std::uint8_t* px(int x, int y) { return &data[(static_cast<std::size_t>(y) * width + x) * 3]; }
    const std::uint8_t* px(int x, int y) const {
        return &data[(static_cast<std::size_t>(y) * width + x) * 3];
    }

    friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

// Axis-aligned rectangle [x, x + w) x [y, y + h) in pixel-center coordinates.
struct Rect {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;
};

// Bilinear interpolation. The caller guarantees 0 <= x <= w-1, 0 <= y <= h-1.
float bilinear(const Image& img, double x, double y);

// Bilinear interpolation with coordinates clamped to the image.
float bilinear_clamped(const Image& img, double x, double y);

Image crop(const Image& img, int x0, int y0, int w, int h);

// [1 4 6 4 1]/16 blur followed by 2x decimation; size (w+1)/2 x (h+1)/2.
Image pyr_down(const Image& img);

// Central differences; one-sided at the border.
void gradients(const Image& img, Image& gx, Image& gy);

// Minimum eigenvalue of the structure tensor summed over a 3x3 block.
// Zero within 2 px of the border.
Image min_eigen_response(const Image& img);

struct Corner {
    Point2 pos;
    float response = 0.0f;
};

struct CornerConfig {
    int max_corners = 64;
    double quality = 0.01;        // relative to the strongest response in the region
    double min_response = 1e-6;   // absolute floor
    double min_distance = 5.0;
};

// Local 3x3 maxima of `response` inside `region`, strongest first (raster
// order on ties), greedily thinned to min_distance.
std::vector<Corner> good_features(const Image& response, const Rect& region,
                                  const CornerConfig& config = {});

// PNG I/O. Gray or RGB(A), 8 or 16 bit; color reduces to luminance
// 0.299 R + 0.587 G + 0.114 B; values scale to [0, 1].
Image read_png(const std::filesystem::path& path);
void write_png_gray16(const std::filesystem::path& path, const Image& img);
void write_png_gray8(const std::filesystem::path& path, const Image& img);
void write_png_mask(const std::filesystem::path& path, const std::vector<std::uint8_t>& mask,
                    int width, int height);
std::vector<std::uint8_t> read_png_mask(const std::filesystem::path& path, int& width,
                                        int& height);
void write_png_rgb(const std::filesystem::path& path, const RgbImage& img);
RgbImage read_png_rgb(const std::filesystem::path& path);

}  // namespace icgkit
