#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "icgkit/features.hpp"
#include "icgkit/image.hpp"
#include "icgkit/series.hpp"

namespace icgkit {

// Stabilized NIR intensity I(x, y, t). Invalid samples hold NaN.
struct PixelField {
    int width = 0;
    int height = 0;
    std::size_t n_frames = 0;
    double sample_period_s = 1.0;
    std::vector<float> data;  // frame-major, row-major
    std::vector<std::uint8_t> valid;

    std::size_t index(int x, int y, std::size_t t) const {
        return (t * static_cast<std::size_t>(height) + static_cast<std::size_t>(y)) * width + x;
    }
    // Invalid samples compare equal regardless of their stored value.
    friend bool operator==(const PixelField& a, const PixelField& b);
};

// Appends stabilized frames one at a time.
class FieldBuilder {
public:
    FieldBuilder(int width, int height, double sample_period_s);
    // Samples under a false mask, or that are not finite and >= 0, become invalid.
    void add(const Image& nir, const std::vector<std::uint8_t>& mask);
    PixelField finish() &&;

private:
    PixelField field_;
};

PixelField build_field(const std::vector<Image>& nir,
                       const std::vector<std::vector<std::uint8_t>>& masks, double sample_period_s);

TimeSeries pixel_series(const PixelField& field, int x, int y);

// PFLD: "PFLD", version byte 1, little-endian u32 width, height, n_frames,
// f32 sample period, then f32 samples with NaN for no data.
void save_field(const std::filesystem::path& path, const PixelField& field);
PixelField load_field(const std::filesystem::path& path);

// Reads nir/ and mask/ frames written by stabilize_to_directory.
PixelField load_stabilized_field(const std::filesystem::path& dir);

const std::vector<std::string>& heatmap_feature_ids();  // mu decay_slope ttp upslope time_ratio

struct Heatmap {
    int width = 0;
    int height = 0;
    std::vector<double> values;
    std::vector<std::uint8_t> valid;
    std::string feature_id;
    std::pair<double, double> value_range{0.0, 1.0};
};

struct HeatmapConfig {
    FeatureConfig features;
    double min_valid_fraction = 0.8;
    double lo_percentile = 2.0;
    double hi_percentile = 98.0;
    std::optional<std::pair<double, double>> value_range;  // overrides the percentiles
};

// Per-pixel feature of pixel_series; mu is center_of_mass, the others come
// from simple_features. Throws ConfigError for an unknown feature id.
Heatmap feature_map(const PixelField& field, const std::string& feature_id,
                    const HeatmapConfig& config = {});

// Linear-interpolated percentile (0..100) of the values; NaN when empty.
double percentile(std::vector<double> values, double pct);

const std::array<std::array<std::uint8_t, 3>, 256>& colormap_table();

// floor((v - lo) / (hi - lo) * 256) clamped to [0, 255]; 128 when hi <= lo.
int colormap_index(double v, double lo, double hi);

// With a base frame, valid pixels blend (1 - alpha) * base + alpha * color and
// invalid pixels show the base. Without one, invalid pixels are green.
RgbImage render(const Heatmap& map, const RgbImage* base = nullptr, double alpha = 1.0);

// PNG plus `<stem>.json` with feature_id and value_range.
void save_heatmap(const std::filesystem::path& png_path, const Heatmap& map, const RgbImage& image);

}  // namespace icgkit
